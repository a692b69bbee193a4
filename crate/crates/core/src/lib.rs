//! Change of measure for finite-state Markov chains and Markov jump processes.
//!
//! A controlled law (a predictable sequence of transition matrices, or a
//! generator from the quadratic family driven by jump history) is compared
//! against a stationary reference law. The crate samples paths under either
//! law, evaluates the likelihood-ratio process along each path, recovers
//! martingale-representation coefficients, and checks all of it against
//! exhaustive enumeration or the matrix-exponential semigroup.
//!
//! States are 0-based in the library API; the CLI and config files use 1-based
//! labels.

pub mod cli;
pub mod config;
pub mod control;
pub mod error;
pub mod likelihood;
pub mod markov;
pub mod oracle;
pub mod par;
pub mod quadratic;
pub mod representation;
pub mod sim;
pub mod verify;

pub use control::{
    DiscreteControl, FnControl, FnJumpControl, JumpControl, JumpHistory, JumpRule, JumpTableControl, StepRule,
    StepTableControl,
};
pub use error::{Error, Result};
pub use likelihood::{
    compensated_log_integral, importance_estimate_ctmc, importance_estimate_discrete, likelihood_ctmc,
    likelihood_discrete, Estimate, LikelihoodProcess,
};
pub use markov::{
    apply_generator, count_jumps, transition_matrix, validate_generator, validate_stochastic, DiscretePath,
    Distribution, GeneratorMatrix, Jump, JumpTrajectory, StateSpace, StochasticMatrix,
};
pub use oracle::{
    ctmc_marginal_oracle, enumerate_paths, exact_expectation, pathwise_likelihood_oracle, WeightedPathSet,
};
pub use quadratic::{build_quadratic, feasibility_margin, QuadraticCoefficients};
pub use representation::{
    delta_basis_decompose, extract_jump_coefficients, hadamard_decompose, recover_transition, DeltaIncrement,
    HadamardCorrection, RepresentationCoefficients,
};
pub use sim::{simulate_ctmc, simulate_discrete, SeededSampler};
pub use verify::{
    check_discrete_martingale, check_dynkin_mc, check_generator_limit, check_z_martingale_discrete, CheckReport,
};
