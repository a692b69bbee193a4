//! Path sampling under controlled laws.
//!
//! Every sample draws from its own ChaCha stream keyed by
//! `(master_seed, sample_index)`, so results do not depend on thread count
//! or on the order in which samples are produced.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::control::{generator_for, DiscreteControl, JumpControl, JumpHistory};
use crate::error::{Error, Result};
use crate::markov::{DiscretePath, Distribution, GeneratorMatrix, Jump, JumpTrajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeededSampler {
    pub master_seed: u64,
    pub sample_index: u64,
}

impl SeededSampler {
    pub fn new(master_seed: u64, sample_index: u64) -> Self {
        Self {
            master_seed,
            sample_index,
        }
    }

    /// Fresh generator for this sample; the stream id is the sample index.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.sample_index);
        rng
    }
}

/// Inverse-CDF draw: the smallest index whose cumulative weight exceeds
/// `u * total`. Zero-weight entries are never selected.
fn pick_index(weights: impl Iterator<Item = (usize, f64)> + Clone, u: f64) -> usize {
    let total: f64 = weights.clone().map(|(_, w)| w).sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = None;
    for (idx, w) in weights {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last_positive = Some(idx);
        if target < acc {
            return idx;
        }
    }
    last_positive.expect("at least one positive weight")
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Draws `X_0 ~ nu` and `X_k ~ P_k(X_{k-1}, .)` for `k = 1..=steps`.
pub fn simulate_discrete(
    nu: &Distribution,
    control: &dyn DiscreteControl,
    steps: usize,
    sampler: SeededSampler,
) -> Result<DiscretePath> {
    let n = nu.n_states();
    let mut rng = sampler.rng();
    let mut states = Vec::with_capacity(steps + 1);
    states.push(pick_index(nu.probs().iter().copied().enumerate(), rng.random()));
    for k in 1..=steps {
        let p = control.transition(k, &states)?;
        check_dims(n, p.n_states())?;
        let from = states[k - 1];
        let row = p.matrix().row(from);
        let next = pick_index(row.iter().copied().enumerate(), rng.random());
        states.push(next);
    }
    Ok(DiscretePath::from_unchecked(states))
}

/// Exact jump-by-jump simulation on `[0, horizon]`.
///
/// The generator is `q0` when `control` is `None`, otherwise the quadratic
/// snapshot selected by the control on the history up to the latest jump.
pub fn simulate_ctmc(
    nu: &Distribution,
    q0: &GeneratorMatrix,
    control: Option<&dyn JumpControl>,
    horizon: f64,
    sampler: SeededSampler,
) -> Result<JumpTrajectory> {
    if !horizon.is_finite() || horizon <= 0.0 {
        return Err(Error::InvalidTime(horizon));
    }
    let n = q0.n_states();
    check_dims(n, nu.n_states())?;
    let mut rng = sampler.rng();
    let initial = pick_index(nu.probs().iter().copied().enumerate(), rng.random());
    let mut jumps: Vec<Jump> = Vec::new();
    let mut t = 0.0;
    loop {
        let history = JumpHistory {
            initial_state: initial,
            jumps: &jumps,
        };
        let state = history.current_state();
        let q = generator_for(q0, control, &history)?;
        let rate = q.offdiag_row_sum(state);
        if rate <= 0.0 {
            break;
        }
        let hold: f64 = rng.sample::<f64, _>(Exp1) / rate;
        if t + hold > horizon {
            break;
        }
        t += hold;
        let weights = (0..n).filter(|&j| j != state).map(|j| (j, q.get(state, j)));
        let target = pick_index(weights, rng.random());
        jumps.push(Jump { time: t, target });
    }
    Ok(JumpTrajectory::from_unchecked(initial, jumps, horizon))
}
