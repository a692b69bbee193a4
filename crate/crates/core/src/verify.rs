//! Martingale checks: exact on enumerated discrete path sets, Monte Carlo
//! for jump processes, and the small-`h` limit of the semigroup.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::control::{generator_for, DiscreteControl, JumpControl, JumpHistory};
use crate::error::{Error, Result};
use crate::likelihood::{likelihood_discrete, Estimate};
use crate::markov::{
    apply_generator, transition_matrix, Distribution, GeneratorMatrix, JumpTrajectory, StochasticMatrix,
};
use crate::oracle::enumerate_paths;
use crate::par;
use crate::sim::{check_dims, simulate_ctmc, SeededSampler};

/// Tolerance for checks that are exact up to rounding.
pub const EXACT_TOL: f64 = 1e-12;
/// Pass band, in standard errors, for Monte Carlo checks.
pub const SIGMA_RULE: f64 = 4.0;
pub const DEFAULT_MC_SAMPLES: usize = 100_000;

/// Largest state count and step count accepted by the enumeration checks.
pub const MAX_ENUM_STATES: usize = 6;
pub const MAX_ENUM_STEPS: usize = 8;

/// Outcome of a single check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub scale: String,
    /// Residual for exact checks, `|estimate - expected|` for Monte Carlo checks.
    pub value: f64,
    pub estimate: Option<Estimate>,
    pub threshold: f64,
    pub passed: bool,
    /// Null conditioning atoms skipped by exact checks.
    pub skipped_atoms: usize,
}

impl CheckReport {
    pub fn exact(name: impl Into<String>, scale: impl Into<String>, residual: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            scale: scale.into(),
            value: residual,
            estimate: None,
            threshold,
            passed: residual <= threshold,
            skipped_atoms: 0,
        }
    }

    /// Passes when `|estimate - expected| <= sigmas * std_error`.
    pub fn statistical(
        name: impl Into<String>,
        scale: impl Into<String>,
        est: &Estimate,
        expected: f64,
        sigmas: f64,
    ) -> Self {
        Self {
            name: name.into(),
            scale: scale.into(),
            value: (est.estimate - expected).abs(),
            estimate: Some(*est),
            threshold: sigmas * est.std_error,
            passed: est.within(expected, sigmas),
            skipped_atoms: 0,
        }
    }
}

pub(crate) fn check_enum_scale(n_states: usize, steps: usize) -> Result<()> {
    if n_states > MAX_ENUM_STATES || steps > MAX_ENUM_STEPS {
        return Err(Error::ScaleTooLarge {
            paths: (n_states as f64).powi(steps as i32 + 1),
            limit: (MAX_ENUM_STATES as f64).powi(MAX_ENUM_STEPS as i32 + 1),
        });
    }
    Ok(())
}

/// Conditional drift of `M^z` on one history atom.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomResidual {
    pub step: usize,
    /// `X_0..X_{step-1}`.
    pub prefix: Vec<usize>,
    /// `E[M_k - M_{k-1} | prefix]`.
    pub residual: f64,
}

/// `E[z_{X_k} - (P̂_k z)_{X_{k-1}} | X_0..X_{k-1}]` on every nonnull atom,
/// the expectation taken under the law of `control` by enumeration. `claimed`
/// supplies `P̂_k` (defaults to `control`). Also returns the number of null
/// atoms skipped.
pub fn discrete_martingale_residuals(
    nu: &Distribution,
    control: &dyn DiscreteControl,
    claimed: Option<&dyn DiscreteControl>,
    steps: usize,
    z: &[f64],
) -> Result<(Vec<AtomResidual>, usize)> {
    let n = nu.n_states();
    check_enum_scale(n, steps)?;
    check_dims(n, z.len())?;
    let claimed = claimed.unwrap_or(control);
    let paths = enumerate_paths(nu, control, steps)?;
    let mut out = Vec::new();
    let mut skipped = 0;
    for k in 1..=steps {
        // prefix -> (mass, sum of prob * z_{X_k})
        let mut atoms: HashMap<&[usize], (f64, f64)> = HashMap::new();
        for (path, p) in paths.entries() {
            let s = path.states();
            let e = atoms.entry(&s[..k]).or_insert((0.0, 0.0));
            e.0 += p;
            e.1 += p * z[s[k]];
        }
        let mut keys: Vec<_> = atoms.keys().copied().collect();
        keys.sort();
        for prefix in keys {
            let (mass, sum) = atoms[prefix];
            let p_hat = claimed.transition(k, prefix)?;
            let drift = p_hat.apply(z)?[prefix[k - 1]];
            out.push(AtomResidual {
                step: k,
                prefix: prefix.to_vec(),
                residual: sum / mass - drift,
            });
        }
        skipped += n.pow(k as u32) - atoms.len();
    }
    Ok((out, skipped))
}

/// Exact check that `M^z_k = z_{X_k} - z_{X_0} - sum ((P_k - I) z)_{X_{k-1}}`
/// has zero conditional increments on every atom.
pub fn check_discrete_martingale(
    nu: &Distribution,
    control: &dyn DiscreteControl,
    claimed: Option<&dyn DiscreteControl>,
    steps: usize,
    z: &[f64],
) -> Result<CheckReport> {
    let (residuals, skipped) = discrete_martingale_residuals(nu, control, claimed, steps, z)?;
    let max = residuals.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);
    let mut report = CheckReport::exact(
        "discrete-martingale",
        format!("N={} n={} atoms={}", nu.n_states(), steps, residuals.len()),
        max,
        EXACT_TOL,
    );
    report.skipped_atoms = skipped;
    Ok(report)
}

/// Exact `P0`-martingale check for `Z`: `E_0[Z_k | atom] = Z_{k-1}` on every
/// atom, plus `E_0[Z_n] - 1`.
pub fn check_z_martingale_discrete(
    nu: &Distribution,
    control: &dyn DiscreteControl,
    p0: &StochasticMatrix,
    steps: usize,
) -> Result<Vec<CheckReport>> {
    let n = nu.n_states();
    check_enum_scale(n, steps)?;
    let paths = enumerate_paths(nu, p0, steps)?;
    let logz: Vec<Vec<f64>> = paths
        .entries()
        .iter()
        .map(|(path, _)| likelihood_discrete(path, p0, control).map(|z| z.log_values().to_vec()))
        .collect::<Result<_>>()?;
    let mut max_residual: f64 = 0.0;
    let mut n_atoms = 0;
    for k in 1..=steps {
        // prefix -> (mass, sum of prob * Z_k, Z_{k-1})
        let mut atoms: HashMap<&[usize], (f64, f64, f64)> = HashMap::new();
        for ((path, p), lz) in paths.entries().iter().zip(&logz) {
            let e = atoms.entry(&path.states()[..k]).or_insert((0.0, 0.0, lz[k - 1].exp()));
            e.0 += p;
            e.1 += p * lz[k].exp();
        }
        n_atoms += atoms.len();
        for (mass, sum, prev) in atoms.values() {
            max_residual = max_residual.max((sum / mass - prev).abs());
        }
    }
    let mean: f64 = paths
        .entries()
        .iter()
        .zip(&logz)
        .map(|((_, p), lz)| p * lz[steps].exp())
        .sum();
    let scale = format!("N={n} n={steps} atoms={n_atoms}");
    Ok(vec![
        CheckReport::exact("z-martingale-atoms", scale.clone(), max_residual, EXACT_TOL),
        CheckReport::exact("z-mean-one", scale, (mean - 1.0).abs(), EXACT_TOL),
    ])
}

/// `M_t^f` at the requested times along one trajectory, with the compensator
/// `int_0^t (q_s f)(X_s) ds` built from `q0` and `compensator` (or `q0` alone).
pub fn dynkin_martingale(
    traj: &JumpTrajectory,
    q0: &GeneratorMatrix,
    compensator: Option<&dyn JumpControl>,
    f: &[f64],
    times: &[f64],
) -> Result<Vec<f64>> {
    check_dims(q0.n_states(), f.len())?;
    let segments = traj.segments();
    let mut drifts = Vec::with_capacity(segments.len());
    for (k, seg) in segments.iter().enumerate() {
        let history = JumpHistory {
            initial_state: traj.initial_state(),
            jumps: &traj.jumps()[..k],
        };
        let q = generator_for(q0, compensator, &history)?;
        drifts.push(apply_generator(&q, f)?[seg.state]);
    }
    let f0 = f[traj.initial_state()];
    Ok(times
        .iter()
        .map(|&t| {
            let integral: f64 = segments
                .iter()
                .zip(&drifts)
                .filter(|(seg, _)| seg.start < t)
                .map(|(seg, d)| d * (seg.end.min(t) - seg.start))
                .sum();
            f[traj.state_at(t)] - f0 - integral
        })
        .collect())
}

/// Monte Carlo check that `E[M_T^f] = 0` and `E[M_T^f - M_{T/2}^f] = 0` for
/// trajectories simulated under `q0` driven by `law`, with the compensator
/// built from `compensator`. Passing the same control for both is the
/// matched case.
#[allow(clippy::too_many_arguments)]
pub fn check_dynkin_mc(
    nu: &Distribution,
    q0: &GeneratorMatrix,
    law: Option<&dyn JumpControl>,
    compensator: Option<&dyn JumpControl>,
    f: &[f64],
    horizon: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<CheckReport>> {
    let half = horizon / 2.0;
    let values = par::try_map_indexed(n_samples, |i| {
        let traj = simulate_ctmc(nu, q0, law, horizon, SeededSampler::new(seed, i as u64))?;
        dynkin_martingale(&traj, q0, compensator, f, &[half, horizon])
    })?;
    let terminal: Vec<f64> = values.iter().map(|m| m[1]).collect();
    let increment: Vec<f64> = values.iter().map(|m| m[1] - m[0]).collect();
    let scale = format!("N={} T={} samples={}", q0.n_states(), horizon, n_samples);
    Ok(vec![
        CheckReport::statistical(
            "dynkin-terminal",
            scale.clone(),
            &Estimate::from_samples(&terminal)?,
            0.0,
            SIGMA_RULE,
        ),
        CheckReport::statistical(
            "dynkin-increment",
            scale,
            &Estimate::from_samples(&increment)?,
            0.0,
            SIGMA_RULE,
        ),
    ])
}

/// Difference quotients `(exp(hQ) - I) / h` against `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorLimit {
    /// `(h, max_ij |(exp(hQ) - I)/h - Q|)`, in the order given.
    pub deviations: Vec<(f64, f64)>,
    /// Slope estimated from the two largest steps.
    pub slope: f64,
    pub reports: Vec<CheckReport>,
}

/// Relative slack on the first-order error bounds.
pub const LIMIT_MARGIN: f64 = 0.1;

pub fn difference_quotient(q: &GeneratorMatrix, h: f64) -> Result<DMatrix<f64>> {
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidTime(h));
    }
    let p = transition_matrix(q, h)?;
    let n = q.n_states();
    Ok((p.into_matrix() - DMatrix::<f64>::identity(n, n)) / h)
}

/// Checks the generator limit on a decreasing sequence of steps: deviations
/// decrease, stay below `||Q||^2 h / 2 (1 + margin)` and below `C h` with `C`
/// fitted on the two largest steps, and diagonals of the quotient are negative.
pub fn check_generator_limit(q: &GeneratorMatrix, steps: &[f64]) -> Result<GeneratorLimit> {
    if steps.len() < 2 {
        return Err(Error::TooFewSamples(steps.len()));
    }
    let n = q.n_states();
    let moving: Vec<usize> = (0..n).filter(|&i| q.exit_rate(i) > 0.0).collect();
    let mut deviations = Vec::with_capacity(steps.len());
    let mut diag_max = f64::NEG_INFINITY;
    for &h in steps {
        let dq = difference_quotient(q, h)?;
        for &i in &moving {
            diag_max = diag_max.max(dq[(i, i)]);
        }
        deviations.push((h, (dq - q.matrix()).amax()));
    }
    let mut by_size = deviations.clone();
    by_size.sort_by(|a, b| b.0.total_cmp(&a.0));
    let slope = by_size[..2].iter().map(|(h, d)| d / h).fold(0.0, f64::max);

    let norm = q.inf_norm();
    let taylor_excess = deviations
        .iter()
        .map(|(h, d)| d - norm * norm * h / 2.0 * (1.0 + LIMIT_MARGIN))
        .fold(f64::NEG_INFINITY, f64::max);
    let slope_excess = deviations
        .iter()
        .map(|(h, d)| d - slope * h * (1.0 + LIMIT_MARGIN))
        .fold(f64::NEG_INFINITY, f64::max);
    // Largest change in deviation when moving to a smaller step; must be negative.
    let monotone_violation = by_size
        .windows(2)
        .map(|w| w[1].1 - w[0].1)
        .fold(f64::NEG_INFINITY, f64::max);

    let scale = format!("N={} steps={}", n, steps.len());
    let strict = |name: &str, value: f64| CheckReport {
        passed: value < 0.0,
        ..CheckReport::exact(name, scale.clone(), value, 0.0)
    };
    let mut reports = vec![
        CheckReport::exact("generator-limit-taylor-bound", scale.clone(), taylor_excess, 0.0),
        CheckReport::exact("generator-limit-linear-rate", scale.clone(), slope_excess, 0.0),
        strict("generator-limit-monotone", monotone_violation),
    ];
    if !moving.is_empty() {
        reports.push(strict("generator-limit-diagonal-sign", diag_max));
    }
    Ok(GeneratorLimit {
        deviations,
        slope,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadratic::QuadraticCoefficients;

    fn p1() -> StochasticMatrix {
        StochasticMatrix::from_rows(&[vec![0.7, 0.3], vec![0.6, 0.4]], true).unwrap()
    }

    #[test]
    fn constant_z_has_zero_residual() {
        let nu = Distribution::uniform(2).unwrap();
        let r = check_discrete_martingale(&nu, &p1(), None, 3, &[2.0, 2.0]).unwrap();
        assert!(r.value <= 1e-15);
        assert!(r.passed);
    }

    #[test]
    fn matched_control_passes() {
        let nu = Distribution::dirac(2, 0).unwrap();
        let r = check_discrete_martingale(&nu, &p1(), None, 3, &[1.0, 0.0]).unwrap();
        assert!(r.passed, "{r:?}");
        // Prefixes starting in state 2 are null: 1 + 2 + 4 of them.
        assert_eq!(r.skipped_atoms, 7);
    }

    #[test]
    fn mismatched_claim_is_detected() {
        let nu = Distribution::uniform(2).unwrap();
        let p0 = StochasticMatrix::uniform(2).unwrap();
        let r = check_discrete_martingale(&nu, &p1(), Some(&p0), 3, &[1.0, 0.0]).unwrap();
        // ((P1 - P0) z) = (0.2, 0.1)
        assert!((r.value - 0.2).abs() < 1e-12);
        assert!(!r.passed);
    }

    #[test]
    fn scale_guard() {
        let nu = Distribution::uniform(7).unwrap();
        let p = StochasticMatrix::uniform(7).unwrap();
        assert!(matches!(
            check_discrete_martingale(&nu, &p, None, 1, &[0.0; 7]),
            Err(Error::ScaleTooLarge { .. })
        ));
    }

    #[test]
    fn z_martingale_identity_and_p1() {
        let nu = Distribution::uniform(2).unwrap();
        let p0 = StochasticMatrix::uniform(2).unwrap();
        for r in check_z_martingale_discrete(&nu, &p0, &p0, 4).unwrap() {
            assert_eq!(r.value, 0.0);
        }
        for r in check_z_martingale_discrete(&nu, &p1(), &p0, 4).unwrap() {
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn dynkin_constant_f_is_identically_zero() {
        let q0 = GeneratorMatrix::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]], true).unwrap();
        let nu = Distribution::dirac(2, 0).unwrap();
        for i in 0..100 {
            let traj = simulate_ctmc(&nu, &q0, None, 1.0, SeededSampler::new(1, i)).unwrap();
            assert_eq!(
                dynkin_martingale(&traj, &q0, None, &[3.0, 3.0], &[0.5, 1.0]).unwrap(),
                vec![0.0, 0.0]
            );
        }
    }

    #[test]
    fn dynkin_matched_and_inflated() {
        let q0 = GeneratorMatrix::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]], true).unwrap();
        let nu = Distribution::dirac(2, 0).unwrap();
        let matched = check_dynkin_mc(&nu, &q0, None, None, &[1.0, 0.0], 1.0, 100_000, 77).unwrap();
        assert!(matched.iter().all(|r| r.passed), "{matched:?}");
        let doubled = QuadraticCoefficients::scaled(2, 2.0);
        let wrong = check_dynkin_mc(&nu, &q0, None, Some(&doubled), &[1.0, 0.0], 1.0, 100_000, 77).unwrap();
        assert!(!wrong[0].passed, "{wrong:?}");
    }

    #[test]
    fn generator_limit_two_state() {
        let q = GeneratorMatrix::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]], true).unwrap();
        let lim = check_generator_limit(&q, &[1e-2, 1e-3, 1e-4]).unwrap();
        assert!(lim.reports.iter().all(|r| r.passed), "{:?}", lim.reports);
        // ||Q^2|| h / 2 = 1e-4 at h = 1e-4.
        assert!(lim.deviations[2].1 <= 1e-4 * (1.0 + 1e-6));
    }

    #[test]
    fn halving_step_roughly_halves_deviation() {
        let q = GeneratorMatrix::from_rows(
            &[vec![-3.0, 1.0, 2.0], vec![0.5, -1.0, 0.5], vec![1.0, 1.0, -2.0]],
            true,
        )
        .unwrap();
        let mut h = 1e-2;
        while h > 1e-4 {
            let d1 = (difference_quotient(&q, h).unwrap() - q.matrix()).amax();
            let d2 = (difference_quotient(&q, h / 2.0).unwrap() - q.matrix()).amax();
            assert!(d2 <= 0.6 * d1, "h={h}: {d2} vs {d1}");
            h /= 2.0;
        }
    }
}
