//! Likelihood-ratio processes of a controlled law against a stationary
//! reference, and the importance-sampling estimators built on them.
//!
//! Everything is accumulated in log space. A realized move that the target
//! law forbids drives the ratio to zero; this is recorded as a `-inf` log
//! value plus [`LikelihoodProcess::zero_at`] rather than as an error, since
//! `Z = 0` is a legitimate value for downstream estimators.

use crate::control::{generator_for, DiscreteControl, JumpControl, JumpHistory};
use crate::error::{Error, Result};
use crate::markov::{DiscretePath, Distribution, GeneratorMatrix, JumpTrajectory, StochasticMatrix};
use crate::par;
use crate::sim::{check_dims, simulate_ctmc, simulate_discrete, SeededSampler};

/// `log Z` sampled at evaluation points.
///
/// Discrete time: points `0, 1, .., n`. Continuous time: `0`, every jump
/// epoch, then the horizon. `left_log_values[k]` is the left limit at point
/// `k` (the value before the update applied there).
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodProcess {
    times: Vec<f64>,
    log_values: Vec<f64>,
    left_log_values: Vec<f64>,
    zero_at: Option<usize>,
}

impl LikelihoodProcess {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn log_values(&self) -> &[f64] {
        &self.log_values
    }

    pub fn left_log_values(&self) -> &[f64] {
        &self.left_log_values
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.log_values.iter().map(|v| v.exp())
    }

    pub fn terminal_log(&self) -> f64 {
        *self.log_values.last().expect("at least one evaluation point")
    }

    pub fn terminal(&self) -> f64 {
        self.terminal_log().exp()
    }

    /// First evaluation point at which the ratio became zero.
    pub fn zero_at(&self) -> Option<usize> {
        self.zero_at
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn log_ratio(target: f64, reference: f64) -> f64 {
    if target == 0.0 {
        f64::NEG_INFINITY
    } else {
        target.ln() - reference.ln()
    }
}

/// `log Z_k = sum_{m <= k} [log P_m(X_{m-1}, X_m) - log P0(X_{m-1}, X_m)]`.
pub fn likelihood_discrete(
    path: &DiscretePath,
    p0: &StochasticMatrix,
    control: &dyn DiscreteControl,
) -> Result<LikelihoodProcess> {
    p0.ensure_positive()?;
    let states = path.states();
    for &s in states {
        if s >= p0.n_states() {
            return Err(Error::InvalidState {
                state: s,
                n_states: p0.n_states(),
            });
        }
    }
    let n = path.steps();
    let mut log_values = Vec::with_capacity(n + 1);
    let mut left_log_values = Vec::with_capacity(n + 1);
    let mut zero_at = None;
    let mut acc = 0.0;
    log_values.push(acc);
    left_log_values.push(acc);
    for k in 1..=n {
        let pk = control.transition(k, &states[..k])?;
        check_dims(p0.n_states(), pk.n_states())?;
        let (from, to) = (states[k - 1], states[k]);
        let step = log_ratio(pk.get(from, to), p0.get(from, to));
        if step == f64::NEG_INFINITY && zero_at.is_none() {
            zero_at = Some(k);
        }
        left_log_values.push(acc);
        acc += step;
        log_values.push(acc);
    }
    Ok(LikelihoodProcess {
        times: (0..=n).map(|k| k as f64).collect(),
        log_values,
        left_log_values,
        zero_at,
    })
}

/// Continuous-time ratio: jump terms `log(q/q0)` at each realized jump minus
/// the exact integral of `sum_{j != X_s} (q - q0)(X_s, j)` over the holding
/// intervals.
pub fn likelihood_ctmc(
    traj: &JumpTrajectory,
    q0: &GeneratorMatrix,
    control: &dyn JumpControl,
) -> Result<LikelihoodProcess> {
    q0.ensure_positive_offdiag()?;
    let n_jumps = traj.n_jumps();
    let mut times = Vec::with_capacity(n_jumps + 2);
    let mut log_values = Vec::with_capacity(n_jumps + 2);
    let mut left_log_values = Vec::with_capacity(n_jumps + 2);
    let mut zero_at = None;
    let mut acc = 0.0;
    times.push(0.0);
    log_values.push(acc);
    left_log_values.push(acc);
    for (k, seg) in traj.segments().into_iter().enumerate() {
        let history = JumpHistory {
            initial_state: traj.initial_state(),
            jumps: &traj.jumps()[..k],
        };
        let q = control.generator(q0, &history)?;
        let i = seg.state;
        acc -= (seg.end - seg.start) * (q.offdiag_row_sum(i) - q0.offdiag_row_sum(i));
        times.push(seg.end);
        left_log_values.push(acc);
        if k < n_jumps {
            let j = traj.jumps()[k].target;
            let step = log_ratio(q.get(i, j), q0.get(i, j));
            if step == f64::NEG_INFINITY && zero_at.is_none() {
                zero_at = Some(times.len() - 1);
            }
            acc += step;
        }
        log_values.push(acc);
    }
    Ok(LikelihoodProcess {
        times,
        log_values,
        left_log_values,
        zero_at,
    })
}

/// `U_t = sum_{jumps <= t} log r - int_0^t sum_{j != X_s} q0(X_s, j) log r(s, j) ds`
/// with `r = q_s / q0`.
///
/// Unlike [`likelihood_ctmc`] this has no meaningful value once a target rate
/// seen on `[0, t]` vanishes, so that case is an error.
pub fn compensated_log_integral(
    traj: &JumpTrajectory,
    q0: &GeneratorMatrix,
    control: &dyn JumpControl,
    t: f64,
) -> Result<f64> {
    q0.ensure_positive_offdiag()?;
    if !(0.0..=traj.horizon()).contains(&t) {
        return Err(Error::TimeOutOfRange {
            time: t,
            horizon: traj.horizon(),
        });
    }
    let n = q0.n_states();
    let checked_log = |q: &GeneratorMatrix, i: usize, j: usize| -> Result<f64> {
        let v = q.get(i, j);
        if v <= 0.0 {
            return Err(Error::ZeroTargetRate { row: i, col: j });
        }
        Ok(v.ln() - q0.get(i, j).ln())
    };
    let mut u = 0.0;
    for (k, seg) in traj.segments().into_iter().enumerate() {
        if seg.start > t {
            break;
        }
        let history = JumpHistory {
            initial_state: traj.initial_state(),
            jumps: &traj.jumps()[..k],
        };
        let q = control.generator(q0, &history)?;
        let i = seg.state;
        let duration = seg.end.min(t) - seg.start;
        if duration > 0.0 {
            let mut rate = 0.0;
            for j in (0..n).filter(|&j| j != i) {
                rate += q0.get(i, j) * checked_log(&q, i, j)?;
            }
            u -= duration * rate;
        }
        if let Some(jump) = traj.jumps().get(k) {
            if jump.time <= t {
                u += checked_log(&q, i, jump.target)?;
            }
        }
    }
    Ok(u)
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl Estimate {
    /// Mean and `sd / sqrt(n)`, summed in slice order.
    pub fn from_samples(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::TooFewSamples(n));
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Ok(Self {
            estimate: mean,
            std_error: (var / n as f64).sqrt(),
            samples: n,
        })
    }

    /// Number of standard errors separating the estimate from `value`.
    pub fn z_score(&self, value: f64) -> f64 {
        let diff = (self.estimate - value).abs();
        if self.std_error == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff / self.std_error
        }
    }

    pub fn within(&self, value: f64, sigmas: f64) -> bool {
        self.z_score(value) <= sigmas
    }
}

fn check_payoff(f: &[f64], n: usize) -> Result<()> {
    check_dims(n, f.len())
}

/// Per-sample `Z_n f(X_n)` with paths drawn under the reference chain `p0`.
pub fn weighted_payoffs_discrete(
    f: &[f64],
    nu: &Distribution,
    p0: &StochasticMatrix,
    control: &dyn DiscreteControl,
    steps: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_payoff(f, p0.n_states())?;
    check_dims(p0.n_states(), nu.n_states())?;
    par::try_map_indexed(n_samples, |i| {
        let path = simulate_discrete(nu, p0, steps, SeededSampler::new(seed, i as u64))?;
        let z = likelihood_discrete(&path, p0, control)?;
        Ok(z.terminal() * f[path.terminal()])
    })
}

/// `E_P[f(X_n)]` estimated as the `P0`-sample mean of `Z_n f(X_n)`.
pub fn importance_estimate_discrete(
    f: &[f64],
    nu: &Distribution,
    p0: &StochasticMatrix,
    control: &dyn DiscreteControl,
    steps: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    if n_samples < 2 {
        return Err(Error::TooFewSamples(n_samples));
    }
    Estimate::from_samples(&weighted_payoffs_discrete(f, nu, p0, control, steps, n_samples, seed)?)
}

/// Per-sample `Z_T f(X_T)` with trajectories drawn under the reference generator `q0`.
pub fn weighted_payoffs_ctmc(
    f: &[f64],
    nu: &Distribution,
    q0: &GeneratorMatrix,
    control: &dyn JumpControl,
    horizon: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_payoff(f, q0.n_states())?;
    par::try_map_indexed(n_samples, |i| {
        let traj = simulate_ctmc(nu, q0, None, horizon, SeededSampler::new(seed, i as u64))?;
        let z = likelihood_ctmc(&traj, q0, control)?;
        Ok(z.terminal() * f[traj.terminal_state()])
    })
}

/// `E_P[f(X_T)]` estimated as the `q0`-sample mean of `Z_T f(X_T)`.
pub fn importance_estimate_ctmc(
    f: &[f64],
    nu: &Distribution,
    q0: &GeneratorMatrix,
    control: &dyn JumpControl,
    horizon: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    if n_samples < 2 {
        return Err(Error::TooFewSamples(n_samples));
    }
    Estimate::from_samples(&weighted_payoffs_ctmc(f, nu, q0, control, horizon, n_samples, seed)?)
}

/// Plain Monte Carlo `E[f(X_n)]` with paths drawn under `control` itself.
pub fn direct_estimate_discrete(
    f: &[f64],
    nu: &Distribution,
    control: &dyn DiscreteControl,
    steps: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    check_payoff(f, nu.n_states())?;
    let values = par::try_map_indexed(n_samples, |i| {
        let path = simulate_discrete(nu, control, steps, SeededSampler::new(seed, i as u64))?;
        Ok(f[path.terminal()])
    })?;
    Estimate::from_samples(&values)
}

/// Plain Monte Carlo `E[f(X_T)]` under `q0` driven by `control` (or `q0` alone).
pub fn direct_estimate_ctmc(
    f: &[f64],
    nu: &Distribution,
    q0: &GeneratorMatrix,
    control: Option<&dyn JumpControl>,
    horizon: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    check_payoff(f, q0.n_states())?;
    let values = par::try_map_indexed(n_samples, |i| {
        let traj = simulate_ctmc(nu, q0, control, horizon, SeededSampler::new(seed, i as u64))?;
        Ok(f[traj.terminal_state()])
    })?;
    Estimate::from_samples(&values)
}

/// Jump-rate generator seen on segment `k` of `traj` (after `k` jumps).
pub fn segment_generator(
    traj: &JumpTrajectory,
    q0: &GeneratorMatrix,
    control: Option<&dyn JumpControl>,
    k: usize,
) -> Result<GeneratorMatrix> {
    let history = JumpHistory {
        initial_state: traj.initial_state(),
        jumps: &traj.jumps()[..k],
    };
    generator_for(q0, control, &history).map(|g| g.into_owned())
}
