//! Martingale-representation coefficients.
//!
//! Discrete time: a centred increment on the atom `{X_{k-1} = i}` is written
//! in the basis `1{X_k = j} - P0(i, j)` and the controlled transition row is
//! rebuilt from the coefficients. Continuous time: the target generator is
//! split as `q = q0 ⊙ (1 + K)` and the jump coefficients
//! `H^j = Z_{t-} (q/q0 - 1)` are read off along a trajectory.

use nalgebra::DMatrix;

use crate::control::{DiscreteControl, JumpControl};
use crate::error::{Error, Result};
use crate::likelihood::{likelihood_discrete, segment_generator, LikelihoodProcess};
use crate::markov::{
    validate_stochastic_tol, DiscretePath, GeneratorMatrix, JumpTrajectory, StochasticMatrix, INPUT_TOL,
};
use crate::sim::check_dims;

/// Tolerance on the conditional-mean-zero precondition.
pub const CENTERING_TOL: f64 = 1e-10;

/// Normalization picked within the one-parameter family of solutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    /// `sum_j P0(i, j) G(i, j) = 0`, under which `G = Y`.
    Canonical,
}

/// Values `Y(i, .)` of an increment on `{X_{k-1} = i, X_k = j}`, `j = 1..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaIncrement {
    pub values: Vec<f64>,
}

/// Coefficients `G(i, .)` for a single atom.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomCoefficients {
    pub g: Vec<f64>,
    pub gauge: Gauge,
    /// Max residual of the defining linear system.
    pub residual: f64,
}

/// One row of coefficients per atom state `i`; rows never set are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationCoefficients {
    rows: Vec<Vec<f64>>,
    gauge: Gauge,
}

impl RepresentationCoefficients {
    pub fn zeros(n_states: usize) -> Self {
        Self {
            rows: vec![vec![0.0; n_states]; n_states],
            gauge: Gauge::Canonical,
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        for r in &rows {
            check_dims(n, r.len())?;
        }
        Ok(Self {
            rows,
            gauge: Gauge::Canonical,
        })
    }

    /// Coefficients with a single populated atom.
    pub fn single_atom(n_states: usize, state: usize, atom: &AtomCoefficients) -> Result<Self> {
        let mut out = Self::zeros(n_states);
        out.set_row(state, atom)?;
        Ok(out)
    }

    pub fn set_row(&mut self, state: usize, atom: &AtomCoefficients) -> Result<()> {
        let n = self.rows.len();
        check_dims(n, atom.g.len())?;
        if state >= n {
            return Err(Error::InvalidState { state, n_states: n });
        }
        self.rows[state] = atom.g.clone();
        self.gauge = atom.gauge;
        Ok(())
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.rows[state]
    }

    pub fn gauge(&self) -> Gauge {
        self.gauge
    }

    pub fn n_states(&self) -> usize {
        self.rows.len()
    }
}

fn weighted_mean(values: &[f64], weights: &[f64]) -> f64 {
    values.iter().zip(weights).map(|(v, w)| v * w).sum()
}

/// `Y(k) = G(k) - sum_j G(j) P0(i, j)` for all `k`.
pub fn reconstruct_increment(g: &[f64], p0_row: &[f64]) -> Vec<f64> {
    let shift = weighted_mean(g, p0_row);
    g.iter().map(|v| v - shift).collect()
}

/// Solves `Y(k) = G(k) - sum_j G(j) P0(i, j)` in the canonical gauge.
///
/// The system has rank `N - 1` (constant shifts of `G` solve it too); the
/// canonical representative is `G = Y - <Y>_{P0}`, which is `Y` itself for a
/// centred increment.
pub fn delta_basis_decompose(y: &DeltaIncrement, p0_row: &[f64]) -> Result<AtomCoefficients> {
    check_dims(p0_row.len(), y.values.len())?;
    let mean = weighted_mean(&y.values, p0_row);
    if mean.abs() > CENTERING_TOL {
        return Err(Error::NotCentered { mean });
    }
    let g: Vec<f64> = y.values.iter().map(|v| v - mean).collect();
    let residual = reconstruct_increment(&g, p0_row)
        .iter()
        .zip(&y.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(AtomCoefficients {
        g,
        gauge: Gauge::Canonical,
        residual,
    })
}

/// Transition matrix implied by the coefficients:
/// `P(i, j) = P0(i, j) (1 + (G(i, j) - sum_l G(i, l) P0(i, l)) / Z_prev)`.
pub fn recover_transition(
    z_prev: f64,
    g: &RepresentationCoefficients,
    p0: &StochasticMatrix,
) -> Result<StochasticMatrix> {
    if z_prev <= 0.0 || !z_prev.is_finite() {
        return Err(Error::ZeroLikelihood(z_prev));
    }
    let n = p0.n_states();
    check_dims(n, g.n_states())?;
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        let p0_row = p0.row(i);
        let centred = reconstruct_increment(g.row(i), &p0_row);
        for j in 0..n {
            let v = p0_row[j] * (1.0 + centred[j] / z_prev);
            if v < -INPUT_TOL {
                return Err(Error::NegativeProbability {
                    row: i,
                    col: j,
                    value: v,
                });
            }
            out[(i, j)] = v.max(0.0);
        }
    }
    validate_stochastic_tol(out, false, INPUT_TOL)
}

/// The increment `Y(j) = Z_k - Z_{k-1}` on the history atom `prefix`
/// (`X_0..X_{k-1}`), for each next state `j`, along with `Z_{k-1}`.
pub fn likelihood_increment(
    prefix: &[usize],
    p0: &StochasticMatrix,
    control: &dyn DiscreteControl,
) -> Result<(f64, DeltaIncrement)> {
    let n = p0.n_states();
    let base = DiscretePath::new(prefix.to_vec(), n)?;
    let z_prev = likelihood_discrete(&base, p0, control)?.terminal();
    let mut values = Vec::with_capacity(n);
    let mut extended = prefix.to_vec();
    for j in 0..n {
        extended.push(j);
        let z = likelihood_discrete(&DiscretePath::from_unchecked(extended.clone()), p0, control)?.terminal();
        values.push(z - z_prev);
        extended.pop();
    }
    Ok((z_prev, DeltaIncrement { values }))
}

/// `K` with `q = q0 ⊙ (1 + K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HadamardCorrection {
    pub k: DMatrix<f64>,
}

impl HadamardCorrection {
    /// `q0 ⊙ (1 + K)`.
    pub fn reconstruct(&self, q0: &GeneratorMatrix) -> DMatrix<f64> {
        q0.matrix().zip_map(&self.k, |q, k| q * (1.0 + k))
    }

    /// Max over rows of `|sum_j q0(i, j) K(i, j)|`.
    pub fn row_constraint_residual(&self, q0: &GeneratorMatrix) -> f64 {
        q0.matrix()
            .component_mul(&self.k)
            .row_iter()
            .map(|r| r.sum().abs())
            .fold(0.0, f64::max)
    }
}

/// Off-diagonal `K(i, j) = qt(i, j) / q0(i, j) - 1`; diagonal
/// `K(i, i) = -sum_{j != i} q0(i, j) K(i, j) / q0(i, i)`.
pub fn hadamard_decompose(qt: &GeneratorMatrix, q0: &GeneratorMatrix) -> Result<HadamardCorrection> {
    let n = q0.n_states();
    check_dims(n, qt.n_states())?;
    if let Some(row) = (0..n).find(|&i| q0.get(i, i) == 0.0) {
        return Err(Error::DegenerateReference { row });
    }
    q0.ensure_positive_offdiag()?;
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut weighted = 0.0;
        for j in (0..n).filter(|&j| j != i) {
            k[(i, j)] = qt.get(i, j) / q0.get(i, j) - 1.0;
            weighted += q0.get(i, j) * k[(i, j)];
        }
        k[(i, i)] = -weighted / q0.get(i, i);
    }
    Ok(HadamardCorrection { k })
}

/// Jump coefficients at one left-limit time `t-`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpCoefficients {
    pub time: f64,
    /// `X_{t-}`.
    pub state: usize,
    pub z_left: f64,
    /// `(j, H^j)` for every `j != X_{t-}`.
    pub h: Vec<(usize, f64)>,
    /// `H^j / Z_{t-}`; `None` where `Z_{t-} = 0`, since `K` is undefined there.
    pub k: Option<Vec<(usize, f64)>>,
}

/// `H^j = Z_{t-} (q_t(X_{t-}, j) / q0(X_{t-}, j) - 1)` at every jump epoch
/// and at the horizon. `z` must come from [`crate::likelihood::likelihood_ctmc`]
/// on the same trajectory.
pub fn extract_jump_coefficients(
    z: &LikelihoodProcess,
    traj: &JumpTrajectory,
    q0: &GeneratorMatrix,
    control: &dyn JumpControl,
) -> Result<Vec<JumpCoefficients>> {
    q0.ensure_positive_offdiag()?;
    let segments = traj.segments();
    check_dims(segments.len() + 1, z.len())?;
    let n = q0.n_states();
    let mut out = Vec::with_capacity(segments.len());
    for (idx, seg) in segments.iter().enumerate() {
        let q = segment_generator(traj, q0, Some(control), idx)?;
        let z_left = z.left_log_values()[idx + 1].exp();
        let i = seg.state;
        let ratios: Vec<(usize, f64)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (j, q.get(i, j) / q0.get(i, j) - 1.0))
            .collect();
        let h = ratios.iter().map(|&(j, r)| (j, z_left * r)).collect();
        let k = (z_left > 0.0).then_some(ratios);
        out.push(JumpCoefficients {
            time: seg.end,
            state: i,
            z_left,
            h,
            k,
        });
    }
    Ok(out)
}
