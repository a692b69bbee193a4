//! Validated matrix, distribution and path types shared by every other module.
//!
//! States are 0-based inside the library. The CLI and config files use the
//! 1-based labels `1..=N`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Row-sum tolerance for user-supplied matrices and distributions.
pub const INPUT_TOL: f64 = 1e-12;
/// Row-sum tolerance for matrices produced by floating-point computation.
pub const COMPUTED_TOL: f64 = 1e-10;

/// Finite state space `{0, .., N-1}` with `N >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpace {
    n_states: usize,
}

impl StateSpace {
    pub fn new(n_states: usize) -> Result<Self> {
        if n_states < 2 {
            return Err(Error::TooFewStates(n_states));
        }
        Ok(Self { n_states })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn check_state(&self, state: usize) -> Result<()> {
        if state >= self.n_states {
            return Err(Error::InvalidState {
                state,
                n_states: self.n_states,
            });
        }
        Ok(())
    }
}

/// Probability vector over the states.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(probs, INPUT_TOL)
    }

    pub(crate) fn with_tolerance(probs: Vec<f64>, tol: f64) -> Result<Self> {
        StateSpace::new(probs.len())?;
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0) {
            return Err(Error::InvalidDistribution(format!("entry {p} outside [0, 1]")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > tol {
            return Err(Error::InvalidDistribution(format!("entries sum to {total}")));
        }
        Ok(Self { probs })
    }

    /// Point mass at `state`.
    pub fn dirac(n_states: usize, state: usize) -> Result<Self> {
        StateSpace::new(n_states)?.check_state(state)?;
        let mut probs = vec![0.0; n_states];
        probs[state] = 1.0;
        Ok(Self { probs })
    }

    pub fn uniform(n_states: usize) -> Result<Self> {
        StateSpace::new(n_states)?;
        Ok(Self {
            probs: vec![1.0 / n_states as f64; n_states],
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n_states(&self) -> usize {
        self.probs.len()
    }

    pub fn prob(&self, state: usize) -> f64 {
        self.probs[state]
    }
}

fn check_square(entries: &DMatrix<f64>) -> Result<usize> {
    let (rows, cols) = entries.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    StateSpace::new(rows)?;
    for ((row, col), v) in indexed(entries) {
        if !v.is_finite() {
            return Err(Error::NonFinite { row, col });
        }
    }
    Ok(rows)
}

/// Row-major `((row, col), value)` iteration.
fn indexed(m: &DMatrix<f64>) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
    let n = m.ncols();
    (0..m.nrows()).flat_map(move |i| (0..n).map(move |j| ((i, j), m[(i, j)])))
}

/// Row-stochastic transition matrix of a discrete-time chain.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    entries: DMatrix<f64>,
    strictly_positive: bool,
}

/// Validates a transition matrix with the input tolerance of `1e-12`.
pub fn validate_stochastic(entries: DMatrix<f64>, require_positive: bool) -> Result<StochasticMatrix> {
    validate_stochastic_tol(entries, require_positive, INPUT_TOL)
}

pub(crate) fn validate_stochastic_tol(
    entries: DMatrix<f64>,
    require_positive: bool,
    tol: f64,
) -> Result<StochasticMatrix> {
    let n = check_square(&entries)?;
    for ((row, col), v) in indexed(&entries) {
        if v < 0.0 {
            return Err(Error::NegativeEntry { row, col, value: v });
        }
    }
    for row in 0..n {
        let sum = entries.row(row).sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::RowSumNotOne { row, sum });
        }
    }
    if require_positive {
        if let Some(((row, col), _)) = indexed(&entries).find(|(_, v)| *v == 0.0) {
            return Err(Error::ZeroEntryWhenPositivityRequired { row, col });
        }
    }
    let strictly_positive = entries.iter().all(|v| *v > 0.0);
    Ok(StochasticMatrix {
        entries,
        strictly_positive,
    })
}

impl StochasticMatrix {
    pub fn from_rows(rows: &[Vec<f64>], require_positive: bool) -> Result<Self> {
        validate_stochastic(matrix_from_rows(rows)?, require_positive)
    }

    pub fn uniform(n_states: usize) -> Result<Self> {
        StateSpace::new(n_states)?;
        Ok(Self {
            entries: DMatrix::from_element(n_states, n_states, 1.0 / n_states as f64),
            strictly_positive: true,
        })
    }

    pub fn identity(n_states: usize) -> Result<Self> {
        StateSpace::new(n_states)?;
        Ok(Self {
            entries: DMatrix::identity(n_states, n_states),
            strictly_positive: false,
        })
    }

    pub fn n_states(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.entries[(from, to)]
    }

    pub fn row(&self, from: usize) -> Vec<f64> {
        self.entries.row(from).iter().copied().collect()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    /// True when every entry is strictly positive.
    pub fn is_strictly_positive(&self) -> bool {
        self.strictly_positive
    }

    /// `(P z)_i` for every `i`.
    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n_states(), z.len())?;
        let v = &self.entries * DVector::from_column_slice(z);
        Ok(v.iter().copied().collect())
    }

    pub fn ensure_positive(&self) -> Result<()> {
        match indexed(&self.entries).find(|(_, v)| *v <= 0.0) {
            Some(((row, col), _)) => Err(Error::ReferenceNotPositive { row, col }),
            None => Ok(()),
        }
    }
}

/// Rate matrix of a continuous-time chain: nonnegative off-diagonals, zero row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    entries: DMatrix<f64>,
    strictly_positive_offdiag: bool,
}

pub fn validate_generator(entries: DMatrix<f64>, require_positive_offdiag: bool) -> Result<GeneratorMatrix> {
    let n = check_square(&entries)?;
    for ((row, col), v) in indexed(&entries) {
        if row != col && v < 0.0 {
            return Err(Error::NegativeOffDiagonal { row, col, value: v });
        }
    }
    for row in 0..n {
        let sum = entries.row(row).sum();
        if sum.abs() > INPUT_TOL {
            return Err(Error::RowSumNotZero { row, sum });
        }
    }
    let zero_offdiag = indexed(&entries).find(|((i, j), v)| i != j && *v == 0.0);
    if require_positive_offdiag {
        if let Some(((row, col), _)) = zero_offdiag {
            return Err(Error::ZeroOffDiagonalWhenPositivityRequired { row, col });
        }
    }
    Ok(GeneratorMatrix {
        entries,
        strictly_positive_offdiag: zero_offdiag.is_none(),
    })
}

impl GeneratorMatrix {
    pub fn from_rows(rows: &[Vec<f64>], require_positive_offdiag: bool) -> Result<Self> {
        validate_generator(matrix_from_rows(rows)?, require_positive_offdiag)
    }

    pub fn zero(n_states: usize) -> Result<Self> {
        StateSpace::new(n_states)?;
        Ok(Self {
            entries: DMatrix::zeros(n_states, n_states),
            strictly_positive_offdiag: false,
        })
    }

    pub fn n_states(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.entries[(from, to)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn is_strictly_positive_offdiag(&self) -> bool {
        self.strictly_positive_offdiag
    }

    /// Total jump rate `-q(i, i)` out of `state`.
    pub fn exit_rate(&self, state: usize) -> f64 {
        -self.entries[(state, state)]
    }

    /// Sum of off-diagonal rates in row `state`, summed directly rather
    /// than read from the diagonal.
    pub fn offdiag_row_sum(&self, state: usize) -> f64 {
        (0..self.n_states())
            .filter(|&j| j != state)
            .map(|j| self.entries[(state, j)])
            .sum()
    }

    pub fn ensure_positive_offdiag(&self) -> Result<()> {
        match indexed(&self.entries).find(|((i, j), v)| i != j && *v <= 0.0) {
            Some(((row, col), _)) => Err(Error::ReferenceNotPositive { row, col }),
            None => Ok(()),
        }
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        inf_norm(&self.entries)
    }

    /// Wraps a matrix whose row sums are zero by construction but may have
    /// negative off-diagonals. Only for use inside the crate before a cone check.
    pub(crate) fn from_trusted(entries: DMatrix<f64>) -> Self {
        let strictly_positive_offdiag = indexed(&entries).all(|((i, j), v)| i == j || v > 0.0);
        Self {
            entries,
            strictly_positive_offdiag,
        }
    }
}

pub(crate) fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    for r in rows {
        if r.len() != n {
            return Err(Error::NotSquare { rows: n, cols: r.len() });
        }
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `(Qf)(i) = sum_j Q(i, j) f(j)`.
pub fn apply_generator(q: &GeneratorMatrix, f: &[f64]) -> Result<Vec<f64>> {
    check_len(q.n_states(), f.len())?;
    let v = q.matrix() * DVector::from_column_slice(f);
    Ok(v.iter().copied().collect())
}

/// Transition matrix `exp(hQ)` of the chain with constant generator `q`.
///
/// Scaling and squaring: `hQ` is scaled by `2^-s` until its norm is at most
/// 1/2, the Taylor series is summed until the tail bound drops below half an
/// ulp, and the result is squared `s` times.
pub fn transition_matrix(q: &GeneratorMatrix, h: f64) -> Result<StochasticMatrix> {
    if !h.is_finite() || h < 0.0 {
        return Err(Error::InvalidTime(h));
    }
    let n = q.n_states();
    let a = q.matrix() * h;
    let norm = inf_norm(&a);
    let mut squarings = 0u32;
    let mut scaled_norm = norm;
    while scaled_norm > 0.5 {
        scaled_norm /= 2.0;
        squarings += 1;
    }
    let a = a / 2f64.powi(squarings as i32);

    let mut sum = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut k = 1u32;
    loop {
        term = &term * &a / k as f64;
        sum += &term;
        // Tail after the k-th term: ||A||^{k+1}/(k+1)! * 1/(1 - ||A||/(k+2)).
        let next = scaled_norm.powi(k as i32 + 1) / factorial(k + 1);
        let tail = next / (1.0 - scaled_norm / (k as f64 + 2.0));
        if tail < 0.5 * f64::EPSILON || k >= 40 {
            break;
        }
        k += 1;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    // Clip rounding residue below zero; true entries of exp(hQ) are nonnegative.
    sum.iter_mut().for_each(|v| {
        if *v < 0.0 && *v > -COMPUTED_TOL {
            *v = 0.0
        }
    });
    validate_stochastic_tol(sum, false, COMPUTED_TOL)
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// Realized discrete-time path `X_0, .., X_n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DiscretePath {
    states: Vec<usize>,
}

impl DiscretePath {
    pub fn new(states: Vec<usize>, n_states: usize) -> Result<Self> {
        let space = StateSpace::new(n_states)?;
        if states.is_empty() {
            return Err(Error::InvalidTrajectory("discrete path is empty".into()));
        }
        for &s in &states {
            space.check_state(s)?;
        }
        Ok(Self { states })
    }

    pub(crate) fn from_unchecked(states: Vec<usize>) -> Self {
        Self { states }
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    /// Number of transitions `n`.
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn terminal(&self) -> usize {
        *self.states.last().expect("non-empty path")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub target: usize,
}

/// Càdlàg jump path on `[0, T]`: an initial state plus time-ordered jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpTrajectory {
    initial_state: usize,
    jumps: Vec<Jump>,
    horizon: f64,
}

/// Constant-state piece `[start, end)` of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub state: usize,
}

impl JumpTrajectory {
    pub fn new(initial_state: usize, jumps: Vec<Jump>, horizon: f64, n_states: usize) -> Result<Self> {
        let space = StateSpace::new(n_states)?;
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::InvalidTime(horizon));
        }
        space.check_state(initial_state)?;
        let mut prev_time = 0.0;
        let mut prev_state = initial_state;
        for jump in &jumps {
            space.check_state(jump.target)?;
            if !(jump.time > prev_time && jump.time <= horizon) {
                return Err(Error::InvalidTrajectory(format!(
                    "jump time {} not in ({prev_time}, {horizon}]",
                    jump.time
                )));
            }
            if jump.target == prev_state {
                return Err(Error::InvalidTrajectory(format!(
                    "jump at {} does not change state",
                    jump.time
                )));
            }
            prev_time = jump.time;
            prev_state = jump.target;
        }
        Ok(Self {
            initial_state,
            jumps,
            horizon,
        })
    }

    pub(crate) fn from_unchecked(initial_state: usize, jumps: Vec<Jump>, horizon: f64) -> Self {
        Self {
            initial_state,
            jumps,
            horizon,
        }
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_jumps(&self) -> usize {
        self.jumps.len()
    }

    pub fn terminal_state(&self) -> usize {
        self.jumps.last().map_or(self.initial_state, |j| j.target)
    }

    /// State occupied at time `t` (right-continuous).
    pub fn state_at(&self, t: f64) -> usize {
        self.jumps
            .iter()
            .take_while(|j| j.time <= t)
            .last()
            .map_or(self.initial_state, |j| j.target)
    }

    /// State occupied just after the first `k` jumps.
    pub fn state_after(&self, k: usize) -> usize {
        if k == 0 {
            self.initial_state
        } else {
            self.jumps[k - 1].target
        }
    }

    /// Holding intervals covering `[0, T]`. Segment `k` is the piece after
    /// `k` jumps; a jump exactly at `T` yields an empty last segment.
    pub fn segments(&self) -> Vec<Segment> {
        let mut out = Vec::with_capacity(self.jumps.len() + 1);
        let mut start = 0.0;
        let mut state = self.initial_state;
        for jump in &self.jumps {
            out.push(Segment {
                start,
                end: jump.time,
                state,
            });
            start = jump.time;
            state = jump.target;
        }
        out.push(Segment {
            start,
            end: self.horizon,
            state,
        });
        out
    }
}

/// Number of jumps into `state` during `(0, s]`.
pub fn count_jumps(traj: &JumpTrajectory, state: usize, s: f64) -> Result<usize> {
    if !(0.0..=traj.horizon).contains(&s) {
        return Err(Error::TimeOutOfRange {
            time: s,
            horizon: traj.horizon,
        });
    }
    Ok(traj.jumps.iter().filter(|j| j.time <= s && j.target == state).count())
}
