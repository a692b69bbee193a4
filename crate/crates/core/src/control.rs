//! Predictable controls: rules mapping strictly-past history to the law of
//! the next move.

use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::markov::{GeneratorMatrix, Jump, StochasticMatrix};
use crate::quadratic::{build_quadratic, QuadraticCoefficients};

/// Discrete-time control: `P_k` as a function of `(k, X_0..X_{k-1})`.
///
/// Implementations must be deterministic in their arguments.
pub trait DiscreteControl: Send + Sync {
    /// Transition matrix for step `step >= 1`; `history` holds `X_0..X_{step-1}`.
    fn transition(&self, step: usize, history: &[usize]) -> Result<Cow<'_, StochasticMatrix>>;
}

impl DiscreteControl for StochasticMatrix {
    fn transition(&self, _step: usize, _history: &[usize]) -> Result<Cow<'_, StochasticMatrix>> {
        Ok(Cow::Borrowed(self))
    }
}

impl<C: DiscreteControl + ?Sized> DiscreteControl for &C {
    fn transition(&self, step: usize, history: &[usize]) -> Result<Cow<'_, StochasticMatrix>> {
        (**self).transition(step, history)
    }
}

/// Wraps a closure `(step, history) -> P_k` as a control.
pub struct FnControl<F>(pub F);

impl<F> DiscreteControl for FnControl<F>
where
    F: Fn(usize, &[usize]) -> Result<StochasticMatrix> + Send + Sync,
{
    fn transition(&self, step: usize, history: &[usize]) -> Result<Cow<'_, StochasticMatrix>> {
        (self.0)(step, history).map(Cow::Owned)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRule {
    /// Step index to match, any step when `None`.
    pub step: Option<usize>,
    /// Last state `X_{k-1}` to match, any state when `None`.
    pub state: Option<usize>,
    pub matrix: StochasticMatrix,
}

/// Finite lookup on `(step, last state)`; the first matching rule wins.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTableControl {
    rules: Vec<StepRule>,
    default: StochasticMatrix,
}

impl StepTableControl {
    pub fn new(rules: Vec<StepRule>, default: StochasticMatrix) -> Result<Self> {
        let n = default.n_states();
        for rule in &rules {
            if rule.matrix.n_states() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: rule.matrix.n_states(),
                });
            }
        }
        Ok(Self { rules, default })
    }

    pub fn matrices(&self) -> impl Iterator<Item = &StochasticMatrix> {
        self.rules
            .iter()
            .map(|r| &r.matrix)
            .chain(std::iter::once(&self.default))
    }
}

impl DiscreteControl for StepTableControl {
    fn transition(&self, step: usize, history: &[usize]) -> Result<Cow<'_, StochasticMatrix>> {
        let last = history.last().copied();
        let hit = self
            .rules
            .iter()
            .find(|r| r.step.is_none_or(|s| s == step) && r.state.is_none_or(|s| Some(s) == last));
        Ok(Cow::Borrowed(hit.map_or(&self.default, |r| &r.matrix)))
    }
}

/// Jump history strictly before the evaluation time.
#[derive(Debug, Clone, Copy)]
pub struct JumpHistory<'a> {
    pub initial_state: usize,
    pub jumps: &'a [Jump],
}

impl JumpHistory<'_> {
    pub fn current_state(&self) -> usize {
        self.jumps.last().map_or(self.initial_state, |j| j.target)
    }

    pub fn jump_count(&self) -> usize {
        self.jumps.len()
    }
}

/// Continuous-time control: quadratic-family coefficients as a function of
/// the jump history. Rates are therefore constant between jumps.
pub trait JumpControl: Send + Sync {
    fn coefficients(&self, history: &JumpHistory<'_>) -> Result<Cow<'_, QuadraticCoefficients>>;

    /// Generator in force after `history`, built from the reference `q0`.
    fn generator(&self, q0: &GeneratorMatrix, history: &JumpHistory<'_>) -> Result<GeneratorMatrix> {
        build_quadratic(q0, self.coefficients(history)?.as_ref())
    }
}

impl JumpControl for QuadraticCoefficients {
    fn coefficients(&self, _history: &JumpHistory<'_>) -> Result<Cow<'_, QuadraticCoefficients>> {
        Ok(Cow::Borrowed(self))
    }
}

impl<C: JumpControl + ?Sized> JumpControl for &C {
    fn coefficients(&self, history: &JumpHistory<'_>) -> Result<Cow<'_, QuadraticCoefficients>> {
        (**self).coefficients(history)
    }
}

pub struct FnJumpControl<F>(pub F);

impl<F> JumpControl for FnJumpControl<F>
where
    F: Fn(&JumpHistory<'_>) -> Result<QuadraticCoefficients> + Send + Sync,
{
    fn coefficients(&self, history: &JumpHistory<'_>) -> Result<Cow<'_, QuadraticCoefficients>> {
        (self.0)(history).map(Cow::Owned)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpRule {
    pub jump_count: Option<usize>,
    pub state: Option<usize>,
    pub coefficients: QuadraticCoefficients,
}

/// Finite lookup on `(jump count, current state)`; the first matching rule wins.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpTableControl {
    rules: Vec<JumpRule>,
    default: QuadraticCoefficients,
}

impl JumpTableControl {
    pub fn new(rules: Vec<JumpRule>, default: QuadraticCoefficients) -> Result<Self> {
        let n = default.n_states();
        for rule in &rules {
            if rule.coefficients.n_states() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: rule.coefficients.n_states(),
                });
            }
        }
        Ok(Self { rules, default })
    }

    pub fn snapshots(&self) -> impl Iterator<Item = &QuadraticCoefficients> {
        self.rules
            .iter()
            .map(|r| &r.coefficients)
            .chain(std::iter::once(&self.default))
    }

    /// True when every snapshot is the same, so the target law is time-homogeneous.
    pub fn is_constant(&self) -> bool {
        self.rules.iter().all(|r| r.coefficients == self.default)
    }
}

impl JumpControl for JumpTableControl {
    fn coefficients(&self, history: &JumpHistory<'_>) -> Result<Cow<'_, QuadraticCoefficients>> {
        let count = history.jump_count();
        let state = history.current_state();
        let hit = self
            .rules
            .iter()
            .find(|r| r.jump_count.is_none_or(|c| c == count) && r.state.is_none_or(|s| s == state));
        Ok(Cow::Borrowed(hit.map_or(&self.default, |r| &r.coefficients)))
    }
}

/// Generator after `history`: the control's snapshot, or `q0` itself when no
/// control is given.
pub fn generator_for<'q>(
    q0: &'q GeneratorMatrix,
    control: Option<&dyn JumpControl>,
    history: &JumpHistory<'_>,
) -> Result<Cow<'q, GeneratorMatrix>> {
    match control {
        None => Ok(Cow::Borrowed(q0)),
        Some(c) => c.generator(q0, history).map(Cow::Owned),
    }
}
