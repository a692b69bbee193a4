//! Experiment configuration files (TOML).
//!
//! ```toml
//! mode = "discrete"            # or "ctmc"
//!
//! [state_space]
//! n = 2
//!
//! [initial]
//! state = 1                    # or: probs = [0.5, 0.5]
//!
//! [reference]
//! matrix = [[0.5, 0.5], [0.5, 0.5]]
//!
//! [control]
//! kind = "constant_matrix"     # "quadratic" (a, b) or "table" in ctmc mode
//! matrix = [[0.7, 0.3], [0.6, 0.4]]
//!
//! [horizon]
//! steps = 3                    # ctmc mode: time = 1.0
//! ```
//!
//! Table controls list `[[control.rules]]` keyed by `step`/`state` (discrete)
//! or `jump_count`/`state` (ctmc), plus a `[control.default]` entry. States are
//! 1-based throughout the file.

use std::path::Path;

use serde::Deserialize;

use crate::control::{
    DiscreteControl, JumpControl, JumpHistory, JumpRule, JumpTableControl, StepRule, StepTableControl,
};
use crate::error::{Error, Result};
use crate::markov::{
    matrix_from_rows, validate_generator, validate_stochastic, Distribution, GeneratorMatrix, StochasticMatrix,
};
use crate::quadratic::{build_quadratic, QuadraticCoefficients};
use crate::verify::{DEFAULT_MC_SAMPLES, EXACT_TOL, SIGMA_RULE};

use std::borrow::Cow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Discrete,
    Ctmc,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub mode: Mode,
    pub state_space: RawStateSpace,
    pub initial: RawInitial,
    pub reference: RawMatrix,
    pub control: Option<RawControl>,
    pub horizon: RawHorizon,
    #[serde(default)]
    pub thresholds: RawThresholds,
    #[serde(default)]
    pub verify: RawVerify,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawStateSpace {
    pub n: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInitial {
    pub state: Option<usize>,
    pub probs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMatrix {
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlKind {
    ConstantMatrix,
    Quadratic,
    Table,
}

/// Parameters of one control snapshot: a matrix (discrete) or `(a, b)` (ctmc).
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParams {
    pub matrix: Option<Vec<Vec<f64>>>,
    pub a: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRule {
    pub step: Option<usize>,
    pub jump_count: Option<usize>,
    pub state: Option<usize>,
    #[serde(flatten)]
    pub params: RawParams,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawControl {
    pub kind: ControlKind,
    #[serde(flatten)]
    pub params: RawParams,
    #[serde(default)]
    pub rules: Vec<RawRule>,
    pub default: Option<RawParams>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawHorizon {
    pub steps: Option<usize>,
    pub time: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawThresholds {
    #[serde(default = "default_exact")]
    pub exact: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_samples")]
    pub mc_samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_exact() -> f64 {
    EXACT_TOL
}

fn default_sigma() -> f64 {
    SIGMA_RULE
}

fn default_samples() -> usize {
    DEFAULT_MC_SAMPLES
}

impl Default for RawThresholds {
    fn default() -> Self {
        Self {
            exact: EXACT_TOL,
            sigma: SIGMA_RULE,
            mc_samples: DEFAULT_MC_SAMPLES,
            seed: 0,
        }
    }
}

/// Deliberate mismatches used to confirm that the checks can fail.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawVerify {
    /// Reference matrix handed to the likelihood engine in place of the real one.
    pub claimed_reference: Option<Vec<Vec<f64>>>,
    /// Matrix used in the martingale compensator in place of the control.
    pub claimed_control: Option<Vec<Vec<f64>>>,
}

/// Failure to read or parse a config file (exit code 2).
#[derive(Debug)]
pub struct ParseError(pub String);

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn load_raw(path: &Path) -> std::result::Result<RawConfig, ParseError> {
    let text = std::fs::read_to_string(path).map_err(|e| ParseError(format!("{}: {e}", path.display())))?;
    parse_raw(&text)
}

pub fn parse_raw(text: &str) -> std::result::Result<RawConfig, ParseError> {
    toml::from_str(text).map_err(|e| ParseError(e.to_string()))
}

/// Discrete control built from a config file.
#[derive(Debug, Clone, PartialEq)]
pub enum DiscreteControlSpec {
    Constant(StochasticMatrix),
    Table(StepTableControl),
}

impl DiscreteControl for DiscreteControlSpec {
    fn transition(&self, step: usize, history: &[usize]) -> Result<Cow<'_, StochasticMatrix>> {
        match self {
            Self::Constant(m) => Ok(Cow::Borrowed(m)),
            Self::Table(t) => t.transition(step, history),
        }
    }
}

/// Continuous-time control built from a config file.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpControlSpec {
    Constant(QuadraticCoefficients),
    Table(JumpTableControl),
}

impl JumpControlSpec {
    /// The single snapshot when the target generator never changes.
    pub fn constant(&self) -> Option<&QuadraticCoefficients> {
        match self {
            Self::Constant(c) => Some(c),
            Self::Table(t) if t.is_constant() => t.snapshots().next(),
            Self::Table(_) => None,
        }
    }

    pub fn snapshots(&self) -> Vec<&QuadraticCoefficients> {
        match self {
            Self::Constant(c) => vec![c],
            Self::Table(t) => t.snapshots().collect(),
        }
    }
}

impl JumpControl for JumpControlSpec {
    fn coefficients(&self, history: &JumpHistory<'_>) -> Result<Cow<'_, QuadraticCoefficients>> {
        match self {
            Self::Constant(c) => Ok(Cow::Borrowed(c)),
            Self::Table(t) => t.coefficients(history),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Discrete {
        p0: StochasticMatrix,
        control: Option<DiscreteControlSpec>,
        steps: usize,
        claimed_reference: Option<StochasticMatrix>,
        claimed_control: Option<StochasticMatrix>,
    },
    Ctmc {
        q0: GeneratorMatrix,
        control: Option<JumpControlSpec>,
        horizon: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    pub exact: f64,
    pub sigma: f64,
    pub mc_samples: usize,
    pub seed: u64,
}

/// A fully validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub n_states: usize,
    pub nu: Distribution,
    pub model: Model,
    pub thresholds: Thresholds,
}

/// One line of a validation report.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationItem {
    pub label: String,
    pub outcome: std::result::Result<(), String>,
}

/// Collects every validation outcome instead of stopping at the first.
#[derive(Default)]
struct Validator {
    items: Vec<ValidationItem>,
}

impl Validator {
    fn check<T>(&mut self, label: impl Into<String>, r: Result<T>) -> Option<T> {
        let label = label.into();
        match r {
            Ok(v) => {
                self.items.push(ValidationItem { label, outcome: Ok(()) });
                Some(v)
            }
            Err(e) => {
                self.items.push(ValidationItem {
                    label,
                    outcome: Err(e.to_string()),
                });
                None
            }
        }
    }

    fn fail(&mut self, label: impl Into<String>, msg: impl Into<String>) {
        self.items.push(ValidationItem {
            label: label.into(),
            outcome: Err(msg.into()),
        });
    }

    fn ok(&self) -> bool {
        self.items.iter().all(|i| i.outcome.is_ok())
    }
}

fn to_index(label: usize, n: usize) -> Result<usize> {
    if label == 0 || label > n {
        return Err(Error::InvalidState {
            state: label,
            n_states: n,
        });
    }
    Ok(label - 1)
}

fn check_dim(rows: &[Vec<f64>], n: usize) -> Result<()> {
    if rows.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rows.len(),
        });
    }
    Ok(())
}

fn stochastic(rows: &[Vec<f64>], n: usize, require_positive: bool) -> Result<StochasticMatrix> {
    check_dim(rows, n)?;
    validate_stochastic(matrix_from_rows(rows)?, require_positive)
}

fn coefficients(params: &RawParams, n: usize, q0: Option<&GeneratorMatrix>) -> Result<QuadraticCoefficients> {
    let (Some(a), Some(b)) = (&params.a, &params.b) else {
        return Err(Error::InvalidDistribution(
            "quadratic control needs both `a` and `b`".into(),
        ));
    };
    if a.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.len(),
        });
    }
    let c = QuadraticCoefficients::new(a.clone(), b.clone())?;
    if let Some(q0) = q0 {
        build_quadratic(q0, &c)?;
    }
    Ok(c)
}

fn matrix_param(params: &RawParams, n: usize) -> Result<StochasticMatrix> {
    match &params.matrix {
        Some(rows) => stochastic(rows, n, false),
        None => Err(Error::InvalidDistribution("discrete control needs `matrix`".into())),
    }
}

impl Experiment {
    /// Validates a parsed config, returning the experiment (if valid) and
    /// one report line per checked item.
    pub fn validate(raw: &RawConfig) -> (Option<Experiment>, Vec<ValidationItem>) {
        let mut v = Validator::default();
        let n = raw.state_space.n;
        if n < 2 {
            v.fail("state_space.n", Error::TooFewStates(n).to_string());
            return (None, v.items);
        }
        v.items.push(ValidationItem {
            label: "state_space.n".into(),
            outcome: Ok(()),
        });

        let nu = match (&raw.initial.state, &raw.initial.probs) {
            (Some(s), None) => v.check("initial.state", to_index(*s, n).and_then(|i| Distribution::dirac(n, i))),
            (None, Some(p)) => v.check(
                "initial.probs",
                if p.len() == n {
                    Distribution::new(p.clone())
                } else {
                    Err(Error::DimensionMismatch {
                        expected: n,
                        found: p.len(),
                    })
                },
            ),
            _ => {
                v.fail("initial", "give exactly one of `state` or `probs`");
                None
            }
        };

        let t = &raw.thresholds;
        if !(t.exact > 0.0 && t.sigma > 0.0) {
            v.fail("thresholds", "`exact` and `sigma` must be positive");
        }
        if t.mc_samples < 2 {
            v.fail("thresholds.mc_samples", Error::TooFewSamples(t.mc_samples).to_string());
        }
        let thresholds = Thresholds {
            exact: t.exact,
            sigma: t.sigma,
            mc_samples: t.mc_samples,
            seed: t.seed,
        };

        let model = match raw.mode {
            Mode::Discrete => Self::discrete_model(raw, n, &mut v),
            Mode::Ctmc => Self::ctmc_model(raw, n, &mut v),
        };

        let experiment = match (nu, model, v.ok()) {
            (Some(nu), Some(model), true) => Some(Experiment {
                n_states: n,
                nu,
                model,
                thresholds,
            }),
            _ => None,
        };
        (experiment, v.items)
    }

    fn discrete_model(raw: &RawConfig, n: usize, v: &mut Validator) -> Option<Model> {
        let p0 = v.check("reference.matrix", stochastic(&raw.reference.matrix, n, true));
        let steps = match raw.horizon.steps {
            Some(s) => Some(s),
            None => {
                v.fail("horizon.steps", "discrete mode needs `steps`");
                None
            }
        };
        let mut control_ok = true;
        let control = match &raw.control {
            None => None,
            Some(c) => match c.kind {
                ControlKind::ConstantMatrix => {
                    let m = v.check("control.matrix", matrix_param(&c.params, n));
                    control_ok &= m.is_some();
                    m.map(DiscreteControlSpec::Constant)
                }
                ControlKind::Table => {
                    let mut rules = Vec::new();
                    for (idx, r) in c.rules.iter().enumerate() {
                        let label = format!("control.rules[{}]", idx + 1);
                        if r.jump_count.is_some() {
                            v.fail(&label, "`jump_count` is only valid in ctmc mode");
                            control_ok = false;
                            continue;
                        }
                        let state = r.state.map(|s| to_index(s, n)).transpose();
                        let rule = state.and_then(|state| {
                            Ok(StepRule {
                                step: r.step,
                                state,
                                matrix: matrix_param(&r.params, n)?,
                            })
                        });
                        match v.check(label, rule) {
                            Some(rule) => rules.push(rule),
                            None => control_ok = false,
                        }
                    }
                    let default = match &c.default {
                        Some(d) => v.check("control.default", matrix_param(d, n)),
                        None => {
                            v.fail("control.default", "table control needs a default entry");
                            None
                        }
                    };
                    match default {
                        Some(d) => v
                            .check("control", StepTableControl::new(rules, d))
                            .map(DiscreteControlSpec::Table),
                        None => {
                            control_ok = false;
                            None
                        }
                    }
                }
                ControlKind::Quadratic => {
                    v.fail("control.kind", "quadratic controls are only valid in ctmc mode");
                    control_ok = false;
                    None
                }
            },
        };
        let claimed_reference = raw
            .verify
            .claimed_reference
            .as_ref()
            .map(|m| v.check("verify.claimed_reference", stochastic(m, n, true)));
        let claimed_control = raw
            .verify
            .claimed_control
            .as_ref()
            .map(|m| v.check("verify.claimed_control", stochastic(m, n, false)));
        if claimed_reference.as_ref().is_some_and(Option::is_none)
            || claimed_control.as_ref().is_some_and(Option::is_none)
        {
            return None;
        }
        if !control_ok {
            return None;
        }
        Some(Model::Discrete {
            p0: p0?,
            control,
            steps: steps?,
            claimed_reference: claimed_reference.flatten(),
            claimed_control: claimed_control.flatten(),
        })
    }

    fn ctmc_model(raw: &RawConfig, n: usize, v: &mut Validator) -> Option<Model> {
        let q0 = v.check(
            "reference.matrix",
            check_dim(&raw.reference.matrix, n)
                .and_then(|_| matrix_from_rows(&raw.reference.matrix))
                .and_then(|m| validate_generator(m, true)),
        );
        let horizon = match raw.horizon.time {
            Some(t) if t.is_finite() && t > 0.0 => Some(t),
            Some(t) => {
                v.fail("horizon.time", Error::InvalidTime(t).to_string());
                None
            }
            None => {
                v.fail("horizon.time", "ctmc mode needs `time`");
                None
            }
        };
        if raw.verify.claimed_reference.is_some() || raw.verify.claimed_control.is_some() {
            v.fail("verify", "claimed matrices are only valid in discrete mode");
            return None;
        }
        let mut control_ok = true;
        let control = match &raw.control {
            None => None,
            Some(c) => match c.kind {
                ControlKind::Quadratic => {
                    let coeffs = v.check("control", coefficients(&c.params, n, q0.as_ref()));
                    control_ok &= coeffs.is_some();
                    coeffs.map(JumpControlSpec::Constant)
                }
                ControlKind::Table => {
                    let mut rules = Vec::new();
                    for (idx, r) in c.rules.iter().enumerate() {
                        let label = format!("control.rules[{}]", idx + 1);
                        if r.step.is_some() {
                            v.fail(&label, "`step` is only valid in discrete mode");
                            control_ok = false;
                            continue;
                        }
                        let rule = r.state.map(|s| to_index(s, n)).transpose().and_then(|state| {
                            Ok(JumpRule {
                                jump_count: r.jump_count,
                                state,
                                coefficients: coefficients(&r.params, n, q0.as_ref())?,
                            })
                        });
                        match v.check(label, rule) {
                            Some(rule) => rules.push(rule),
                            None => control_ok = false,
                        }
                    }
                    let default = match &c.default {
                        Some(d) => v.check("control.default", coefficients(d, n, q0.as_ref())),
                        None => {
                            v.fail("control.default", "table control needs a default entry");
                            None
                        }
                    };
                    match default {
                        Some(d) => v
                            .check("control", JumpTableControl::new(rules, d))
                            .map(JumpControlSpec::Table),
                        None => {
                            control_ok = false;
                            None
                        }
                    }
                }
                ControlKind::ConstantMatrix => {
                    v.fail("control.kind", "ctmc controls must be `quadratic` or `table`");
                    control_ok = false;
                    None
                }
            },
        };
        if !control_ok {
            return None;
        }
        Some(Model::Ctmc {
            q0: q0?,
            control,
            horizon: horizon?,
        })
    }
}
