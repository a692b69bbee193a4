//! Brute-force ground truth: exhaustive path enumeration for discrete chains
//! and the matrix-exponential semigroup for constant generators.

use nalgebra::DVector;

use crate::control::DiscreteControl;
use crate::error::{Error, Result};
use crate::markov::{transition_matrix, DiscretePath, Distribution, GeneratorMatrix, StochasticMatrix, COMPUTED_TOL};
use crate::sim::check_dims;

/// Upper bound on `N^(n+1)` accepted by [`enumerate_paths`].
pub const ENUMERATION_LIMIT: f64 = 1e6;

/// Every positive-probability path of a given length with its probability.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPathSet {
    entries: Vec<(DiscretePath, f64)>,
    n_states: usize,
    steps: usize,
}

impl WeightedPathSet {
    pub fn entries(&self) -> &[(DiscretePath, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }
}

pub(crate) fn check_scale(n_states: usize, steps: usize) -> Result<()> {
    let paths = (n_states as f64).powi(steps as i32 + 1);
    if paths > ENUMERATION_LIMIT {
        return Err(Error::ScaleTooLarge {
            paths,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(())
}

/// All paths `x_0..x_n` with probability `nu(x_0) prod_k P_k(x_{k-1}, x_k)`,
/// the control evaluated afresh on every prefix. Zero-probability paths are
/// dropped. Paths come out in lexicographic order.
pub fn enumerate_paths(nu: &Distribution, control: &dyn DiscreteControl, steps: usize) -> Result<WeightedPathSet> {
    let n = nu.n_states();
    check_scale(n, steps)?;
    let mut level: Vec<(Vec<usize>, f64)> = (0..n)
        .filter(|&s| nu.prob(s) > 0.0)
        .map(|s| (vec![s], nu.prob(s)))
        .collect();
    for k in 1..=steps {
        let mut next = Vec::with_capacity(level.len() * n);
        for (prefix, prob) in level {
            let p = control.transition(k, &prefix)?;
            check_dims(n, p.n_states())?;
            let from = prefix[k - 1];
            for to in 0..n {
                let w = p.get(from, to);
                if w > 0.0 {
                    let mut path = Vec::with_capacity(steps + 1);
                    path.extend_from_slice(&prefix);
                    path.push(to);
                    next.push((path, prob * w));
                }
            }
        }
        level = next;
    }
    Ok(WeightedPathSet {
        entries: level
            .into_iter()
            .map(|(states, p)| (DiscretePath::from_unchecked(states), p))
            .collect(),
        n_states: n,
        steps,
    })
}

/// `sum_paths prob(path) * functional(path)`.
pub fn exact_expectation<F>(paths: &WeightedPathSet, functional: F) -> f64
where
    F: Fn(&DiscretePath) -> f64,
{
    paths.entries.iter().map(|(path, p)| p * functional(path)).sum()
}

/// Ratio of the path's probability under the controlled law to its
/// probability under the reference chain, formed from plain products.
pub fn pathwise_likelihood_oracle(
    path: &DiscretePath,
    nu: &Distribution,
    control: &dyn DiscreteControl,
    p0: &StochasticMatrix,
) -> Result<f64> {
    p0.ensure_positive()?;
    let states = path.states();
    let mut target = nu.prob(states[0]);
    let mut reference = nu.prob(states[0]);
    for k in 1..states.len() {
        let pk = control.transition(k, &states[..k])?;
        target *= pk.get(states[k - 1], states[k]);
        reference *= p0.get(states[k - 1], states[k]);
    }
    if reference == 0.0 {
        return Err(Error::ZeroReferenceProbability);
    }
    Ok(target / reference)
}

/// Law of `X_T` for the constant generator `q` started from `nu`.
pub fn ctmc_marginal_oracle(q: &GeneratorMatrix, nu: &Distribution, horizon: f64) -> Result<Distribution> {
    check_dims(q.n_states(), nu.n_states())?;
    let p = transition_matrix(q, horizon)?;
    let row = DVector::from_column_slice(nu.probs()).transpose() * p.matrix();
    let probs = row.iter().map(|v| v.max(0.0)).collect();
    Distribution::with_tolerance(probs, COMPUTED_TOL)
}
