#![allow(dead_code)]

use std::path::PathBuf;

use markov_girsanov::{
    Distribution, GeneratorMatrix, QuadraticCoefficients, StepRule, StepTableControl, StochasticMatrix,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Row with entries bounded away from zero, normalised to sum to one.
pub fn random_row(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(floor..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

pub fn random_stochastic(rng: &mut ChaCha8Rng, n: usize) -> StochasticMatrix {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| random_row(rng, n, 0.05)).collect();
    StochasticMatrix::from_rows(&rows, true).unwrap()
}

/// Stochastic matrix where each entry is zeroed with probability `p_zero`,
/// keeping at least one positive entry per row.
pub fn random_sparse_stochastic(rng: &mut ChaCha8Rng, n: usize, p_zero: f64) -> StochasticMatrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let keep = rng.random_range(0..n);
            let raw: Vec<f64> = (0..n)
                .map(|j| {
                    if j != keep && rng.random::<f64>() < p_zero {
                        0.0
                    } else {
                        rng.random_range(0.05..1.0)
                    }
                })
                .collect();
            let sum: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / sum).collect()
        })
        .collect();
    StochasticMatrix::from_rows(&rows, false).unwrap()
}

pub fn random_distribution(rng: &mut ChaCha8Rng, n: usize) -> Distribution {
    Distribution::new(random_row(rng, n, 0.05)).unwrap()
}

/// Table keyed on step and last state, with a rule for every state at
/// step 1, a rule for the last state at any step, and a random default.
pub fn random_table(rng: &mut ChaCha8Rng, n: usize, p_zero: f64) -> StepTableControl {
    let draw = |rng: &mut ChaCha8Rng| {
        if p_zero > 0.0 {
            random_sparse_stochastic(rng, n, p_zero)
        } else {
            random_stochastic(rng, n)
        }
    };
    let mut rules: Vec<StepRule> = (0..n)
        .map(|s| StepRule {
            step: Some(1),
            state: Some(s),
            matrix: draw(rng),
        })
        .collect();
    rules.push(StepRule {
        step: Some(2),
        state: None,
        matrix: draw(rng),
    });
    rules.push(StepRule {
        step: None,
        state: Some(n - 1),
        matrix: draw(rng),
    });
    let default = draw(rng);
    StepTableControl::new(rules, default).unwrap()
}

/// Generator with off-diagonal rates in `[lo, hi)`.
pub fn random_generator(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> GeneratorMatrix {
    let mut rows = vec![vec![0.0; n]; n];
    for (i, row) in rows.iter_mut().enumerate() {
        let mut exit = 0.0;
        for (j, v) in row.iter_mut().enumerate() {
            if i != j {
                *v = rng.random_range(lo..hi);
                exit += *v;
            }
        }
        row[i] = -exit;
    }
    GeneratorMatrix::from_rows(&rows, true).unwrap()
}

pub fn random_coefficients(rng: &mut ChaCha8Rng, n: usize, a: (f64, f64), b: (f64, f64)) -> QuadraticCoefficients {
    QuadraticCoefficients::new(
        (0..n).map(|_| rng.random_range(a.0..a.1)).collect(),
        (0..n).map(|_| rng.random_range(b.0..b.1)).collect(),
    )
    .unwrap()
}

pub fn indicator(n: usize, j: usize) -> Vec<f64> {
    let mut f = vec![0.0; n];
    f[j] = 1.0;
    f
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn bundled(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}
