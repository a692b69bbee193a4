//! Quadratic generator family
//! `q(i,j) = a_i q0(i,j)^2 + b_i q0(i,j) - (a_i / N) sum_k q0(i,k)^2`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::markov::GeneratorMatrix;

/// Per-state coefficients `(a_i, b_i)` of one snapshot of the family.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCoefficients {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl QuadraticCoefficients {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                found: b.len(),
            });
        }
        for (idx, v) in a.iter().chain(&b).enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: idx % a.len().max(1),
                    col: 0,
                });
            }
        }
        Ok(Self { a, b })
    }

    /// `a = 0, b = 1`: reproduces the reference generator.
    pub fn identity(n_states: usize) -> Self {
        Self {
            a: vec![0.0; n_states],
            b: vec![1.0; n_states],
        }
    }

    /// `a = 0, b = scale`: the reference generator scaled by `scale`.
    pub fn scaled(n_states: usize, scale: f64) -> Self {
        Self {
            a: vec![0.0; n_states],
            b: vec![scale; n_states],
        }
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn n_states(&self) -> usize {
        self.a.len()
    }
}

/// Applies the family formula to every entry, diagonal included, with no cone check.
pub fn quadratic_entries(q0: &GeneratorMatrix, c: &QuadraticCoefficients) -> Result<DMatrix<f64>> {
    let n = q0.n_states();
    if c.n_states() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: c.n_states(),
        });
    }
    let q = q0.matrix();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        let sq_sum: f64 = q.row(i).iter().map(|v| v * v).sum();
        let shift = c.a[i] / n as f64 * sq_sum;
        for j in 0..n {
            let r = q[(i, j)];
            out[(i, j)] = c.a[i] * r * r + c.b[i] * r - shift;
        }
    }
    Ok(out)
}

/// Builds the generator for one coefficient snapshot; fails if any
/// off-diagonal rate is negative.
pub fn build_quadratic(q0: &GeneratorMatrix, c: &QuadraticCoefficients) -> Result<GeneratorMatrix> {
    let entries = quadratic_entries(q0, c)?;
    let n = entries.nrows();
    for i in 0..n {
        for j in 0..n {
            let v = entries[(i, j)];
            if i != j && v < 0.0 {
                return Err(Error::InfeasibleCoefficients {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    Ok(GeneratorMatrix::from_trusted(entries))
}

/// Smallest off-diagonal rate the snapshot would produce; feasible iff `>= 0`.
pub fn feasibility_margin(q0: &GeneratorMatrix, c: &QuadraticCoefficients) -> Result<f64> {
    let entries = quadratic_entries(q0, c)?;
    let n = entries.nrows();
    Ok((0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|ij| entries[ij])
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sym2() -> GeneratorMatrix {
        GeneratorMatrix::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]], true).unwrap()
    }

    fn coeffs(a: [f64; 2], b: [f64; 2]) -> QuadraticCoefficients {
        QuadraticCoefficients::new(a.to_vec(), b.to_vec()).unwrap()
    }

    #[test]
    fn identity_coefficients_reproduce_reference() {
        let q = build_quadratic(&sym2(), &coeffs([0.0, 0.0], [1.0, 1.0])).unwrap();
        assert_eq!(q.matrix(), sym2().matrix());
    }

    #[test]
    fn worked_example() {
        let q = build_quadratic(&sym2(), &coeffs([1.0, 1.0], [2.0, 2.0])).unwrap();
        let expected = GeneratorMatrix::from_rows(&[vec![-2.0, 2.0], vec![2.0, -2.0]], true).unwrap();
        assert_eq!(q.matrix(), expected.matrix());
    }

    #[test]
    fn negative_scale_is_infeasible() {
        let err = build_quadratic(&sym2(), &coeffs([0.0, 0.0], [-1.0, -1.0])).unwrap_err();
        assert!(matches!(err, Error::InfeasibleCoefficients { row: 0, col: 1, .. }));
    }

    #[test]
    fn margins() {
        assert_eq!(
            feasibility_margin(&sym2(), &coeffs([0.0, 0.0], [1.0, 1.0])).unwrap(),
            1.0
        );
        assert_eq!(
            feasibility_margin(&sym2(), &coeffs([0.0, 0.0], [0.0, 0.0])).unwrap(),
            0.0
        );
        assert_eq!(
            feasibility_margin(&sym2(), &coeffs([1.0, 1.0], [0.0, 0.0])).unwrap(),
            0.0
        );
        // The boundary case is still a generator.
        assert!(build_quadratic(&sym2(), &coeffs([1.0, 1.0], [0.0, 0.0])).is_ok());
    }

    #[test]
    fn dimension_mismatch() {
        let c = QuadraticCoefficients::identity(3);
        assert!(matches!(
            build_quadratic(&sym2(), &c),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(QuadraticCoefficients::new(vec![0.0], vec![1.0, 2.0]).is_err());
        assert!(QuadraticCoefficients::new(vec![f64::NAN, 0.0], vec![1.0, 2.0]).is_err());
    }

    fn arb_case() -> impl Strategy<Value = (GeneratorMatrix, QuadraticCoefficients)> {
        (2usize..=5).prop_flat_map(|n| {
            (
                prop::collection::vec(0.01f64..3.0, n * n),
                prop::collection::vec(-2.0f64..2.0, n),
                prop::collection::vec(-2.0f64..3.0, n),
            )
                .prop_map(move |(rates, a, b)| {
                    let rows: Vec<Vec<f64>> = (0..n)
                        .map(|i| {
                            let mut row: Vec<f64> =
                                (0..n).map(|j| if i == j { 0.0 } else { rates[i * n + j] }).collect();
                            row[i] = -row.iter().sum::<f64>();
                            row
                        })
                        .collect();
                    (
                        GeneratorMatrix::from_rows(&rows, true).unwrap(),
                        QuadraticCoefficients::new(a, b).unwrap(),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn rows_sum_to_zero_even_when_infeasible((q0, c) in arb_case()) {
            let q = quadratic_entries(&q0, &c).unwrap();
            for row in q.row_iter() {
                prop_assert!(row.sum().abs() <= 1e-12);
            }
        }

        #[test]
        fn margin_agrees_with_build((q0, c) in arb_case()) {
            let margin = feasibility_margin(&q0, &c).unwrap();
            prop_assert_eq!(margin >= 0.0, build_quadratic(&q0, &c).is_ok());
        }
    }
}
