//! Kernel functions and Gram matrices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{DkrError, Result};
use crate::points::Points;

/// A positive semi-definite kernel on covariate vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum KernelSpec {
    /// `exp(-‖x1 - x2‖² / τ²)` with bandwidth `τ` in covariate units.
    Gaussian { bandwidth: f64 },
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        let spec = KernelSpec::Gaussian { bandwidth };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Gaussian { bandwidth } => {
                if !(bandwidth.is_finite() && bandwidth > 0.0) {
                    return Err(DkrError::invalid(format!(
                        "kernel bandwidth must be positive and finite, got {bandwidth}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            KernelSpec::Gaussian { .. } => "gaussian",
        }
    }

    /// Kernel value without the dimension check; callers guarantee equal lengths.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x1: &[f64], x2: &[f64]) -> f64 {
        match *self {
            KernelSpec::Gaussian { bandwidth } => {
                let dist_sq: f64 = x1
                    .iter()
                    .zip(x2)
                    .map(|(a, b)| {
                        let d = a - b;
                        d * d
                    })
                    .sum();
                (-dist_sq / (bandwidth * bandwidth)).exp()
            }
        }
    }
}

pub fn kernel_eval(spec: &KernelSpec, x1: &[f64], x2: &[f64]) -> Result<f64> {
    if x1.len() != x2.len() {
        return Err(DkrError::DimensionMismatch {
            expected: x1.len(),
            found: x2.len(),
        });
    }
    if x1.is_empty() {
        return Err(DkrError::invalid(
            "covariate vectors must have dimension >= 1",
        ));
    }
    Ok(spec.eval_unchecked(x1, x2))
}

/// Symmetric `n × n` matrix of kernel values over one point set.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
}

impl GramMatrix {
    /// Wraps an explicit matrix. It must be square and exactly symmetric.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(DkrError::invalid(format!(
                "Gram matrix must be square and nonempty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let n = entries.nrows();
        for j in 0..n {
            for i in 0..j {
                if entries[(i, j)] != entries[(j, i)] {
                    return Err(DkrError::invalid(format!(
                        "Gram matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(GramMatrix { entries })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }
}

pub fn gram_matrix(spec: &KernelSpec, points: &Points) -> Result<GramMatrix> {
    spec.validate()?;
    let n = points.len();
    if n == 0 {
        return Err(DkrError::invalid("Gram matrix of an empty point list"));
    }
    let mut entries = DMatrix::<f64>::zeros(n, n);
    // Column-major: fill the upper triangle column by column, then mirror.
    for j in 0..n {
        let xj = points.row(j);
        for i in 0..j {
            entries[(i, j)] = spec.eval_unchecked(points.row(i), xj);
        }
        entries[(j, j)] = spec.eval_unchecked(xj, xj);
    }
    entries.fill_lower_triangle_with_upper_triangle();
    Ok(GramMatrix { entries })
}

/// `|queries| × |centers|` matrix with entry `[q][c] = k(queries[q], centers[c])`.
pub fn cross_gram(spec: &KernelSpec, centers: &Points, queries: &Points) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if centers.dim() != queries.dim() {
        return Err(DkrError::DimensionMismatch {
            expected: centers.dim(),
            found: queries.dim(),
        });
    }
    Ok(DMatrix::from_fn(queries.len(), centers.len(), |q, c| {
        spec.eval_unchecked(queries.row(q), centers.row(c))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut impl Rng, n: usize, d: usize) -> Points {
        Points::new(d, (0..n * d).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn zero_distance_is_one() {
        let k = KernelSpec::gaussian(0.05).unwrap();
        assert_eq!(kernel_eval(&k, &[0.3, -2.0], &[0.3, -2.0]).unwrap(), 1.0);
    }

    #[test]
    fn distance_equal_to_bandwidth_gives_inverse_e() {
        let expected = (-1.0f64).exp();
        let k = KernelSpec::gaussian(1.0).unwrap();
        let v = kernel_eval(&k, &[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((v - 0.367879441).abs() < 1e-9);
        assert!((v - expected).abs() < 1e-15);

        let k = KernelSpec::gaussian(0.05).unwrap();
        let v = kernel_eval(&k, &[0.1, 0.2], &[0.1 + 0.03, 0.2 + 0.04]).unwrap();
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_and_bad_bandwidth() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        assert!(matches!(
            kernel_eval(&k, &[0.0], &[0.0, 1.0]),
            Err(DkrError::DimensionMismatch { .. })
        ));
        assert!(KernelSpec::gaussian(0.0).is_err());
        assert!(KernelSpec::gaussian(-1.0).is_err());
        assert!(KernelSpec::gaussian(f64::NAN).is_err());
    }

    #[test]
    fn gram_small_cases() {
        let k = KernelSpec::gaussian(0.5).unwrap();
        let one = gram_matrix(&k, &Points::from_rows(vec![vec![0.2, 0.7]]).unwrap()).unwrap();
        assert_eq!(one.n(), 1);
        assert_eq!(one.get(0, 0), 1.0);

        let twin = Points::from_rows(vec![vec![0.4], vec![0.4]]).unwrap();
        let g = gram_matrix(&k, &twin).unwrap();
        assert_eq!(g.as_matrix(), &DMatrix::from_element(2, 2, 1.0));

        assert!(gram_matrix(&k, &Points::empty(2).unwrap()).is_err());
    }

    #[test]
    fn gram_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = random_points(&mut rng, 3, 2);
        let tau = 0.7;
        let k = KernelSpec::gaussian(tau).unwrap();
        let g = gram_matrix(&k, &pts).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let (a, b) = (pts.row(i), pts.row(j));
                let d2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
                let want = (-d2 / (tau * tau)).exp();
                assert!((g.get(i, j) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn gram_is_exactly_symmetric_with_unit_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = random_points(&mut rng, 40, 3);
        let g = gram_matrix(&KernelSpec::gaussian(0.3).unwrap(), &pts).unwrap();
        for i in 0..40 {
            assert_eq!(g.get(i, i), 1.0);
            for j in 0..40 {
                assert_eq!(g.get(i, j), g.get(j, i));
            }
        }
    }

    #[test]
    fn gram_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(n, tau) in &[(10, 0.05), (50, 0.3), (120, 0.1), (200, 1.0)] {
            let pts = random_points(&mut rng, n, 2);
            let g = gram_matrix(&KernelSpec::gaussian(tau).unwrap(), &pts).unwrap();
            let eig = g.as_matrix().clone().symmetric_eigenvalues();
            let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-8 * n as f64, "n={n} tau={tau} min eig {min}");
        }
    }

    #[test]
    fn cross_gram_cases() {
        let k = KernelSpec::gaussian(0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let centers = random_points(&mut rng, 6, 2);
        let same = cross_gram(&k, &centers, &centers).unwrap();
        assert_eq!(&same, gram_matrix(&k, &centers).unwrap().as_matrix());

        let far = Points::from_rows(vec![vec![1.0 + 10.0 * 0.2 + 1.0, 0.5]]).unwrap();
        let row = cross_gram(&k, &centers, &far).unwrap();
        // exp(-100) ≈ 3.7e-44 at distance 10τ; farther points are smaller still.
        assert!(row.iter().all(|&v| v < 1e-12));

        let none = cross_gram(&k, &centers, &Points::empty(2).unwrap()).unwrap();
        assert_eq!(none.shape(), (0, 6));

        let wrong = Points::empty(3).unwrap();
        assert!(cross_gram(&k, &centers, &wrong).is_err());
    }

    #[test]
    fn symmetric_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let k = KernelSpec::gaussian(0.37).unwrap();
        for _ in 0..1000 {
            let a: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            assert_eq!(
                kernel_eval(&k, &a, &b).unwrap().to_bits(),
                kernel_eval(&k, &b, &a).unwrap().to_bits()
            );
        }
    }

    proptest! {
        #[test]
        fn bandwidth_scaling(
            a in proptest::collection::vec(-3.0f64..3.0, 2),
            b in proptest::collection::vec(-3.0f64..3.0, 2),
            tau in 0.05f64..5.0,
        ) {
            let k = KernelSpec::gaussian(tau).unwrap();
            let unit = KernelSpec::gaussian(1.0).unwrap();
            let sa: Vec<f64> = a.iter().map(|v| v / tau).collect();
            let sb: Vec<f64> = b.iter().map(|v| v / tau).collect();
            let lhs = kernel_eval(&k, &a, &b).unwrap();
            let rhs = kernel_eval(&unit, &sa, &sb).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12);
        }

        #[test]
        fn gaussian_range(
            a in proptest::collection::vec(-1.0f64..1.0, 3),
            b in proptest::collection::vec(-1.0f64..1.0, 3),
            tau in 0.5f64..2.0,
        ) {
            let v = kernel_eval(&KernelSpec::gaussian(tau).unwrap(), &a, &b).unwrap();
            prop_assert!(v > 0.0 && v <= 1.0);
        }
    }
}
