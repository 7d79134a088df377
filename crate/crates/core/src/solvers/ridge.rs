use nalgebra::{Cholesky, DMatrix, DVector};

use super::{check_problem, SolverOptions};
use crate::error::{DkrError, Result};
use crate::kernel::GramMatrix;

const MAX_JITTER_ESCALATIONS: usize = 8;
const REFINEMENT_STEPS: usize = 3;

/// Closed-form kernel ridge: solves `(G + nλI) α = y`.
///
/// The factorized matrix carries an extra `jitter · trace(G)/n` on the
/// diagonal; if the factorization still fails the jitter is raised tenfold,
/// up to eight times. A few rounds of iterative refinement against the
/// unjittered system follow.
pub fn solve_kernel_ridge(
    gram: &GramMatrix,
    labels: &[f64],
    lambda: f64,
    options: &SolverOptions,
) -> Result<Vec<f64>> {
    check_problem(gram, labels, lambda)?;
    options.validate()?;
    let n = gram.n();
    let g = gram.as_matrix();
    let y = DVector::from_column_slice(labels);
    let ridge = n as f64 * lambda;
    let scale = (gram.trace() / n as f64).max(f64::MIN_POSITIVE);

    let mut jitter = options.jitter * scale;
    let mut factor = None;
    for _ in 0..=MAX_JITTER_ESCALATIONS {
        let mut a = g.clone();
        for i in 0..n {
            a[(i, i)] += ridge + jitter;
        }
        if let Some(chol) = Cholesky::new(a) {
            factor = Some(chol);
            break;
        }
        jitter = if jitter > 0.0 {
            jitter * 10.0
        } else {
            1e-12 * scale
        };
    }
    let chol = factor.ok_or_else(|| {
        DkrError::Numerical(format!(
            "kernel ridge system is not positive definite (n = {n}, lambda = {lambda}, \
             final jitter = {jitter:e}, mean diagonal = {scale:e})"
        ))
    })?;

    let mut alpha = chol.solve(&y);
    let mut residual = ridge_residual(g, ridge, &alpha, &y);
    let mut res_norm = residual.amax();
    for _ in 0..REFINEMENT_STEPS {
        if !res_norm.is_finite() || res_norm == 0.0 {
            break;
        }
        let candidate = &alpha + chol.solve(&residual);
        let cand_residual = ridge_residual(g, ridge, &candidate, &y);
        let cand_norm = cand_residual.amax();
        if cand_norm.is_nan() || cand_norm >= res_norm {
            break;
        }
        alpha = candidate;
        residual = cand_residual;
        res_norm = cand_norm;
    }
    if alpha.iter().any(|a| !a.is_finite()) {
        return Err(DkrError::Numerical(format!(
            "kernel ridge produced non-finite coefficients (n = {n}, lambda = {lambda})"
        )));
    }
    Ok(alpha.as_slice().to_vec())
}

fn ridge_residual(
    g: &DMatrix<f64>,
    ridge: f64,
    alpha: &DVector<f64>,
    y: &DVector<f64>,
) -> DVector<f64> {
    let mut r = y.clone();
    r.gemv(-1.0, g, alpha, 1.0);
    r.axpy(-ridge, alpha, 1.0);
    r
}
