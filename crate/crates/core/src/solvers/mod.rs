//! Local minimizers of `(1/n) Σ ℓ(f(x_i), y_i) + λ·penalty(f)` over expansions
//! `f = Σ α_i k(x_i, ·)` centered on the segment's own covariates.
//!
//! [`solve_kernel_ridge`] handles the quadratic loss with the squared RKHS norm
//! in closed form; [`solve_generic`] covers every supported loss/penalty pair.

mod generic;
mod ridge;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{DkrError, Result};
use crate::kernel::GramMatrix;
use crate::losses::{risk_unchecked, LossSpec};

pub use generic::{solve_generic, SolveReport};
pub use ridge::solve_kernel_ridge;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltySpec {
    /// `‖f‖²_K = αᵀ G α` (exponent fixed at 2).
    RkhsNormSq,
    /// `Σ |α_i|`, the kernelized lasso penalty on expansion coefficients.
    CoefficientL1,
}

impl PenaltySpec {
    pub fn name(&self) -> &'static str {
        match self {
            PenaltySpec::RkhsNormSq => "rkhs_norm_sq",
            PenaltySpec::CoefficientL1 => "coefficient_l1",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "rkhs_norm_sq" | "rkhs" | "ridge" => Ok(PenaltySpec::RkhsNormSq),
            "coefficient_l1" | "l1" | "lasso" => Ok(PenaltySpec::CoefficientL1),
            _ => Err(DkrError::invalid(format!(
                "unknown penalty {name:?} (rkhs_norm_sq, coefficient_l1)"
            ))),
        }
    }

    /// Penalty value given `α` and `Gα`.
    pub(crate) fn value(&self, alpha: &[f64], g_alpha: &[f64]) -> f64 {
        match self {
            PenaltySpec::RkhsNormSq => alpha.iter().zip(g_alpha).map(|(a, p)| a * p).sum(),
            PenaltySpec::CoefficientL1 => alpha.iter().map(|a| a.abs()).sum(),
        }
    }
}

/// Iteration limits and numerical safeguards.
///
/// The generic solver uses accelerated proximal gradient steps with
/// backtracking for smooth losses and diminishing steps `a / (1 + √t)` for
/// nonsmooth ones; `a` is chosen by a line search on the first step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Stop once the best objective improves by less than this fraction over
    /// a window of recent iterations.
    pub tolerance: f64,
    /// Diagonal jitter for the closed-form ridge solve, relative to `trace(G)/n`.
    pub jitter: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 5000,
            tolerance: 1e-8,
            jitter: 1e-10,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(DkrError::invalid("max_iterations must be positive"));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(DkrError::invalid(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return Err(DkrError::invalid(format!(
                "jitter must be nonnegative, got {}",
                self.jitter
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_problem(gram: &GramMatrix, labels: &[f64], lambda: f64) -> Result<()> {
    if labels.len() != gram.n() {
        return Err(DkrError::DimensionMismatch {
            expected: gram.n(),
            found: labels.len(),
        });
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(DkrError::invalid(format!(
            "lambda must be nonnegative and finite, got {lambda}"
        )));
    }
    if labels.iter().any(|y| !y.is_finite()) {
        return Err(DkrError::invalid("labels must be finite"));
    }
    Ok(())
}

/// `E_S(Gα) + λ·penalty(α)`.
pub fn objective(
    loss: &LossSpec,
    penalty: &PenaltySpec,
    gram: &GramMatrix,
    labels: &[f64],
    lambda: f64,
    alpha: &[f64],
) -> Result<f64> {
    check_problem(gram, labels, lambda)?;
    if alpha.len() != gram.n() {
        return Err(DkrError::DimensionMismatch {
            expected: gram.n(),
            found: alpha.len(),
        });
    }
    let a = DVector::from_column_slice(alpha);
    let p = gram.as_matrix() * &a;
    Ok(risk_unchecked(loss, p.as_slice(), labels) + lambda * penalty.value(alpha, p.as_slice()))
}

/// Euclidean gradient of the empirical risk in `α`: `G s / n`, where `s`
/// holds the loss (sub)gradients at the predictions `Gα`.
pub fn risk_gradient(
    loss: &LossSpec,
    gram: &GramMatrix,
    labels: &[f64],
    alpha: &[f64],
) -> Result<Vec<f64>> {
    check_problem(gram, labels, 0.0)?;
    if alpha.len() != gram.n() {
        return Err(DkrError::DimensionMismatch {
            expected: gram.n(),
            found: alpha.len(),
        });
    }
    let g = gram.as_matrix();
    let p = g * DVector::from_column_slice(alpha);
    let n = labels.len() as f64;
    let s = DVector::from_iterator(
        p.len(),
        p.iter()
            .zip(labels)
            .map(|(&pi, &yi)| loss.subgradient(pi, yi) / n),
    );
    Ok((g * s).as_slice().to_vec())
}

#[cfg(test)]
mod tests;
