//! Pointwise regression losses `ℓ(prediction, label)` and empirical risk.

use serde::{Deserialize, Serialize};

use crate::error::{DkrError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LossSpec {
    /// `(p - y)²`, no 1/2 factor.
    Quadratic,
    /// `|p - y|`.
    Absolute,
    /// `max(0, |p - y| - ε)`.
    EpsilonInsensitive { epsilon: f64 },
}

/// Default tube half-width for the epsilon-insensitive loss, in response units.
pub const DEFAULT_EPSILON: f64 = 0.1;

impl LossSpec {
    pub fn epsilon_insensitive(epsilon: f64) -> Result<Self> {
        let spec = LossSpec::EpsilonInsensitive { epsilon };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if let LossSpec::EpsilonInsensitive { epsilon } = *self {
            if !(epsilon.is_finite() && epsilon >= 0.0) {
                return Err(DkrError::invalid(format!(
                    "epsilon must be nonnegative and finite, got {epsilon}"
                )));
            }
        }
        Ok(())
    }

    /// Whether the loss is differentiable in the prediction everywhere.
    /// Parses a family name; `epsilon` is used only by the epsilon-insensitive loss.
    pub fn from_name(name: &str, epsilon: f64) -> Result<Self> {
        let spec = match name.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "quadratic" | "squared" | "ls" => LossSpec::Quadratic,
            "absolute" | "lad" | "l1" => LossSpec::Absolute,
            "epsilon_insensitive" | "eps" | "svr" => LossSpec::EpsilonInsensitive { epsilon },
            _ => {
                return Err(DkrError::invalid(format!(
                    "unknown loss {name:?} (quadratic, absolute, epsilon_insensitive)"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self, LossSpec::Quadratic)
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossSpec::Quadratic => "quadratic",
            LossSpec::Absolute => "absolute",
            LossSpec::EpsilonInsensitive { .. } => "epsilon_insensitive",
        }
    }

    #[inline]
    pub fn value(&self, prediction: f64, label: f64) -> f64 {
        let r = prediction - label;
        match *self {
            LossSpec::Quadratic => r * r,
            LossSpec::Absolute => r.abs(),
            LossSpec::EpsilonInsensitive { epsilon } => (r.abs() - epsilon).max(0.0),
        }
    }

    /// A subgradient in the prediction. Kinks return 0.
    #[inline]
    pub fn subgradient(&self, prediction: f64, label: f64) -> f64 {
        let r = prediction - label;
        match *self {
            LossSpec::Quadratic => 2.0 * r,
            LossSpec::Absolute => sign(r),
            LossSpec::EpsilonInsensitive { epsilon } => {
                if r > epsilon {
                    1.0
                } else if r < -epsilon {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[inline]
fn sign(r: f64) -> f64 {
    if r > 0.0 {
        1.0
    } else if r < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn loss_value(spec: &LossSpec, prediction: f64, label: f64) -> f64 {
    spec.value(prediction, label)
}

pub fn loss_subgradient(spec: &LossSpec, prediction: f64, label: f64) -> f64 {
    spec.subgradient(prediction, label)
}

/// Mean loss over paired predictions and labels.
pub fn empirical_risk(spec: &LossSpec, predictions: &[f64], labels: &[f64]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(DkrError::DimensionMismatch {
            expected: labels.len(),
            found: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(DkrError::invalid("empirical risk over an empty sample"));
    }
    Ok(risk_unchecked(spec, predictions, labels))
}

pub(crate) fn risk_unchecked(spec: &LossSpec, predictions: &[f64], labels: &[f64]) -> f64 {
    let total: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(&p, &y)| spec.value(p, y))
        .sum();
    total / labels.len() as f64
}
