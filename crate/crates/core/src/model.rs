//! Kernel expansions, the truncation operator and the averaged estimator.
//!
//! A local estimator is a finite expansion `f(x) = Σ α_i k(c_i, x)` over the
//! covariates of its segment. The global estimator clips every local to
//! `[-M, M]` at evaluation time and averages the clipped values. Clipping
//! happens on function values; the stored coefficients are never modified.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DkrError, Result};
use crate::kernel::KernelSpec;
use crate::points::Points;

const MODEL_FORMAT: &str = "dkr-model";
const EXPANSION_FORMAT: &str = "dkr-expansion";
const FORMAT_VERSION: u32 = 1;

/// Cutoff `M > 0` of the truncation operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct TruncationLevel(f64);

impl TruncationLevel {
    pub fn new(level: f64) -> Result<Self> {
        if !(level.is_finite() && level > 0.0) {
            return Err(DkrError::invalid(format!(
                "truncation level must be positive and finite, got {level}"
            )));
        }
        Ok(TruncationLevel(level))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn clip(self, value: f64) -> f64 {
        value.clamp(-self.0, self.0)
    }
}

impl TryFrom<f64> for TruncationLevel {
    type Error = DkrError;
    fn try_from(v: f64) -> Result<Self> {
        TruncationLevel::new(v)
    }
}

impl From<TruncationLevel> for f64 {
    fn from(t: TruncationLevel) -> f64 {
        t.0
    }
}

/// `min(M, max(-M, value))`.
pub fn truncate(value: f64, level: f64) -> Result<f64> {
    Ok(TruncationLevel::new(level)?.clip(value))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelExpansion {
    kernel: KernelSpec,
    centers: Points,
    coefficients: Vec<f64>,
}

impl KernelExpansion {
    pub fn new(kernel: KernelSpec, centers: Points, coefficients: Vec<f64>) -> Result<Self> {
        kernel.validate()?;
        if centers.is_empty() {
            return Err(DkrError::invalid(
                "kernel expansion needs at least one center",
            ));
        }
        if coefficients.len() != centers.len() {
            return Err(DkrError::invalid(format!(
                "{} coefficients for {} centers",
                coefficients.len(),
                centers.len()
            )));
        }
        Ok(KernelExpansion {
            kernel,
            centers,
            coefficients,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn centers(&self) -> &Points {
        &self.centers
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.centers.dim()
    }

    /// `Σ_i α_i k(c_i, x)`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.centers.check_dim(x.len())?;
        Ok(self.evaluate_unchecked(x))
    }

    #[inline]
    pub(crate) fn evaluate_unchecked(&self, x: &[f64]) -> f64 {
        self.centers
            .rows()
            .zip(&self.coefficients)
            .map(|(c, a)| a * self.kernel.eval_unchecked(c, x))
            .sum()
    }

    pub fn evaluate_truncated(&self, x: &[f64], level: f64) -> Result<f64> {
        let level = TruncationLevel::new(level)?;
        Ok(level.clip(self.evaluate(x)?))
    }

    /// `αᵀ G α` over the centers; tiny negative round-off is clamped to zero.
    pub fn rkhs_norm_sq(&self) -> f64 {
        let n = self.len();
        let mut total = 0.0;
        for i in 0..n {
            let ci = self.centers.row(i);
            let mut row = 0.0;
            for j in 0..n {
                row += self.coefficients[j] * self.kernel.eval_unchecked(ci, self.centers.row(j));
            }
            total += self.coefficients[i] * row;
        }
        if (-1e-10..0.0).contains(&total) {
            0.0
        } else {
            total
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ExpansionDocument {
            format: EXPANSION_FORMAT.to_string(),
            version: FORMAT_VERSION,
            expansion: self.clone(),
        })
        .expect("expansion serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ExpansionDocument =
            serde_json::from_str(text).map_err(|e| DkrError::ModelFormat(e.to_string()))?;
        check_header(&doc.format, doc.version, EXPANSION_FORMAT)?;
        let e = doc.expansion;
        KernelExpansion::new(e.kernel, e.centers, e.coefficients)
    }
}

#[derive(Serialize, Deserialize)]
struct ExpansionDocument {
    format: String,
    version: u32,
    #[serde(flatten)]
    expansion: KernelExpansion,
}

/// A fitted local expansion tagged with the segment it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalEstimator {
    pub segment: usize,
    pub centers: Points,
    pub coefficients: Vec<f64>,
}

/// The averaged global predictor `(1/m) Σ_j T_M[f_j]`.
///
/// Locals are kept sorted by segment index and summed sequentially in that
/// order, so predictions do not depend on the order in which locals were
/// produced or supplied.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedEstimator {
    kernel: KernelSpec,
    truncation: TruncationLevel,
    segments: Vec<usize>,
    locals: Vec<KernelExpansion>,
}

impl AveragedEstimator {
    /// Builds from `(segment index, expansion)` pairs. All expansions must share
    /// one kernel and one covariate dimension; segment indices must be distinct.
    pub fn new(locals: Vec<(usize, KernelExpansion)>, truncation: f64) -> Result<Self> {
        let truncation = TruncationLevel::new(truncation)?;
        let mut locals = locals;
        locals.sort_by_key(|(segment, _)| *segment);
        let (_, first) = locals
            .first()
            .ok_or_else(|| DkrError::invalid("averaged estimator needs at least one local"))?;
        let kernel = *first.kernel();
        let dim = first.dim();
        for pair in locals.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(DkrError::invalid(format!(
                    "duplicate segment index {}",
                    pair[0].0
                )));
            }
        }
        for (segment, local) in &locals {
            if *local.kernel() != kernel {
                return Err(DkrError::invalid(format!(
                    "segment {segment} uses a different kernel"
                )));
            }
            if local.dim() != dim {
                return Err(DkrError::DimensionMismatch {
                    expected: dim,
                    found: local.dim(),
                });
            }
        }
        let (segments, locals) = locals.into_iter().unzip();
        Ok(AveragedEstimator {
            kernel,
            truncation,
            segments,
            locals,
        })
    }

    pub fn m(&self) -> usize {
        self.locals.len()
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn truncation(&self) -> f64 {
        self.truncation.value()
    }

    pub fn dim(&self) -> usize {
        self.locals[0].dim()
    }

    pub fn locals(&self) -> &[KernelExpansion] {
        &self.locals
    }

    pub fn segments(&self) -> &[usize] {
        &self.segments
    }

    /// The estimator made of the `j`-th local alone (by sorted position).
    pub fn single_local(&self, j: usize) -> Result<AveragedEstimator> {
        let local = self
            .locals
            .get(j)
            .ok_or_else(|| DkrError::invalid(format!("no local at position {j}")))?;
        AveragedEstimator::new(vec![(self.segments[j], local.clone())], self.truncation())
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(DkrError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let mut sum = 0.0;
        for local in &self.locals {
            sum += self.truncation.clip(local.evaluate_unchecked(x));
        }
        sum / self.locals.len() as f64
    }

    /// Truncated value of every local at `x`, in segment order.
    pub fn local_predictions(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(DkrError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(self
            .locals
            .iter()
            .map(|l| self.truncation.clip(l.evaluate_unchecked(x)))
            .collect())
    }

    /// Predictions for every row of `queries`; rows are evaluated in parallel.
    pub fn predict_many(&self, queries: &Points) -> Result<Vec<f64>> {
        if queries.dim() != self.dim() {
            return Err(DkrError::DimensionMismatch {
                expected: self.dim(),
                found: queries.dim(),
            });
        }
        let rows: Vec<&[f64]> = queries.rows().collect();
        Ok(rows.par_iter().map(|x| self.predict_unchecked(x)).collect())
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDocument {
            format: MODEL_FORMAT.to_string(),
            version: FORMAT_VERSION,
            kernel: self.kernel,
            truncation: self.truncation,
            locals: self
                .segments
                .iter()
                .zip(&self.locals)
                .map(|(&segment, l)| LocalEstimator {
                    segment,
                    centers: l.centers.clone(),
                    coefficients: l.coefficients.clone(),
                })
                .collect(),
        };
        serde_json::to_string(&doc).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| DkrError::ModelFormat(e.to_string()))?;
        check_header(&doc.format, doc.version, MODEL_FORMAT)?;
        let locals = doc
            .locals
            .into_iter()
            .map(|l| {
                KernelExpansion::new(doc.kernel, l.centers, l.coefficients).map(|e| (l.segment, e))
            })
            .collect::<Result<Vec<_>>>()?;
        AveragedEstimator::new(locals, doc.truncation.value())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| DkrError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| DkrError::io(path, e))?;
        AveragedEstimator::from_json(&text)
    }
}

/// On-disk layout of a saved model.
#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    version: u32,
    kernel: KernelSpec,
    truncation: TruncationLevel,
    locals: Vec<LocalEstimator>,
}

fn check_header(format: &str, version: u32, expected: &str) -> Result<()> {
    if format != expected {
        return Err(DkrError::ModelFormat(format!(
            "expected format {expected:?}, found {format:?}"
        )));
    }
    if version != FORMAT_VERSION {
        return Err(DkrError::ModelFormat(format!(
            "unsupported version {version} (this build reads {FORMAT_VERSION})"
        )));
    }
    Ok(())
}
