//! Row-major storage for a list of covariate vectors.

use serde::{Deserialize, Serialize};

use crate::error::{DkrError, Result};

/// `len()` points of dimension `dim()`, stored contiguously row by row.
///
/// Serializes as an array of arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Points {
    dim: usize,
    values: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(DkrError::invalid("point dimension must be at least 1"));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(DkrError::invalid(format!(
                "{} values do not split into rows of dimension {dim}",
                values.len()
            )));
        }
        Ok(Points { dim, values })
    }

    /// An empty set with a known dimension.
    pub fn empty(dim: usize) -> Result<Self> {
        Points::new(dim, Vec::new())
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| DkrError::invalid("cannot infer dimension of an empty point list"))?;
        let mut values = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(DkrError::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            values.extend(row);
        }
        Points::new(dim, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// The points at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Points {
        let mut values = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Points {
            dim: self.dim,
            values,
        }
    }

    pub(crate) fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim {
            return Err(DkrError::DimensionMismatch {
                expected: self.dim,
                found,
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<Vec<f64>>> for Points {
    type Error = DkrError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Points::from_rows(rows)
    }
}

impl From<Points> for Vec<Vec<f64>> {
    fn from(points: Points) -> Self {
        points.to_rows()
    }
}
