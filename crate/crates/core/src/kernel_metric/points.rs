use crate::error::{Error, Result};

/// `n ≥ 1` points of a common dimension, stored row-major.
///
/// When paired with an explicit distance matrix the points are one-dimensional
/// and hold row indices into that matrix (see [`PointSet::indices`]).
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    dim: usize,
    data: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("points must have dimension ≥ 1".into()));
        }
        if data.is_empty() {
            return Err(Error::InvalidInput("point set is empty".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidInput(format!(
                "{} coordinates do not split into points of dimension {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                value: data[pos],
                context: format!("point {} coordinate {}", pos / dim, pos % dim),
            });
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::InvalidInput("point set is empty".into()))?;
        let dim = first.len();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "point {i} has dimension {}, expected {dim}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    /// Opaque points `0, 1, …, n−1` addressing rows of an explicit matrix.
    pub fn indices(n: usize) -> Result<Self> {
        Self::new(1, (0..n).map(|i| i as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }

    /// Points of `self` followed by points of `other`.
    pub fn concat(&self, other: &PointSet) -> Result<PointSet> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(PointSet {
            dim: self.dim,
            data,
        })
    }

    /// Points at `idx`, in that order (repeats allowed).
    pub fn select(&self, idx: &[usize]) -> PointSet {
        let mut data = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            data.extend_from_slice(self.point(i));
        }
        PointSet {
            dim: self.dim,
            data,
        }
    }

    /// Adds `shift` to every point.
    pub fn translate(&self, shift: &[f64]) -> Result<PointSet> {
        if shift.len() != self.dim {
            return Err(Error::DimensionMismatch(self.dim, shift.len()));
        }
        let data = self
            .data
            .chunks_exact(self.dim)
            .flat_map(|p| p.iter().zip(shift).map(|(a, b)| a + b))
            .collect();
        Ok(PointSet {
            dim: self.dim,
            data,
        })
    }
}
