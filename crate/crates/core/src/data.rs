//! Dense matrix types shared by the estimators and the protocol.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `n x d` table of finite feature values held by one party, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    values: Vec<f64>,
    n: usize,
    d: usize,
}

impl DataMatrix {
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::Shape(format!("matrix must be non-empty, got {n}x{d}")));
        }
        if values.len() != n * d {
            return Err(Error::Shape(format!(
                "{n}x{d} matrix needs {} values, got {}",
                n * d,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite entry at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self { values, n, d })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::Shape(format!(
                    "row {i} has {} columns, expected {d}",
                    r.len()
                )));
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), d, values)
    }

    /// A single-column matrix.
    pub fn column(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(n, 1, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.d + j]
    }

    /// Rows in `range` (0-based, half-open) as a new matrix.
    pub fn select_rows(&self, range: Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.n {
            return Err(Error::Shape(format!(
                "row range {range:?} out of bounds for {} rows",
                self.n
            )));
        }
        let values = self.values[range.start * self.d..range.end * self.d].to_vec();
        Ok(Self {
            n: range.len(),
            d: self.d,
            values,
        })
    }

    /// Rows reordered so that output row `i` is input row `order[i]`.
    pub fn permute_rows(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n {
            return Err(Error::Shape(format!(
                "permutation of length {} for {} rows",
                order.len(),
                self.n
            )));
        }
        let mut values = Vec::with_capacity(self.values.len());
        for &i in order {
            if i >= self.n {
                return Err(Error::Shape(format!("row index {i} out of bounds")));
            }
            values.extend_from_slice(self.row(i));
        }
        Ok(Self {
            values,
            n: self.n,
            d: self.d,
        })
    }

    /// Columns in `range` (0-based, half-open) as a new matrix.
    pub fn select_columns(&self, range: Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.d {
            return Err(Error::Shape(format!(
                "column range {range:?} out of bounds for {} columns",
                self.d
            )));
        }
        let width = range.len();
        let mut values = Vec::with_capacity(self.n * width);
        for r in self.rows() {
            values.extend_from_slice(&r[range.clone()]);
        }
        Ok(Self {
            values,
            n: self.n,
            d: width,
        })
    }

    /// `X u` for a direction `u` of length `d`.
    pub fn project(&self, direction: &[f64]) -> Result<Vec<f64>> {
        if direction.len() != self.d {
            return Err(Error::Shape(format!(
                "direction of length {} for {} columns",
                direction.len(),
                self.d
            )));
        }
        Ok(self
            .rows()
            .map(|r| r.iter().zip(direction).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Per-column min-max rescaling to [0, 1]; constant columns map to 0.
    pub fn min_max_normalized(&self) -> Self {
        let mut lo = vec![f64::INFINITY; self.d];
        let mut hi = vec![f64::NEG_INFINITY; self.d];
        for r in self.rows() {
            for (j, &v) in r.iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(idx, &v)| {
                let j = idx % self.d;
                let span = hi[j] - lo[j];
                if span > 0.0 {
                    (v - lo[j]) / span
                } else {
                    0.0
                }
            })
            .collect();
        Self {
            values,
            n: self.n,
            d: self.d,
        }
    }
}

/// Square `m x m` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    pub(crate) entries: Vec<f64>,
    pub(crate) m: usize,
}

impl SquareMatrix {
    pub fn from_vec(m: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != m * m {
            return Err(Error::Shape(format!(
                "{m}x{m} matrix needs {} entries, got {}",
                m * m,
                entries.len()
            )));
        }
        Ok(Self { entries, m })
    }

    pub fn from_fn(m: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut entries = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                entries.push(f(i, j));
            }
        }
        Self { entries, m }
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.m..(i + 1) * self.m]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn max(&self) -> f64 {
        self.entries.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.m).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

/// Pairwise Euclidean distances between the rows of a [`DataMatrix`].
///
/// Symmetric with a zero diagonal and non-negative entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix(pub(crate) SquareMatrix);

impl DistanceMatrix {
    /// Wraps a matrix after checking it is a valid distance matrix.
    pub fn try_from_matrix(m: SquareMatrix) -> Result<Self> {
        if !m.is_symmetric() {
            return Err(Error::InvalidInput("distance matrix is not symmetric".into()));
        }
        if (0..m.size()).any(|i| m.get(i, i) != 0.0) {
            return Err(Error::InvalidInput("distance matrix has a non-zero diagonal".into()));
        }
        if m.entries().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput(
                "distance matrix has negative or non-finite entries".into(),
            ));
        }
        Ok(Self(m))
    }

    pub fn size(&self) -> usize {
        self.0.size()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    pub fn max(&self) -> f64 {
        self.0.max()
    }

    pub fn as_matrix(&self) -> &SquareMatrix {
        &self.0
    }
}

/// Kernel evaluations `k(x_i, x_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix(pub(crate) SquareMatrix);

impl KernelMatrix {
    pub fn try_from_matrix(m: SquareMatrix) -> Result<Self> {
        if m.entries().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("kernel matrix has non-finite entries".into()));
        }
        if !m.is_symmetric() {
            return Err(Error::InvalidInput("kernel matrix is not symmetric".into()));
        }
        Ok(Self(m))
    }

    pub fn size(&self) -> usize {
        self.0.size()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    pub fn max(&self) -> f64 {
        self.0.max()
    }

    pub fn as_matrix(&self) -> &SquareMatrix {
        &self.0
    }
}
