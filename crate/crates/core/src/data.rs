//! The response/predictor container shared by every procedure.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{ensure_finite, ensure_len, Error, Result};

/// Response vector plus an `n × p` predictor matrix stored column by column.
///
/// Variable indices are 0-based and follow column order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dataset {
    n: usize,
    p: usize,
    y: Vec<f64>,
    x: Vec<f64>,
    names: Option<Vec<String>>,
    truth: Option<Vec<usize>>,
}

impl Dataset {
    /// Builds a dataset from a response and `p` columns of length `n`.
    pub fn from_columns(y: Vec<f64>, columns: Vec<Vec<f64>>) -> Result<Self> {
        let n = y.len();
        let p = columns.len();
        let mut x = Vec::with_capacity(n * p);
        for col in &columns {
            ensure_len(n, col.len())?;
            x.extend_from_slice(col);
        }
        Self::from_column_major(y, x, p)
    }

    /// Builds a dataset from a flat column-major buffer of `n * p` values.
    pub fn from_column_major(y: Vec<f64>, x: Vec<f64>, p: usize) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::EmptyData);
        }
        if n < 2 {
            return Err(Error::InvalidDimension("need at least two observations"));
        }
        if p == 0 {
            return Err(Error::InvalidDimension("need at least one predictor"));
        }
        ensure_len(n * p, x.len())?;
        ensure_finite(&y, "y")?;
        ensure_finite(&x, "x")?;
        let first = y[0];
        if y.iter().all(|&v| v == first) {
            return Err(Error::DegenerateResponse);
        }
        Ok(Dataset {
            n,
            p,
            y,
            x,
            names: None,
            truth: None,
        })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        ensure_len(self.p, names.len())?;
        self.names = Some(names);
        Ok(self)
    }

    pub fn with_truth(mut self, mut truth: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = truth.iter().find(|&&j| j >= self.p) {
            return Err(Error::IndexOutOfRange { index: bad, p: self.p });
        }
        truth.sort_unstable();
        truth.dedup();
        self.truth = Some(truth);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.x[j * self.n..(j + 1) * self.n]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.x.chunks_exact(self.n)
    }

    /// Row `i` across all predictors.
    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.p).map(|j| self.x[j * self.n + i]).collect()
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn truth(&self) -> Option<&[usize]> {
        self.truth.as_deref()
    }

    /// Copy with the response replaced; used for affine and permutation checks.
    pub fn with_response(&self, y: Vec<f64>) -> Result<Self> {
        let mut out = Dataset::from_column_major(y, self.x.clone(), self.p)?;
        out.names = self.names.clone();
        out.truth = self.truth.clone();
        Ok(out)
    }

    /// Per-column min-max scaling fitted on this dataset.
    pub fn column_scaling(&self) -> ColumnScaling {
        ColumnScaling::fit(self)
    }

    /// Copy with every predictor mapped onto `[0, 1]` by `scaling`.
    pub fn rescaled(&self, scaling: &ColumnScaling) -> Dataset {
        let mut x = self.x.clone();
        for (j, col) in x.chunks_exact_mut(self.n).enumerate() {
            for v in col {
                *v = scaling.apply(j, *v);
            }
        }
        Dataset {
            x,
            ..self.clone()
        }
    }
}

/// Min-max map of every column onto `[0, 1]`. Constant columns map to 0.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ColumnScaling {
    pub min: Vec<f64>,
    pub range: Vec<f64>,
}

impl ColumnScaling {
    pub fn fit(data: &Dataset) -> Self {
        let (mut min, mut range) = (Vec::with_capacity(data.p), Vec::with_capacity(data.p));
        for col in data.columns() {
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            min.push(lo);
            range.push(hi - lo);
        }
        ColumnScaling { min, range }
    }

    /// The identity map for `p` columns.
    pub fn identity(p: usize) -> Self {
        ColumnScaling {
            min: alloc::vec![0.0; p],
            range: alloc::vec![1.0; p],
        }
    }

    #[inline]
    pub fn apply(&self, j: usize, v: f64) -> f64 {
        if self.range[j] > 0.0 {
            (v - self.min[j]) / self.range[j]
        } else {
            0.0
        }
    }

    pub fn is_constant(&self, j: usize) -> bool {
        !(self.range[j] > 0.0)
    }
}

pub(crate) fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}
