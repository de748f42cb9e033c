//! Per-step vector and covector series on a contiguous range of orbit
//! indices.

use serde::{Deserialize, Serialize};
use std::ops::Range;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesLabel {
    /// `div^v f_*`.
    DivVFstar,
    /// `dΦ`.
    DPhi,
    /// Output of a shadowing operator.
    Shadow,
    Custom,
}

/// One `M`-vector per orbit index in `range`, stored contiguously.
#[derive(Clone, Debug)]
pub struct Series {
    pub label: SeriesLabel,
    dim: usize,
    start: usize,
    data: Vec<f64>,
}

/// Covectors (rows), e.g. `div^v f_*`, `dΦ`, `𝒮(ω)`.
pub type CovectorSeries = Series;
/// Tangent vectors, e.g. `X` or `S(Y)`.
pub type VectorSeries = Series;

impl Series {
    pub fn zeros(label: SeriesLabel, dim: usize, range: Range<usize>) -> Self {
        Series {
            label,
            dim,
            start: range.start,
            data: vec![0.0; range.len() * dim],
        }
    }

    /// Evaluates `g(n, x_n, out)` for each `n` in `range`.
    pub fn from_fn<G>(label: SeriesLabel, dim: usize, range: Range<usize>, mut g: G) -> Self
    where
        G: FnMut(usize, &mut [f64]),
    {
        let mut s = Series::zeros(label, dim, range.clone());
        for n in range {
            g(n, s.get_mut(n));
        }
        s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.len()
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, n: usize) -> &[f64] {
        let i = n - self.start;
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn get_mut(&mut self, n: usize) -> &mut [f64] {
        let i = n - self.start;
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest Euclidean norm over the series.
    pub fn max_norm(&self) -> f64 {
        self.data
            .chunks(self.dim.max(1))
            .map(crate::linalg::norm)
            .fold(0.0, f64::max)
    }

    /// Restriction to a sub-range.
    pub fn restrict(&self, range: Range<usize>) -> Series {
        assert!(range.start >= self.start && range.end <= self.range().end);
        let i0 = (range.start - self.start) * self.dim;
        let i1 = (range.end - self.start) * self.dim;
        Series {
            label: self.label,
            dim: self.dim,
            start: range.start,
            data: self.data[i0..i1].to_vec(),
        }
    }
}
