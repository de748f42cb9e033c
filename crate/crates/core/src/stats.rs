//! Batch-means error bars and small regression helpers.

use serde::{Deserialize, Serialize};

/// A Monte-Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn new(value: f64, stderr: f64) -> Self {
        Estimate { value, stderr }
    }

    /// True if `|self - other| ≤ k · sqrt(σ₁² + σ₂²)`.
    pub fn agrees_with(&self, other: &Estimate, k: f64) -> bool {
        (self.value - other.value).abs() <= k * self.combined_stderr(other)
    }

    pub fn combined_stderr(&self, other: &Estimate) -> f64 {
        self.stderr.hypot(other.stderr)
    }

    /// Average of independent estimates; `σ = sqrt(Σσᵢ²)/n`.
    pub fn pool(parts: &[Estimate]) -> Estimate {
        let n = parts.len() as f64;
        let value = parts.iter().map(|e| e.value).sum::<f64>() / n;
        let var: f64 = parts.iter().map(|e| e.stderr * e.stderr).sum();
        Estimate::new(value, var.sqrt() / n)
    }
}

/// Number of batches used for a series of length `n`: `⌊√n⌋`, at least 2.
pub fn batch_count(n: usize) -> usize {
    ((n as f64).sqrt().floor() as usize).max(2).min(n.max(2))
}

/// Mean and batch-means standard error with `⌊√n⌋` equal batches (the
/// remainder joins the last batch).
pub fn batch_means(values: &[f64]) -> Estimate {
    let n = values.len();
    assert!(n >= 2, "batch means needs at least two samples");
    let mean = values.iter().sum::<f64>() / n as f64;
    let nb = batch_count(n);
    let size = n / nb;
    let batch_mean = |b: usize| {
        let lo = b * size;
        let hi = if b + 1 == nb { n } else { lo + size };
        values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
    };
    let var = (0..nb).map(|b| (batch_mean(b) - mean).powi(2)).sum::<f64>() / (nb - 1) as f64;
    Estimate::new(mean, (var / nb as f64).sqrt())
}

/// Streaming accumulator producing the same estimate as [`batch_means`]
/// for a series whose length is known in advance.
#[derive(Clone, Debug)]
pub struct BatchAccumulator {
    n: usize,
    size: usize,
    nb: usize,
    seen: usize,
    sums: Vec<f64>,
}

impl BatchAccumulator {
    pub fn new(n: usize) -> Self {
        let nb = batch_count(n);
        BatchAccumulator {
            n,
            size: (n / nb).max(1),
            nb,
            seen: 0,
            sums: vec![0.0; nb],
        }
    }

    /// Index ranges of the batches for a series of length `n`.
    pub fn batch_ranges(n: usize) -> Vec<std::ops::Range<usize>> {
        let acc = BatchAccumulator::new(n);
        (0..acc.nb)
            .map(|b| {
                let hi = if b + 1 == acc.nb {
                    n
                } else {
                    (b + 1) * acc.size
                };
                b * acc.size..hi
            })
            .collect()
    }

    /// Accumulator with precomputed sums over [`Self::batch_ranges`].
    pub fn from_sums(n: usize, sums: Vec<f64>) -> Self {
        let mut acc = BatchAccumulator::new(n);
        assert_eq!(sums.len(), acc.nb);
        acc.sums = sums;
        acc.seen = n;
        acc
    }

    #[inline]
    pub fn push(&mut self, v: f64) {
        let b = (self.seen / self.size).min(self.nb - 1);
        self.sums[b] += v;
        self.seen += 1;
    }

    /// Batch-means estimate of `scale · (self − other)` for two series of
    /// the same length, batch by batch.
    pub fn scaled_difference(&self, other: &BatchAccumulator, scale: f64) -> Estimate {
        assert_eq!(self.n, other.n);
        let mut d = self.clone();
        for (a, b) in d.sums.iter_mut().zip(&other.sums) {
            *a = scale * (*a - b);
        }
        d.finish()
    }

    pub fn finish(&self) -> Estimate {
        assert_eq!(
            self.seen, self.n,
            "accumulator fed a different number of samples"
        );
        let mean = self.sums.iter().sum::<f64>() / self.n as f64;
        let var = (0..self.nb)
            .map(|b| {
                let len = if b + 1 == self.nb {
                    self.n - b * self.size
                } else {
                    self.size
                };
                (self.sums[b] / len as f64 - mean).powi(2)
            })
            .sum::<f64>()
            / (self.nb - 1) as f64;
        Estimate::new(mean, (var / self.nb as f64).sqrt())
    }
}

/// Sample mean and standard error of independent values.
pub fn mean_stderr(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return Estimate::new(mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Estimate::new(mean, (var / n).sqrt())
}

/// Least-squares line `y ≈ slope·x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_fit(&lx, &ly).0
}
