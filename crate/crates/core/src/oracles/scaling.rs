//! Error of zeroth-order finite elements on the singular product measure
//! uniform on `{0}^{M−a} × T^a`, `T = [−½, ½]`: the cell of width `b` smears
//! the transverse delta into a box, giving `E = ∫Φh' − ∫Φh = O((M−a) b²)`.

use crate::error::{Error, Result};
use crate::stats::loglog_slope;
use serde::{Deserialize, Serialize};

/// 3-point Gauss–Legendre on `[-1, 1]`; exact for degree ≤ 5.
const GL3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

pub const MAX_DIM: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub b: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Fitted order of `|E|` in `b` (NaN when the error vanishes).
    pub slope: f64,
}

/// Tensor Gauss–Legendre over the box `Π [lo_i, hi_i]`.
fn integrate<F: Fn(&[f64]) -> f64>(lo: &[f64], hi: &[f64], f: F) -> f64 {
    let d = lo.len();
    let mut x = vec![0.0; d];
    let mut idx = vec![0usize; d];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for k in 0..d {
            let (t, wk) = GL3[idx[k]];
            let half = 0.5 * (hi[k] - lo[k]);
            x[k] = lo[k] + half * (t + 1.0);
            w *= wk * half;
        }
        total += w * f(&x);
        let mut k = 0;
        loop {
            if k == d {
                return total;
            }
            idx[k] += 1;
            if idx[k] < GL3.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// `E(b)` for each width, with the first `M − a` coordinates transverse.
pub fn ulam_error_scaling<F: Fn(&[f64]) -> f64>(
    a_dim: usize,
    m_dim: usize,
    widths: &[f64],
    phi: F,
) -> Result<ScalingReport> {
    if m_dim == 0 || m_dim > MAX_DIM || a_dim > m_dim {
        return Err(Error::DimensionCap(format!(
            "error scaling supports a ≤ M ≤ {MAX_DIM}; got a = {a_dim}, M = {m_dim}"
        )));
    }
    let s = m_dim - a_dim;
    let rows: Vec<ScalingRow> = widths
        .iter()
        .map(|&b| {
            let mut lo = vec![-0.5; m_dim];
            let mut hi = vec![0.5; m_dim];
            for k in 0..s {
                lo[k] = -0.5 * b;
                hi[k] = 0.5 * b;
            }
            let smeared = integrate(&lo, &hi, &phi) / b.powi(s as i32);
            let exact = integrate(&lo[s..], &hi[s..], |y| {
                let mut x = vec![0.0; m_dim];
                x[s..].copy_from_slice(y);
                phi(&x)
            });
            ScalingRow {
                b,
                error: smeared - exact,
            }
        })
        .collect();
    let bs: Vec<f64> = rows.iter().map(|r| r.b).collect();
    let es: Vec<f64> = rows.iter().map(|r| r.error.abs()).collect();
    let slope = if es.iter().all(|e| *e > 1e-300) && rows.len() >= 2 {
        loglog_slope(&bs, &es)
    } else {
        f64::NAN
    };
    Ok(ScalingReport { rows, slope })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn widths() -> Vec<f64> {
        (1..=6).map(|k| 0.5f64.powi(k)).collect()
    }

    fn norm2(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn quadratic_error_is_b_squared_over_twelve() {
        for (a, m) in [(1, 2), (0, 2), (1, 3), (2, 3)] {
            let r = ulam_error_scaling(a, m, &widths(), norm2).unwrap();
            for row in &r.rows {
                let want = (m - a) as f64 * row.b * row.b / 12.0;
                assert!((row.error - want).abs() < 1e-14, "{row:?}");
            }
            assert!((r.slope - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn linear_observable_has_no_error() {
        let r = ulam_error_scaling(1, 2, &widths(), |x| 3.0 * x[0] - x[1] + 0.5).unwrap();
        assert!(r.rows.iter().all(|row| row.error.abs() < 1e-15));
    }

    #[test]
    fn no_transverse_direction() {
        let r = ulam_error_scaling(2, 2, &widths(), norm2).unwrap();
        assert!(r.rows.iter().all(|row| row.error.abs() < 1e-15));
    }

    #[test]
    fn dimension_cap() {
        assert!(ulam_error_scaling(1, 4, &widths(), norm2).is_err());
    }
}
