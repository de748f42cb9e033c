//! Grid check of the mass continuity equation `−δL h = div(hX)` for the
//! near-identity family `x ↦ x + γX(x)` on the circle.

use super::ulam::build_from_lift;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::stats::loglog_slope;
use serde::{Deserialize, Serialize};

/// 5-point Gauss–Legendre nodes and weights on `[-1, 1]`.
const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityRow {
    pub bins: usize,
    /// `max_i |δL h / width − (−(hX)')(midpoint_i)|`.
    pub defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub rows: Vec<ContinuityRow>,
    /// Fitted order of the defect in the bin width (NaN if all defects vanish).
    pub order: f64,
    pub monotone: bool,
}

/// Compares the Ulam finite difference of `h` under `x ↦ x + γX(x)` with
/// `−(hX)'` at bin midpoints, for each grid in `bins`. The `γ` step is
/// `delta_frac` times the bin width.
pub fn continuity_check(
    h: &ScalarField,
    x: &ScalarField,
    bins: &[usize],
    delta_frac: f64,
) -> Result<ContinuityReport> {
    if bins.is_empty() || !(delta_frac > 0.0) {
        return Err(Error::Invalid(
            "continuity check needs bins and a positive step".into(),
        ));
    }
    let mut rows = Vec::with_capacity(bins.len());
    for &n in bins {
        let width = 1.0 / n as f64;
        let delta = delta_frac * width;
        let lift = |g: f64| move |t: f64| t + g * x.value(&[t]);
        let plus = build_from_lift(n, lift(delta))?;
        let minus = build_from_lift(n, lift(-delta))?;
        let mass: Vec<f64> = (0..n)
            .map(|i| {
                let c = (i as f64 + 0.5) * width;
                GL5.iter()
                    .map(|(t, w)| w * h.value(&[c + 0.5 * width * t]))
                    .sum::<f64>()
                    * 0.5
                    * width
            })
            .collect();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        plus.push(&mass, &mut a);
        minus.push(&mass, &mut b);
        let defect = (0..n)
            .map(|i| {
                let dl = (a[i] - b[i]) / (2.0 * delta) / width;
                let c = [(i as f64 + 0.5) * width];
                let mut gh = [0.0];
                let mut gx = [0.0];
                h.add_gradient(&c, &mut gh);
                x.add_gradient(&c, &mut gx);
                let div = gh[0] * x.value(&c) + h.value(&c) * gx[0];
                (dl + div).abs()
            })
            .fold(0.0, f64::max);
        rows.push(ContinuityRow { bins: n, defect });
    }
    let widths: Vec<f64> = rows.iter().map(|r| 1.0 / r.bins as f64).collect();
    let defects: Vec<f64> = rows.iter().map(|r| r.defect).collect();
    let order = if defects.iter().all(|d| *d > 0.0) && rows.len() >= 2 {
        loglog_slope(&widths, &defects)
    } else {
        f64::NAN
    };
    let monotone = defects.windows(2).all(|w| w[1] < w[0]);
    Ok(ContinuityReport {
        rows,
        order,
        monotone,
    })
}
