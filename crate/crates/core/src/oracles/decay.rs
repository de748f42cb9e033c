//! Relative decay of pushed-forward cube derivatives. For `r` built from
//! replaced columns, `f_*^N r / |f_*^N e| − ε(r) e_N` shrinks like `λ^{2N}`
//! on the cat map (stable rate over unstable rate per step).
//!
//! The gap reported is the norm of that u-vector; its `e_N` component is
//! the inner-product gap, which can vanish identically when the splitting
//! is orthogonal.

use crate::error::{Error, Result};
use crate::frames::Frames;
use crate::linalg::{at_b, right_solve_upper};
use crate::orbit::OrbitData;
use crate::stats::linear_fit;
use crate::systems::SystemDef;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Gaps below this are treated as roundoff and left out of the fit.
const GAP_FLOOR: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub n: usize,
    /// Mean over probes of `log |gap|`.
    pub mean_log_gap: f64,
    pub max_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub rows: Vec<DecayRow>,
    /// Fitted slope of `mean_log_gap` against `N` (NaN when every gap is
    /// at roundoff level).
    pub slope: f64,
}

fn trace_against(a: &[f64], cols: &[f64], m: usize, u: usize) -> f64 {
    let mut c = vec![0.0; u * u];
    at_b(a, cols, m, u, u, &mut c);
    (0..u).map(|i| c[i + i * u]).sum()
}

/// `|Σ_i e_1∧…w_i…∧e_u − ε e|` for columns `w` against the orthonormal
/// frame `q`: the parallel parts give `tr(qᵀw) − ε`, each orthogonal
/// remainder spans its own coordinate u-vector.
fn residual_norm(q: &[f64], w: &[f64], m: usize, u: usize, eps: f64) -> f64 {
    let mut c = vec![0.0; u * u];
    at_b(q, w, m, u, u, &mut c);
    let tr: f64 = (0..u).map(|i| c[i + i * u]).sum();
    let mut perp = 0.0;
    for i in 0..u {
        for k in 0..m {
            let par: f64 = (0..u).map(|j| q[k + j * m] * c[j + i * u]).sum();
            perp += (w[k + i * m] - par).powi(2);
        }
    }
    ((tr - eps).powi(2) + perp).sqrt()
}

/// Gap sequence for `N = 1..=n_max` starting from the replaced columns
/// `cols` (an `M×u` block) at orbit index `n0`.
pub fn gap_sequence(
    sys: &SystemDef,
    orbit: &OrbitData,
    frames: &Frames,
    n0: usize,
    cols: &[f64],
    n_max: usize,
) -> Vec<f64> {
    let (m, u) = (frames.dim(), frames.udim());
    let eps_r = trace_against(frames.dual_t(n0), cols, m, u);
    let mut r = cols.to_vec();
    let mut next = vec![0.0; m * u];
    (0..n_max)
        .map(|k| {
            let n = n0 + k;
            for i in 0..u {
                sys.jvp(
                    orbit.point(n),
                    &r[i * m..(i + 1) * m],
                    &mut next[i * m..(i + 1) * m],
                );
            }
            right_solve_upper(&mut next, m, u, frames.r(n));
            std::mem::swap(&mut r, &mut next);
            residual_norm(frames.q(n + 1), &r, m, u, eps_r)
        })
        .collect()
}

/// Random stable-column probes at random converged indices.
pub fn decay_check(
    sys: &SystemDef,
    orbit: &OrbitData,
    frames: &Frames,
    n_probe: usize,
    n_max: usize,
    seed: u64,
) -> Result<DecayReport> {
    let win = frames.window();
    if n_probe == 0 || n_max == 0 || win.len() <= n_max + 1 {
        return Err(Error::Window(format!(
            "decay check needs n_probe ≥ 1 and a window longer than {n_max}"
        )));
    }
    let (m, u) = (frames.dim(), frames.udim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut logs = vec![0.0; n_max];
    let mut maxes = vec![0.0f64; n_max];
    let mut coef = vec![0.0; u];
    for _ in 0..n_probe {
        let n0 = rng.gen_range(win.start..win.end - n_max - 1);
        let mut cols: Vec<f64> = (0..m * u).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for i in 0..u {
            frames.project_vector_stable(n0, &mut cols[i * m..(i + 1) * m], &mut coef);
        }
        for (k, g) in gap_sequence(sys, orbit, frames, n0, &cols, n_max)
            .into_iter()
            .enumerate()
        {
            logs[k] += g.max(f64::MIN_POSITIVE).ln() / n_probe as f64;
            maxes[k] = maxes[k].max(g);
        }
    }
    let rows: Vec<DecayRow> = (0..n_max)
        .map(|k| DecayRow {
            n: k + 1,
            mean_log_gap: logs[k],
            max_gap: maxes[k],
        })
        .collect();
    let fit: Vec<&DecayRow> = rows
        .iter()
        .filter(|r| r.mean_log_gap > GAP_FLOOR.ln())
        .collect();
    let slope = if fit.len() >= 2 {
        let xs: Vec<f64> = fit.iter().map(|r| r.n as f64).collect();
        let ys: Vec<f64> = fit.iter().map(|r| r.mean_log_gap).collect();
        linear_fit(&xs, &ys).0
    } else {
        f64::NAN
    };
    Ok(DecayReport { rows, slope })
}
