//! Adjoint shadowing `𝒮` and forward shadowing `S` by split-propagate:
//! stable parts are propagated in their contracting direction with
//! re-projection every step, unstable parts as `u` coefficients in the
//! frame propagated with the inverse triangular factors.

use crate::error::{Error, Result};
use crate::frames::{lyapunov_exponents, Frames};
use crate::linalg::{a_x, at_x, axpy, norm, solve_upper, solve_upper_transpose};
use crate::orbit::OrbitData;
use crate::series::{Series, SeriesLabel};
use crate::systems::SystemDef;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::ops::Range;

/// Steps discarded at each end of a shadowing window.
pub const DEFAULT_MARGIN: usize = 200;

#[derive(Clone, Debug)]
pub struct Shadow {
    /// The solution on the interior window.
    pub series: Series,
    /// Bound on the relative truncation error from the finite window,
    /// from measured contraction rates.
    pub tail_bound: f64,
}

fn check_window(frames: &Frames, range: &Range<usize>, margin: usize) -> Result<Range<usize>> {
    let w = frames.window();
    if range.start < w.start || range.end > w.end {
        return Err(Error::Window(format!(
            "input series {range:?} extends beyond converged frames {w:?}"
        )));
    }
    if margin == 0 || range.len() <= 2 * margin {
        return Err(Error::Window(format!(
            "series of length {} does not exceed twice the margin {margin}",
            range.len()
        )));
    }
    Ok(range.start + margin..range.end - margin)
}

fn unstable_tail(frames: &Frames, margin: usize) -> f64 {
    let lam = lyapunov_exponents(&frames.tangent)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    (-lam * margin as f64).exp()
}

/// `ν = 𝒮(ω)`: the bounded solution of `ν_m = f^* ν_{m+1} + ω_m`, reported on
/// `[a + margin, b - margin)` where `[a, b)` is the range of `ω`.
pub fn adjoint_shadow(
    sys: &SystemDef,
    orbit: &OrbitData,
    frames: &Frames,
    omega: &Series,
    margin: usize,
) -> Result<Shadow> {
    let range = omega.range();
    let interior = check_window(frames, &range, margin)?;
    let (m, u) = (frames.dim(), frames.udim());
    let mut out = Series::zeros(SeriesLabel::Shadow, m, interior.clone());
    let mut coef = vec![0.0; u];

    // Stable sum, backward: s_m = 𝒫^s(ω_m + f^* s_{m+1}).
    let mut s = omega.get(range.end - 1).to_vec();
    frames.project_covector_stable(range.end - 1, &mut s, &mut coef);
    let mut pulled = vec![0.0; m];
    for n in (range.start..range.end - 1).rev() {
        sys.vjp(orbit.point(n), &s, &mut pulled);
        for (si, (p, w)) in s.iter_mut().zip(pulled.iter().zip(omega.get(n))) {
            *si = p + w;
        }
        frames.project_covector_stable(n, &mut s, &mut coef);
        if interior.contains(&n) {
            out.get_mut(n).copy_from_slice(&s);
        }
    }

    // Unstable sum, forward in coefficients: c_{m+1} = (c_m + ω_m Q_m) R_m⁻¹.
    let mut c = vec![0.0; u];
    for n in range.start..interior.end {
        if n >= interior.start {
            let nu = out.get_mut(n);
            let et = frames.dual_t(n);
            for i in 0..u {
                axpy(-c[i], &et[i * m..(i + 1) * m], nu);
            }
        }
        at_x(frames.q(n), omega.get(n), m, u, &mut coef);
        for (ci, w) in c.iter_mut().zip(&coef) {
            *ci += w;
        }
        solve_upper_transpose(frames.r(n), u, &mut c);
    }
    if !out.is_finite() {
        return Err(Error::NonFinite {
            step: interior.start,
        });
    }

    let stable = stable_covector_contraction(sys, orbit, frames, range.end - 1, margin);
    Ok(Shadow {
        series: out,
        tail_bound: unstable_tail(frames, margin).max(stable),
    })
}

/// `v = S(Y)`: the bounded solution of `v_{m+1} = f_* v_m + Y_{m+1}`, reported
/// on `[a + margin, b - margin)` where `[a, b)` is the range of `Y`.
pub fn forward_shadow(
    sys: &SystemDef,
    orbit: &OrbitData,
    frames: &Frames,
    y: &Series,
    margin: usize,
) -> Result<Shadow> {
    let range = y.range();
    let interior = check_window(frames, &range, margin)?;
    let (m, u) = (frames.dim(), frames.udim());
    let mut out = Series::zeros(SeriesLabel::Shadow, m, interior.clone());
    let mut coef = vec![0.0; u];

    // Stable sum, forward: σ_m = P^s(f_* σ_{m-1} + Y_m).
    let mut sigma = y.get(range.start).to_vec();
    frames.project_vector_stable(range.start, &mut sigma, &mut coef);
    let mut pushed = vec![0.0; m];
    for n in range.start + 1..interior.end {
        sys.jvp(orbit.point(n - 1), &sigma, &mut pushed);
        for (si, (p, w)) in sigma.iter_mut().zip(pushed.iter().zip(y.get(n))) {
            *si = p + w;
        }
        frames.project_vector_stable(n, &mut sigma, &mut coef);
        if interior.contains(&n) {
            out.get_mut(n).copy_from_slice(&sigma);
        }
    }

    // Unstable sum, backward in coefficients: d_m = R_m⁻¹(d_{m+1} + Ẽ_{m+1} Y_{m+1}).
    let mut d = vec![0.0; u];
    let mut tau = vec![0.0; m];
    for n in (interior.start..range.end - 1).rev() {
        at_x(frames.dual_t(n + 1), y.get(n + 1), m, u, &mut coef);
        for (di, w) in d.iter_mut().zip(&coef) {
            *di += w;
        }
        solve_upper(frames.r(n), u, &mut d);
        if interior.contains(&n) {
            a_x(frames.q(n), &d, m, u, &mut tau);
            for (v, t) in out.get_mut(n).iter_mut().zip(&tau) {
                *v -= t;
            }
        }
    }
    if !out.is_finite() {
        return Err(Error::NonFinite {
            step: interior.start,
        });
    }

    let stable = stable_vector_contraction(sys, orbit, frames, range.start, margin);
    Ok(Shadow {
        series: out,
        tail_bound: unstable_tail(frames, margin).max(stable),
    })
}

/// `max_m |ν_m − f^* ν_{m+1} − ω_m|` over the range of `ν` (last step excluded).
pub fn adjoint_residual(sys: &SystemDef, orbit: &OrbitData, omega: &Series, nu: &Series) -> f64 {
    let m = nu.dim();
    let mut pulled = vec![0.0; m];
    let r = nu.range();
    (r.start..r.end - 1)
        .map(|n| {
            sys.vjp(orbit.point(n), nu.get(n + 1), &mut pulled);
            (0..m)
                .map(|i| (nu.get(n)[i] - pulled[i] - omega.get(n)[i]).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// `max_m |v_{m+1} − f_* v_m − Y_{m+1}|` over the range of `v`.
pub fn forward_residual(sys: &SystemDef, orbit: &OrbitData, y: &Series, v: &Series) -> f64 {
    let m = v.dim();
    let mut pushed = vec![0.0; m];
    let r = v.range();
    (r.start..r.end - 1)
        .map(|n| {
            sys.jvp(orbit.point(n), v.get(n), &mut pushed);
            (0..m)
                .map(|i| (v.get(n + 1)[i] - pushed[i] - y.get(n + 1)[i]).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

fn random_unit(m: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    v
}

/// Contraction of a stable covector pulled back `steps` steps from `end`.
fn stable_covector_contraction(
    sys: &SystemDef,
    orbit: &OrbitData,
    frames: &Frames,
    end: usize,
    steps: usize,
) -> f64 {
    let (m, u) = (frames.dim(), frames.udim());
    if m == u {
        return 0.0;
    }
    let mut coef = vec![0.0; u];
    let mut eta = random_unit(m, 0x5eed);
    frames.project_covector_stable(end, &mut eta, &mut coef);
    let start = norm(&eta);
    let mut tmp = vec![0.0; m];
    for n in (end - steps..end).rev() {
        sys.vjp(orbit.point(n), &eta, &mut tmp);
        eta.copy_from_slice(&tmp);
        frames.project_covector_stable(n, &mut eta, &mut coef);
    }
    norm(&eta) / start
}

/// Contraction of a stable vector pushed forward `steps` steps from `start`.
fn stable_vector_contraction(
    sys: &SystemDef,
    orbit: &OrbitData,
    frames: &Frames,
    start: usize,
    steps: usize,
) -> f64 {
    let (m, u) = (frames.dim(), frames.udim());
    if m == u {
        return 0.0;
    }
    let mut coef = vec![0.0; u];
    let mut v = random_unit(m, 0x5eed);
    frames.project_vector_stable(start, &mut v, &mut coef);
    let v0 = norm(&v);
    let mut tmp = vec![0.0; m];
    for n in start..start + steps {
        sys.jvp(orbit.point(n), &v, &mut tmp);
        v.copy_from_slice(&tmp);
        frames.project_vector_stable(n + 1, &mut v, &mut coef);
    }
    norm(&v) / v0
}
