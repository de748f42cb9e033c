//! Truncated-sum evaluation of `δL^uσ/σ`:
//! `−δL^uσ/σ = div^v X − Σ_{m=1}^{T} (div^v f_*)_{−m} f_*^{−m} X^u + Σ_{n=0}^{T} (div^v f_*)_n f_*^n X^s`.
//!
//! `X^s` is pushed forward with stable re-projection each step; `X^u` is
//! pulled back as frame coefficients through `R⁻¹`, so no inverse
//! Jacobians are needed.

use crate::divergence::{div_v_fstar, div_v_x};
use crate::error::{Error, Result};
use crate::frames::Frames;
use crate::linalg::{a_x, at_x, dot, solve_upper};
use crate::orbit::OrbitData;
use crate::systems::SystemDef;
use std::ops::Range;

/// `δL^uσ/σ(x_k)` for each `k` in `points`, truncated at `t` terms per side.
pub fn expanded_divergence(
    sys: &SystemDef,
    orbit: &OrbitData,
    frames: &Frames,
    t: usize,
    points: Range<usize>,
) -> Result<Vec<f64>> {
    let win = frames.window();
    if points.start < win.start + t || points.end + t + 1 > win.end {
        return Err(Error::Window(format!(
            "points {points:?} with {t} terms each side exceed converged window {win:?}"
        )));
    }
    let (m, u) = (frames.dim(), frames.udim());
    let mut xk = vec![0.0; m];
    let mut c = vec![0.0; u];
    let mut v = vec![0.0; m];
    let mut tmp = vec![0.0; m];
    let mut w = vec![0.0; m];
    let mut coef = vec![0.0; u];
    let out = points
        .map(|k| {
            sys.pert(orbit.point(k), &mut xk);
            at_x(frames.dual_t(k), &xk, m, u, &mut c);
            a_x(frames.q(k), &c, m, u, &mut tmp);
            for i in 0..m {
                v[i] = xk[i] - tmp[i];
            }
            let mut stable = 0.0;
            for n in 0..=t {
                div_v_fstar(sys, orbit, frames, k + n, &mut w);
                stable += dot(&w, &v);
                sys.jvp(orbit.point(k + n), &v, &mut tmp);
                v.copy_from_slice(&tmp);
                frames.project_vector_stable(k + n + 1, &mut v, &mut coef);
            }
            let mut unstable = 0.0;
            for j in 1..=t {
                solve_upper(frames.r(k - j), u, &mut c);
                a_x(frames.q(k - j), &c, m, u, &mut tmp);
                div_v_fstar(sys, orbit, frames, k - j, &mut w);
                unstable += dot(&w, &tmp);
            }
            -(div_v_x(sys, orbit, frames, k) - unstable + stable)
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::FrameOptions;
    use crate::orbit::{generate_orbit, OrbitStart};
    use crate::systems::make_builtin;
    use std::collections::BTreeMap;

    #[test]
    fn affine_map_reduces_to_div_v_x() {
        let sys = make_builtin("catmap", &BTreeMap::new()).unwrap();
        let o = generate_orbit(&sys, OrbitStart::Seed(1), 100, 2000).unwrap();
        let fr = Frames::compute(&sys, &o, FrameOptions::seeded(1)).unwrap();
        let s = fr.window().start + 40;
        for t in [5, 30] {
            let e = expanded_divergence(&sys, &o, &fr, t, s..s + 100).unwrap();
            for (i, v) in e.iter().enumerate() {
                assert_eq!(*v, -div_v_x(&sys, &o, &fr, s + i));
            }
        }
    }

    #[test]
    fn window_is_checked() {
        let sys = make_builtin("catmap", &BTreeMap::new()).unwrap();
        let o = generate_orbit(&sys, OrbitStart::Seed(1), 100, 2000).unwrap();
        let fr = Frames::compute(&sys, &o, FrameOptions::seeded(1)).unwrap();
        let s = fr.window().start;
        assert!(expanded_divergence(&sys, &o, &fr, 30, s..s + 10).is_err());
    }
}
