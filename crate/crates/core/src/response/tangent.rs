//! The forward (tangent) formula for the unstable contribution:
//! `⟨r_n, e_n⟩` averaged along the orbit, where `r` is a derivative of the
//! unstable cube propagated by the renormalized second-order tangent
//! equation `r_{n+1} = f_* P^⊥ r_n / J + (∇_{ṽ_n} f_*) e_n / J + (φ_W ∇_e X)_{n+1}`
//! with `ṽ = S(φ_W X)`.
//!
//! `r = Σ_i e_1∧…∧r_i∧…∧e_u` is stored as the `M×u` block of replaced
//! columns against the orthonormal frame `Q_n`. Pushing one replaced column
//! `w` through `f_*` and dividing by `J = det R_n` gives
//! `Σ_k q'_1∧…∧(f_* w R_n⁻¹)_k∧…∧q'_u`, so the whole block maps as
//! `cols ↦ f_* cols R_n⁻¹`.

use super::Engine;
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::linalg::{a_x, at_b, at_x, right_solve_upper};
use crate::series::{Series, SeriesLabel};
use crate::shadowing::forward_shadow;
use crate::stats::{batch_means, Estimate};
use serde::{Deserialize, Serialize};

/// `U.C.(W)` from the tangent formula, on the engine's sample window.
///
/// The orbit average of `⟨r, e⟩` is `ρ(φ_W div^u_σ X^u)`, which is
/// `−ρ(φ_W δL^uσ/σ)`; the sign is flipped so the result is directly
/// comparable with the adjoint `U.C.(W)`.
pub fn tangent_unstable_contribution(
    engine: &Engine,
    pert: &VectorField,
    w: usize,
) -> Result<Estimate> {
    let readout = cube_readout(engine, pert, w)?;
    let e = batch_means(&readout);
    Ok(Estimate::new(-e.value, e.stderr))
}

/// `⟨r_n, e_n⟩` on the sample window.
pub fn cube_readout(engine: &Engine, pert: &VectorField, w: usize) -> Result<Vec<f64>> {
    let sys = engine.system();
    let orbit = engine.orbit();
    let frames = engine.frames();
    let (m, u) = (frames.dim(), frames.udim());
    let t = engine.options().margin;
    let win = frames.window();
    let base = win.start..win.end - 1;
    if base.start < w || base.end + w > orbit.steps() + 1 {
        return Err(Error::Window(format!(
            "W = {w} does not fit the converged window"
        )));
    }
    let centered = engine.options().centered;

    let phiw = engine.phi_w_on(w, centered, base.clone());
    let y = Series::from_fn(SeriesLabel::Custom, m, base.clone(), |n, out| {
        pert.value_into(orbit.point(n), out);
        let p = phiw[n - base.start];
        out.iter_mut().for_each(|v| *v *= p);
    });
    let v = forward_shadow(sys, orbit, frames, &y, t)?.series;
    drop(y);

    let sample = engine.sample();
    let start = v.range().start;
    let mut r = vec![0.0; m * u];
    let mut next = vec![0.0; m * u];
    let mut c = vec![0.0; u * u];
    let mut tmp = vec![0.0; m];
    let mut proj = vec![0.0; m];
    let mut out = Vec::with_capacity(sample.len());
    for n in start..sample.end {
        if n >= sample.start {
            at_b(frames.q(n), &r, m, u, u, &mut c);
            out.push((0..u).map(|i| c[i + i * u]).sum());
        }
        if n + 1 == sample.end {
            break;
        }
        let x = orbit.point(n);
        let q = frames.q(n);
        // P^⊥ on each replaced column.
        for i in 0..u {
            let col = &mut r[i * m..(i + 1) * m];
            at_x(q, col, m, u, &mut c[..u]);
            a_x(q, &c[..u], m, u, &mut proj);
            col.iter_mut().zip(&proj).for_each(|(a, b)| *a -= b);
        }
        // f_* r + (∇_ṽ f_*) e, then ·R_n⁻¹.
        for i in 0..u {
            let dst = &mut next[i * m..(i + 1) * m];
            sys.jvp(x, &r[i * m..(i + 1) * m], dst);
            sys.hvp(x, &q[i * m..(i + 1) * m], v.get(n), &mut tmp);
            dst.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
        }
        right_solve_upper(&mut next, m, u, frames.r(n));
        // (φ_W ∇_e X) at n + 1.
        let p = phiw[n + 1 - base.start];
        let (x1, q1) = (orbit.point(n + 1), frames.q(n + 1));
        for i in 0..u {
            pert.derivative_into(x1, &q1[i * m..(i + 1) * m], &mut tmp);
            let dst = &mut next[i * m..(i + 1) * m];
            dst.iter_mut().zip(&tmp).for_each(|(a, b)| *a += p * b);
        }
        std::mem::swap(&mut r, &mut next);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equivalence {
    pub w: usize,
    pub uc_tangent: Estimate,
    pub uc_adjoint: Estimate,
    pub defect: f64,
    pub combined_stderr: f64,
}

impl Equivalence {
    pub fn passes(&self, k: f64) -> bool {
        self.defect <= k * self.combined_stderr
    }
}

/// Tangent versus adjoint `U.C.(W)` on one orbit with shared frames.
pub fn equivalence_check(engine: &Engine, pert: &VectorField, w: usize) -> Result<Equivalence> {
    let uc_tangent = tangent_unstable_contribution(engine, pert, w)?;
    let delta = engine.density_ratio_series(pert);
    let uc_adjoint = engine.uc_sweep(&delta, w, engine.options().centered)[w];
    Ok(Equivalence {
        w,
        uc_tangent,
        uc_adjoint,
        defect: (uc_tangent.value - uc_adjoint.value).abs(),
        combined_stderr: uc_tangent.combined_stderr(&uc_adjoint),
    })
}
