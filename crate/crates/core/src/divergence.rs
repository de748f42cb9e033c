//! Equivariant divergences `div^v X = ε∇_e X` and
//! `div^v f_* = ε₁∇_e f_* / |f_* e|`, and a brute-force wedge-algebra oracle
//! for both.

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::frames::Frames;
use crate::linalg::{a_x, at_x, axpy, det, dot, upper_inverse};
use crate::orbit::OrbitData;
use crate::series::{CovectorSeries, Series, SeriesLabel};
use crate::systems::SystemDef;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::ops::Range;

/// `div^v X(x_n) = tr(Ẽ_n ∇X Q_n)` for the system's perturbation.
pub fn div_v_x(sys: &SystemDef, orbit: &OrbitData, frames: &Frames, n: usize) -> f64 {
    div_v_field(sys.perturbation(), orbit, frames, n)
}

/// `div^v` of an arbitrary vector field at `x_n`.
pub fn div_v_field(field: &VectorField, orbit: &OrbitData, frames: &Frames, n: usize) -> f64 {
    let (m, u) = (frames.dim(), frames.udim());
    let (q, et) = (frames.q(n), frames.dual_t(n));
    let x = orbit.point(n);
    let mut g = [0.0; 64];
    let mut heap = Vec::new();
    let g: &mut [f64] = if m <= g.len() {
        &mut g[..m]
    } else {
        heap.resize(m, 0.0);
        &mut heap
    };
    (0..u)
        .map(|i| {
            field.derivative_into(x, &q[i * m..(i + 1) * m], g);
            dot(&et[i * m..(i + 1) * m], g)
        })
        .sum()
}

/// `div^v f_*` at `x_n` as a covector: `ω(Y) = tr(R_n⁻¹ Ẽ_{n+1} H(Y))` with
/// `H(Y)` the columns `(∇_Y f_*) q_i`. Needs `n` and `n + 1` converged.
pub fn div_v_fstar(sys: &SystemDef, orbit: &OrbitData, frames: &Frames, n: usize, out: &mut [f64]) {
    let (m, u) = (frames.dim(), frames.udim());
    let rinv = upper_inverse(frames.r(n), u);
    let et1 = frames.dual_t(n + 1);
    // Row i of R⁻¹Ẽ_{n+1}, as a covector.
    let mut rows = vec![0.0; m * u];
    for i in 0..u {
        let row = &mut rows[i * m..(i + 1) * m];
        for k in i..u {
            axpy(rinv[i + k * u], &et1[k * m..(k + 1) * m], row);
        }
    }
    let x = orbit.point(n);
    let q = frames.q(n);
    let mut basis = vec![0.0; m];
    let mut h = vec![0.0; m];
    for j in 0..m {
        basis[j] = 1.0;
        let mut s = 0.0;
        for i in 0..u {
            sys.hvp(x, &q[i * m..(i + 1) * m], &basis, &mut h);
            s += dot(&rows[i * m..(i + 1) * m], &h);
        }
        out[j] = s;
        basis[j] = 0.0;
    }
}

/// `div^v f_*` on every index of `range` (each `n + 1` must be converged).
pub fn div_v_fstar_series(
    sys: &SystemDef,
    orbit: &OrbitData,
    frames: &Frames,
    range: Range<usize>,
) -> CovectorSeries {
    Series::from_fn(SeriesLabel::DivVFstar, sys.dim(), range, |n, out| {
        div_v_fstar(sys, orbit, frames, n, out)
    })
}

/// `dΦ(x_n)` on every index of `range`.
pub fn dphi_series(sys: &SystemDef, orbit: &OrbitData, range: Range<usize>) -> CovectorSeries {
    Series::from_fn(SeriesLabel::DPhi, sys.dim(), range, |n, out| {
        sys.dobs(orbit.point(n), out)
    })
}

/// Which contraction the wedge oracle evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WedgeMode {
    DivX,
    DivFstar,
}

#[derive(Clone, Debug, PartialEq)]
pub enum WedgeValue {
    Scalar(f64),
    Covector(Vec<f64>),
}

impl WedgeValue {
    pub fn scalar(&self) -> Option<f64> {
        match self {
            WedgeValue::Scalar(v) => Some(*v),
            WedgeValue::Covector(_) => None,
        }
    }

    pub fn covector(&self) -> Option<&[f64]> {
        match self {
            WedgeValue::Covector(v) => Some(v),
            WedgeValue::Scalar(_) => None,
        }
    }
}

pub const WEDGE_MAX_DIM: usize = 6;
pub const WEDGE_MAX_UDIM: usize = 3;

/// Evaluates the contractions literally as ratios of `u×u` determinants,
/// using a randomly sheared (non-orthonormal) basis `B = Q_n S` of the
/// unstable subspace and the raw co-frame `A_n` (not its dual basis):
///
/// - `ε∇_e X = Σ_i det(A_n [b_1 … ∇_{b_i}X … b_u]) / det(A_n B)`
/// - `ε₁(∇_e f_*)Y / |f_* e| = Σ_i det(A_{n+1} [f_*b_1 … (∇_{b_i}f_*)Y … f_*b_u]) / det(A_{n+1} f_* B)`
pub fn wedge_oracle(
    sys: &SystemDef,
    orbit: &OrbitData,
    frames: &Frames,
    n: usize,
    mode: WedgeMode,
    seed: u64,
) -> Result<WedgeValue> {
    let (m, u) = (frames.dim(), frames.udim());
    if m > WEDGE_MAX_DIM || u > WEDGE_MAX_UDIM {
        return Err(Error::DimensionCap(format!(
            "wedge oracle supports M ≤ {WEDGE_MAX_DIM}, u ≤ {WEDGE_MAX_UDIM}; got M = {m}, u = {u}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shear: Vec<f64> = loop {
        let s: Vec<f64> = (0..u * u)
            .map(|k| if k % (u + 1) == 0 { 1.0 } else { 0.0 } + rng.gen_range(-0.8..0.8))
            .collect();
        if det(&s, u).abs() > 0.1 {
            break s;
        }
    };
    let q = frames.q(n);
    let mut b = vec![0.0; m * u];
    for j in 0..u {
        a_x(
            q,
            &shear[j * u..(j + 1) * u],
            m,
            u,
            &mut b[j * m..(j + 1) * m],
        );
    }
    let x = orbit.point(n);
    let mut tmp = vec![0.0; m];

    // det(A [cols]) for a column-major M×u block and co-frame Aᵀ.
    let cofactor_det = |a_t: &[f64], cols: &[f64]| {
        let mut c = vec![0.0; u * u];
        for j in 0..u {
            at_x(
                a_t,
                &cols[j * m..(j + 1) * m],
                m,
                u,
                &mut c[j * u..(j + 1) * u],
            );
        }
        det(&c, u)
    };

    match mode {
        WedgeMode::DivX => {
            let a_t = frames.adjoint.a_t(n);
            let base = cofactor_det(a_t, &b);
            let mut sum = 0.0;
            for i in 0..u {
                let mut cols = b.clone();
                sys.dpert(x, &b[i * m..(i + 1) * m], &mut tmp);
                cols[i * m..(i + 1) * m].copy_from_slice(&tmp);
                sum += cofactor_det(a_t, &cols);
            }
            Ok(WedgeValue::Scalar(sum / base))
        }
        WedgeMode::DivFstar => {
            let a_t = frames.adjoint.a_t(n + 1);
            let mut jb = vec![0.0; m * u];
            for j in 0..u {
                sys.jvp(x, &b[j * m..(j + 1) * m], &mut jb[j * m..(j + 1) * m]);
            }
            let base = cofactor_det(a_t, &jb);
            let mut out = vec![0.0; m];
            let mut y = vec![0.0; m];
            for (k, o) in out.iter_mut().enumerate() {
                y.iter_mut().for_each(|v| *v = 0.0);
                y[k] = 1.0;
                let mut sum = 0.0;
                for i in 0..u {
                    let mut cols = jb.clone();
                    sys.hvp(x, &b[i * m..(i + 1) * m], &y, &mut tmp);
                    cols[i * m..(i + 1) * m].copy_from_slice(&tmp);
                    sum += cofactor_det(a_t, &cols);
                }
                *o = sum / base;
            }
            Ok(WedgeValue::Covector(out))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{ScalarField, TrigTerm};
    use crate::frames::FrameOptions;
    use crate::orbit::{generate_orbit, OrbitStart};
    use crate::systems::make_builtin;
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    fn setup(name: &str, params: &[(&str, f64)], n: usize) -> (SystemDef, OrbitData, Frames) {
        let p: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let sys = make_builtin(name, &p).unwrap();
        let o = generate_orbit(&sys, OrbitStart::Seed(11), 200, n).unwrap();
        let fr = Frames::compute(&sys, &o, FrameOptions::seeded(7)).unwrap();
        (sys, o, fr)
    }

    #[test]
    fn constant_field_has_zero_divergence() {
        let (sys, o, fr) = setup("solenoid", &[], 1000);
        let sys = sys.with_perturbation(VectorField::constant(&[0.3, -1.0, 2.0]));
        for n in fr.window() {
            assert_eq!(div_v_x(&sys, &o, &fr, n), 0.0);
        }
    }

    #[test]
    fn scalar_case_is_derivative() {
        let (sys, o, fr) = setup("sawtooth", &[("a", 0.1)], 500);
        let sys = sys.with_perturbation(VectorField::new(vec![ScalarField::new(vec![
            TrigTerm::sin(1.0, &[1.0]),
        ])]));
        for n in fr.window() {
            let x = o.point(n)[0];
            assert!((div_v_x(&sys, &o, &fr, n) - 2.0 * PI * (2.0 * PI * x).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn sawtooth_fstar_is_f2_over_f1() {
        let a = 0.1;
        let (sys, o, fr) = setup("sawtooth", &[("a", a)], 500);
        let mut w = [0.0];
        for n in fr.window().start..fr.window().end - 1 {
            let x = o.point(n)[0];
            let f1 = 2.0 + 2.0 * PI * a * (2.0 * PI * x).cos();
            let f2 = -4.0 * PI * PI * a * (2.0 * PI * x).sin();
            div_v_fstar(&sys, &o, &fr, n, &mut w);
            assert!((w[0] - f2 / f1).abs() < 1e-12);
        }
        let (sys, o, fr) = setup("sawtooth", &[("a", 0.0)], 500);
        let n = fr.window().start;
        div_v_fstar(&sys, &o, &fr, n, &mut w);
        assert_eq!(w[0], 0.0);
    }

    #[test]
    fn catmap_closed_form() {
        let (sys, o, fr) = setup("catmap", &[], 1000);
        let sys = sys.with_perturbation(VectorField::new(vec![
            ScalarField::new(vec![TrigTerm::sin(1.0, &[0.0, 1.0])]),
            ScalarField::zero(),
        ]));
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let nrm = (phi * phi + 1.0).sqrt();
        let (v0, v1) = (phi / nrm, 1.0 / nrm);
        let mut w = [0.0; 2];
        for n in fr.window().start..fr.window().end - 1 {
            let z = o.point(n);
            // ∇X v = (2π cos(2πz₂) v₂, 0); ε = vᵀ since A is symmetric.
            let want = v0 * 2.0 * PI * (2.0 * PI * z[1]).cos() * v1;
            let got = div_v_x(&sys, &o, &fr, n);
            assert!((got - want).abs() < 1e-10);
            let orc = wedge_oracle(&sys, &o, &fr, n, WedgeMode::DivX, n as u64).unwrap();
            assert!((orc.scalar().unwrap() - got).abs() < 1e-10);
            div_v_fstar(&sys, &o, &fr, n, &mut w);
            assert_eq!(w, [0.0, 0.0]);
        }
    }

    #[test]
    fn oracle_matches_fast_formulas() {
        for (name, params) in [
            ("sawtooth", vec![("a", 0.12)]),
            ("solenoid", vec![]),
            (
                "coupledcat",
                vec![("k", 2.0), ("mu", 0.2), ("coupling", 0.1)],
            ),
            ("coupledcat", vec![("k", 3.0), ("mu", 0.1)]),
        ] {
            let (sys, o, fr) = setup(name, &params, 1500);
            let m = sys.dim();
            let mut w = vec![0.0; m];
            for n in (fr.window().start..fr.window().end - 1).step_by(37) {
                let fast = div_v_x(&sys, &o, &fr, n);
                for seed in 0..3 {
                    let orc = wedge_oracle(&sys, &o, &fr, n, WedgeMode::DivX, seed).unwrap();
                    assert!((orc.scalar().unwrap() - fast).abs() < 1e-9, "{name} n={n}");
                }
                div_v_fstar(&sys, &o, &fr, n, &mut w);
                let orc = wedge_oracle(&sys, &o, &fr, n, WedgeMode::DivFstar, n as u64).unwrap();
                for (a, b) in orc.covector().unwrap().iter().zip(&w) {
                    assert!((a - b).abs() < 1e-9, "{name} n={n}: {a} vs {b}");
                }
            }
        }
    }

    /// Frames from different initial bases span the same subspace with
    /// different bases; the divergences must not notice.
    #[test]
    fn independent_of_frame_basis() {
        let (sys, o, fr) = setup("coupledcat", &[("k", 2.0), ("mu", 0.2)], 1500);
        let other = Frames::compute(&sys, &o, FrameOptions::seeded(99)).unwrap();
        let (mut w1, mut w2) = (vec![0.0; 4], vec![0.0; 4]);
        let lo = fr.window().start.max(other.window().start);
        let hi = fr.window().end.min(other.window().end) - 1;
        for n in lo..hi {
            assert!((div_v_x(&sys, &o, &fr, n) - div_v_x(&sys, &o, &other, n)).abs() < 1e-9);
            div_v_fstar(&sys, &o, &fr, n, &mut w1);
            div_v_fstar(&sys, &o, &other, n, &mut w2);
            for (a, b) in w1.iter().zip(&w2) {
                assert!((a - b).abs() < 1e-9, "n={n}");
            }
        }
    }

    #[test]
    fn full_dimension_gives_ordinary_divergence() {
        // Uncoupled 1D-in-2D analogue: u = M for the sawtooth.
        let (sys, o, fr) = setup("sawtooth", &[("a", 0.05)], 400);
        let n = fr.window().start + 3;
        let x = o.point(n);
        let mut g = [0.0];
        sys.dpert(x, &[1.0], &mut g);
        let orc = wedge_oracle(&sys, &o, &fr, n, WedgeMode::DivX, 1).unwrap();
        assert!((orc.scalar().unwrap() - g[0]).abs() < 1e-14);
    }

    #[test]
    fn dimension_cap() {
        let (sys, o, fr) = setup("coupledcat", &[("k", 4.0)], 600);
        let n = fr.window().start;
        assert!(matches!(
            wedge_oracle(&sys, &o, &fr, n, WedgeMode::DivX, 0),
            Err(Error::DimensionCap(_))
        ));
    }
}
