//! Unstable frame (forward QR recursion) and adjoint unstable co-frame
//! (backward QR recursion on covectors), plus the oblique projections they
//! define.
//!
//! Blocks are column-major. For step `n`:
//! - `Q_n` (`M×u`) has orthonormal columns spanning the unstable subspace and
//!   `f_* Q_n = Q_{n+1} R_n` with `R_n` upper triangular, positive diagonal.
//! - `A_n` (`u×M`) has orthonormal rows spanning the annihilator of the stable
//!   subspace; stored transposed. `A_{n+1} f_*(x_n) = R̃_n A_n`, `R̃_n` lower
//!   triangular (stored as its transpose).
//! - `Ẽ_n = (A_n Q_n)⁻¹ A_n` is the co-basis dual to `Q_n`; stored transposed.

use crate::error::{Error, Result};
use crate::linalg::{at_b, qr_positive};
use crate::orbit::OrbitData;
use crate::systems::SystemDef;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::ops::Range;

const MIN_WARM: usize = 100;
const RANK_TOL: f64 = 1e-13;
const COND_MAX: f64 = 1e8;

#[derive(Clone, Copy, Debug, Default)]
pub struct FrameOptions {
    pub seed: u64,
    /// Overrides the automatic forward warm-up length.
    pub warmup: Option<usize>,
    /// Overrides the automatic backward warm-up length.
    pub warmdown: Option<usize>,
}

impl FrameOptions {
    pub fn seeded(seed: u64) -> Self {
        FrameOptions {
            seed,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct TangentFrame {
    m: usize,
    u: usize,
    q: Vec<f64>,
    r: Vec<f64>,
    log_j: Vec<f64>,
    /// Leading steps whose `Q_n` has not yet converged.
    pub warmup: usize,
}

impl TangentFrame {
    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn udim(&self) -> usize {
        self.u
    }

    pub fn steps(&self) -> usize {
        self.r.len() / (self.u * self.u)
    }

    #[inline]
    pub fn q(&self, n: usize) -> &[f64] {
        let s = self.m * self.u;
        &self.q[n * s..(n + 1) * s]
    }

    #[inline]
    pub fn r(&self, n: usize) -> &[f64] {
        let s = self.u * self.u;
        &self.r[n * s..(n + 1) * s]
    }

    /// `log |f_* e|` at `x_n`, i.e. `log det R_n`.
    #[inline]
    pub fn log_j(&self, n: usize) -> f64 {
        self.log_j[n]
    }
}

#[derive(Clone, Debug)]
pub struct AdjointFrame {
    m: usize,
    u: usize,
    at: Vec<f64>,
    back_r: Vec<f64>,
    dual_t: Vec<f64>,
    /// Trailing steps whose `A_n` has not yet converged.
    pub warmdown: usize,
    /// Largest condition number of `A_n Q_n` inside the converged window.
    pub max_condition: f64,
}

impl AdjointFrame {
    /// `A_nᵀ` (`M×u`).
    #[inline]
    pub fn a_t(&self, n: usize) -> &[f64] {
        let s = self.m * self.u;
        &self.at[n * s..(n + 1) * s]
    }

    /// `R̃_nᵀ` (upper triangular, `u×u`).
    #[inline]
    pub fn back_r_t(&self, n: usize) -> &[f64] {
        let s = self.u * self.u;
        &self.back_r[n * s..(n + 1) * s]
    }

    /// `Ẽ_nᵀ` (`M×u`); column `i` is the covector `ε^i` at `x_n`.
    #[inline]
    pub fn dual_t(&self, n: usize) -> &[f64] {
        let s = self.m * self.u;
        &self.dual_t[n * s..(n + 1) * s]
    }
}

/// Forward and backward frames on one orbit.
#[derive(Clone, Debug)]
pub struct Frames {
    pub tangent: TangentFrame,
    pub adjoint: AdjointFrame,
}

impl Frames {
    pub fn compute(sys: &SystemDef, orbit: &OrbitData, opts: FrameOptions) -> Result<Frames> {
        let tangent = push_unstable(sys, orbit, opts)?;
        let adjoint = pull_adjoint(sys, orbit, &tangent, opts)?;
        Ok(Frames { tangent, adjoint })
    }

    pub fn dim(&self) -> usize {
        self.tangent.m
    }

    pub fn udim(&self) -> usize {
        self.tangent.u
    }

    /// Indices `n` with converged `Q_n` and `Ẽ_n`.
    pub fn window(&self) -> Range<usize> {
        self.tangent.warmup..self.tangent.steps() + 1 - self.adjoint.warmdown
    }

    #[inline]
    pub fn q(&self, n: usize) -> &[f64] {
        self.tangent.q(n)
    }

    #[inline]
    pub fn r(&self, n: usize) -> &[f64] {
        self.tangent.r(n)
    }

    #[inline]
    pub fn dual_t(&self, n: usize) -> &[f64] {
        self.adjoint.dual_t(n)
    }

    /// Oblique split `v = v_u + v_s` with `v_u = Q_n Ẽ_n v`.
    pub fn project(&self, n: usize, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (m, u) = (self.dim(), self.udim());
        let mut coef = vec![0.0; u];
        crate::linalg::at_x(self.dual_t(n), v, m, u, &mut coef);
        let mut vu = vec![0.0; m];
        crate::linalg::a_x(self.q(n), &coef, m, u, &mut vu);
        let vs = v.iter().zip(&vu).map(|(a, b)| a - b).collect();
        (vu, vs)
    }

    /// Adjoint projection `𝒫^s η = η - (η Q_n) Ẽ_n`, in place.
    pub fn project_covector_stable(&self, n: usize, eta: &mut [f64], coef: &mut [f64]) {
        let (m, u) = (self.dim(), self.udim());
        crate::linalg::at_x(self.q(n), eta, m, u, coef);
        let et = self.dual_t(n);
        for i in 0..u {
            crate::linalg::axpy(-coef[i], &et[i * m..(i + 1) * m], eta);
        }
    }

    /// Forward projection `P^s v = v - Q_n Ẽ_n v`, in place.
    pub fn project_vector_stable(&self, n: usize, v: &mut [f64], coef: &mut [f64]) {
        let (m, u) = (self.dim(), self.udim());
        crate::linalg::at_x(self.dual_t(n), v, m, u, coef);
        let q = self.q(n);
        for i in 0..u {
            crate::linalg::axpy(-coef[i], &q[i * m..(i + 1) * m], v);
        }
    }
}

fn random_orthonormal(m: usize, u: usize, seed: u64) -> Vec<f64> {
    if m == u {
        // The whole space is unstable; the identity is the canonical frame.
        let mut id = vec![0.0; m * m];
        (0..m).for_each(|i| id[i + i * m] = 1.0);
        return id;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a: Vec<f64> = (0..m * u).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut r = vec![0.0; u * u];
    qr_positive(&mut a, m, u, &mut r);
    a
}

fn warm_length(log_diag_mean: &[f64]) -> usize {
    let lam = log_diag_mean.iter().cloned().fold(f64::INFINITY, f64::min);
    if lam > 0.0 && lam.is_finite() {
        MIN_WARM.max((20.0 / lam).ceil() as usize)
    } else {
        MIN_WARM
    }
}

/// Pushes a random orthonormal `M×u` block forward along the orbit with QR
/// at every step.
pub fn push_unstable(
    sys: &SystemDef,
    orbit: &OrbitData,
    opts: FrameOptions,
) -> Result<TangentFrame> {
    let (m, u) = (sys.dim(), sys.udim());
    let n_steps = orbit.steps();
    let blk = m * u;
    let mut q = vec![0.0; (n_steps + 1) * blk];
    let mut r = vec![0.0; n_steps * u * u];
    let mut log_j = vec![0.0; n_steps];
    q[..blk].copy_from_slice(&random_orthonormal(m, u, opts.seed));
    for n in 0..n_steps {
        let x = orbit.point(n);
        let (head, tail) = q.split_at_mut((n + 1) * blk);
        let cur = &head[n * blk..];
        let next = &mut tail[..blk];
        for j in 0..u {
            sys.jvp(x, &cur[j * m..(j + 1) * m], &mut next[j * m..(j + 1) * m]);
        }
        let rn = &mut r[n * u * u..(n + 1) * u * u];
        let d = qr_positive(next, m, u, rn);
        if !(d > RANK_TOL) {
            return Err(Error::RankCollapse { step: n, diag: d });
        }
        log_j[n] = (0..u).map(|i| rn[i + i * u].ln()).sum();
    }
    let mut tf = TangentFrame {
        m,
        u,
        q,
        r,
        log_j,
        warmup: 0,
    };
    tf.warmup = match opts.warmup {
        Some(w) => w,
        None => warm_length(&lyapunov_exponents(&tf)),
    };
    Ok(tf)
}

/// Pulls a random orthonormal `u×M` co-frame backward from the end of the
/// orbit with QR at every step, then forms the dual co-basis `Ẽ_n`.
pub fn pull_adjoint(
    sys: &SystemDef,
    orbit: &OrbitData,
    tangent: &TangentFrame,
    opts: FrameOptions,
) -> Result<AdjointFrame> {
    let (m, u) = (sys.dim(), sys.udim());
    let n_steps = orbit.steps();
    let blk = m * u;
    let mut at = vec![0.0; (n_steps + 1) * blk];
    let mut back_r = vec![0.0; n_steps * u * u];
    at[n_steps * blk..].copy_from_slice(&random_orthonormal(m, u, opts.seed ^ 0x5bd1_e995));
    for n in (0..n_steps).rev() {
        let x = orbit.point(n);
        let (head, tail) = at.split_at_mut((n + 1) * blk);
        let cur = &mut head[n * blk..];
        let later = &tail[..blk];
        for j in 0..u {
            sys.vjp(x, &later[j * m..(j + 1) * m], &mut cur[j * m..(j + 1) * m]);
        }
        let rn = &mut back_r[n * u * u..(n + 1) * u * u];
        let d = qr_positive(cur, m, u, rn);
        if !(d > RANK_TOL) {
            return Err(Error::RankCollapse { step: n, diag: d });
        }
    }

    let warmdown = match opts.warmdown {
        Some(w) => w,
        None => {
            let mut sums = vec![0.0; u];
            for n in 0..n_steps {
                for (i, s) in sums.iter_mut().enumerate() {
                    *s += back_r[n * u * u + i + i * u].ln();
                }
            }
            sums.iter_mut().for_each(|s| *s /= n_steps as f64);
            warm_length(&sums)
        }
    };
    let lo = tangent.warmup;
    let hi = (n_steps + 1).saturating_sub(warmdown);
    if lo >= hi {
        return Err(Error::Window(format!(
            "orbit of {n_steps} steps is shorter than warm-up {lo} plus warm-down {warmdown}"
        )));
    }

    let mut dual_t = vec![f64::NAN; (n_steps + 1) * blk];
    let mut c = vec![0.0; u * u];
    let mut max_condition: f64 = 1.0;
    for n in 0..=n_steps {
        let a_t = &at[n * blk..(n + 1) * blk];
        at_b(a_t, tangent.q(n), m, u, u, &mut c);
        let cm = nalgebra::DMatrix::from_column_slice(u, u, &c);
        let inside = n >= lo && n < hi;
        let cond = if u == 1 {
            1.0 / c[0].abs()
        } else {
            let sv = cm.clone().svd(false, false).singular_values;
            sv.max() / sv.min()
        };
        if !(cond <= COND_MAX) {
            if inside {
                return Err(Error::NearTangency { step: n, cond });
            }
            continue;
        }
        if inside {
            max_condition = max_condition.max(cond);
        }
        let Some(cinv) = cm.try_inverse() else {
            continue;
        };
        // Ẽᵀ = Aᵀ C⁻ᵀ, column j = Σ_k Aᵀ[:, k] · C⁻¹[j, k]
        let out = &mut dual_t[n * blk..(n + 1) * blk];
        out.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..u {
            for k in 0..u {
                let s = cinv[(j, k)];
                let (src, dst) = (&a_t[k * m..(k + 1) * m], &mut out[j * m..(j + 1) * m]);
                crate::linalg::axpy(s, src, dst);
            }
        }
    }

    Ok(AdjointFrame {
        m,
        u,
        at,
        back_r,
        dual_t,
        warmdown,
        max_condition,
    })
}

/// Time averages of `log diag R_n` over the steps after warm-up.
pub fn lyapunov_exponents(tf: &TangentFrame) -> Vec<f64> {
    let u = tf.u;
    let n_steps = tf.steps();
    let start = tf.warmup.min(n_steps.saturating_sub(1));
    let mut sums = vec![0.0; u];
    for n in start..n_steps {
        let r = tf.r(n);
        for (i, s) in sums.iter_mut().enumerate() {
            *s += r[i + i * u].ln();
        }
    }
    let count = (n_steps - start) as f64;
    sums.into_iter().map(|s| s / count).collect()
}

/// Largest principal-angle sine between `span(A)` and `span(B)`, both with
/// orthonormal columns: `‖(I - BBᵀ) A‖₂`.
pub fn subspace_distance(a: &[f64], b: &[f64], m: usize, u: usize) -> f64 {
    let mut c = vec![0.0; u * u];
    at_b(b, a, m, u, u, &mut c);
    let mut resid = a.to_vec();
    for j in 0..u {
        for k in 0..u {
            let s = c[k + j * u];
            crate::linalg::axpy(-s, &b[k * m..(k + 1) * m], &mut resid[j * m..(j + 1) * m]);
        }
    }
    nalgebra::DMatrix::from_column_slice(m, u, &resid)
        .svd(false, false)
        .singular_values
        .max()
}
