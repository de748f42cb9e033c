//! Linear response by the fast adjoint formula:
//! `δρ̃(Φ) = S.C. + U.C.` with `S.C. = ρ(𝒮(dΦ) X)` and
//! `U.C. = lim_W ρ(φ_W · δL^uσ/σ)`, `δL^uσ/σ = −(div^v X + 𝒮(div^v f_*) X)`.
//!
//! An [`Engine`] holds everything that does not depend on `X` (orbit,
//! frames, `𝒮(div^v f_*)`, `𝒮(dΦ)`), so further perturbations are cheap.

mod report;
pub mod tangent;

pub use report::{Diagnostics, ResponseReport, SweepRow};
pub use tangent::{equivalence_check, tangent_unstable_contribution, Equivalence};

use crate::divergence::{div_v_fstar_series, dphi_series};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::frames::{lyapunov_exponents, FrameOptions, Frames};
use crate::linalg::dot;
use crate::orbit::{generate_orbit_with, OrbitData, OrbitSpec, OrbitStart, DEFAULT_SPINUP};
use crate::series::Series;
use crate::shadowing::{adjoint_residual, adjoint_shadow, Shadow, DEFAULT_MARGIN};
use crate::stats::{batch_means, BatchAccumulator, Estimate};
use crate::systems::SystemDef;
use log::{debug, info};
use rayon::prelude::*;
use std::ops::Range;

pub const DEFAULT_W_MAX: usize = 32;

/// Knobs of the per-orbit pipeline.
#[derive(Clone, Debug)]
pub struct ResponseOptions {
    /// Shadowing truncation margin discarded at each end.
    pub margin: usize,
    /// Fixed `W`; `None` selects the plateau of the sweep.
    pub w: Option<usize>,
    pub w_max: usize,
    /// Center `φ_W` by the empirical mean of `Φ`.
    pub centered: bool,
    pub frames: FrameOptions,
}

impl Default for ResponseOptions {
    fn default() -> Self {
        ResponseOptions {
            margin: DEFAULT_MARGIN,
            w: None,
            w_max: DEFAULT_W_MAX,
            centered: true,
            frames: FrameOptions::default(),
        }
    }
}

/// A full run: orbit lengths, replicas and pipeline options.
#[derive(Clone, Debug)]
pub struct RunSpec {
    pub n_steps: usize,
    pub spinup: usize,
    pub replicas: usize,
    pub seed: u64,
    pub dither: Option<bool>,
    pub options: ResponseOptions,
}

impl RunSpec {
    pub fn new(n_steps: usize, seed: u64) -> Self {
        RunSpec {
            n_steps,
            spinup: DEFAULT_SPINUP,
            replicas: 1,
            seed,
            dither: None,
            options: ResponseOptions::default(),
        }
    }

    /// Seed of replica `r`; replicas are independent orbits.
    pub fn replica_seed(&self, r: usize) -> u64 {
        self.seed
            .wrapping_add((r as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }

    pub fn orbit_spec(&self, r: usize) -> OrbitSpec {
        OrbitSpec {
            start: OrbitStart::Seed(self.replica_seed(r)),
            spinup: self.spinup,
            n_steps: self.n_steps,
            dither: self.dither,
        }
    }
}

/// The `X`-independent part of the pipeline on one orbit.
pub struct Engine {
    sys: SystemDef,
    orbit: OrbitData,
    frames: Frames,
    opts: ResponseOptions,
    /// `ν = 𝒮(div^v f_*)`.
    nu: Shadow,
    /// `𝒮(dΦ)`.
    s_dphi: Shadow,
    sample: Range<usize>,
    phi: Vec<f64>,
    phi_mean: f64,
    residual: f64,
}

impl Engine {
    pub fn new(sys: &SystemDef, orbit: OrbitData, opts: ResponseOptions) -> Result<Engine> {
        let frames = Frames::compute(sys, &orbit, opts.frames)?;
        let win = frames.window();
        let t = opts.margin;
        // div^v f_* at n needs n + 1 converged.
        let base = win.start..win.end - 1;
        if base.len() <= 4 * t + 2 {
            return Err(Error::Window(format!(
                "converged window {win:?} too short for margin {t}"
            )));
        }
        let sample = base.start + 2 * t..base.end - 2 * t;
        let w_need = opts.w.unwrap_or(0).max(opts.w_max);
        if sample.start < w_need || sample.end + w_need > orbit.steps() + 1 {
            return Err(Error::Window(format!(
                "W = {w_need} does not fit around sample window {sample:?}"
            )));
        }
        debug!("frames converged on {win:?}; sampling {sample:?}");

        let omega = div_v_fstar_series(sys, &orbit, &frames, base.clone());
        let nu = adjoint_shadow(sys, &orbit, &frames, &omega, t)?;
        let mut residual = adjoint_residual(sys, &orbit, &omega, &nu.series);
        drop(omega);
        let dphi = dphi_series(sys, &orbit, base);
        let s_dphi = adjoint_shadow(sys, &orbit, &frames, &dphi, t)?;
        residual = residual.max(adjoint_residual(sys, &orbit, &dphi, &s_dphi.series));
        drop(dphi);

        let phi: Vec<f64> = (0..=orbit.steps())
            .map(|n| sys.obs(orbit.point(n)))
            .collect();
        let phi_mean = phi[sample.clone()].iter().sum::<f64>() / sample.len() as f64;
        Ok(Engine {
            sys: sys.clone(),
            orbit,
            frames,
            opts,
            nu,
            s_dphi,
            sample,
            phi,
            phi_mean,
            residual,
        })
    }

    pub fn system(&self) -> &SystemDef {
        &self.sys
    }

    pub fn orbit(&self) -> &OrbitData {
        &self.orbit
    }

    pub fn frames(&self) -> &Frames {
        &self.frames
    }

    pub fn options(&self) -> &ResponseOptions {
        &self.opts
    }

    /// Orbit indices over which averages are taken.
    pub fn sample(&self) -> Range<usize> {
        self.sample.clone()
    }

    /// `𝒮(div^v f_*)`, defined on a superset of [`Engine::sample`].
    pub fn nu(&self) -> &Series {
        &self.nu.series
    }

    /// `𝒮(dΦ)`.
    pub fn shadow_dphi(&self) -> &Series {
        &self.s_dphi.series
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn tail_bound(&self) -> f64 {
        self.nu.tail_bound.max(self.s_dphi.tail_bound)
    }

    pub fn phi_values(&self) -> &[f64] {
        &self.phi
    }

    pub fn phi_mean(&self) -> f64 {
        self.phi_mean
    }

    /// `δL^uσ/σ(x_n) = −(div^v X + ⟨ν_n, X(x_n)⟩)`; `n` within `nu().range()`.
    pub fn density_ratio(&self, pert: &VectorField, n: usize, xbuf: &mut [f64]) -> f64 {
        let x = self.orbit.point(n);
        let div = pert.value_and_trace(
            x,
            self.frames.dual_t(n),
            self.frames.q(n),
            self.frames.udim(),
            xbuf,
        );
        -(div + dot(self.nu.series.get(n), xbuf))
    }

    /// `δL^uσ/σ` on the sample window.
    pub fn density_ratio_series(&self, pert: &VectorField) -> Vec<f64> {
        let mut xbuf = vec![0.0; self.sys.dim()];
        self.sample
            .clone()
            .map(|n| self.density_ratio(pert, n, &mut xbuf))
            .collect()
    }

    /// `S.C. = ρ(𝒮(dΦ) X)`.
    pub fn shadowing_contribution(&self, pert: &VectorField) -> Estimate {
        batch_means(&self.sc_values(pert))
    }

    fn center(&self, centered: bool) -> f64 {
        if centered {
            self.phi_mean
        } else {
            0.0
        }
    }

    /// `φ_W(x_n) = Σ_{|j|≤W} (Φ(x_{n+j}) − c)` on the sample window.
    pub fn phi_w(&self, w: usize, centered: bool) -> Vec<f64> {
        self.phi_w_on(w, centered, self.sample.clone())
    }

    pub(crate) fn phi_w_on(&self, w: usize, centered: bool, range: Range<usize>) -> Vec<f64> {
        let c = self.center(centered);
        range
            .map(|n| self.phi[n - w..=n + w].iter().map(|p| p - c).sum())
            .collect()
    }

    /// `U.C.(W) = ρ(φ_W · δL^uσ/σ)` for `W = 0..=w_max`.
    pub fn uc_sweep(&self, delta: &[f64], w_max: usize, centered: bool) -> Vec<Estimate> {
        self.sweep_with(delta, None, w_max, centered).0
    }

    /// Sweeps `W`, returning `U.C.(W)` and, when the per-step shadowing
    /// integrand `⟨𝒮(dΦ), X⟩` is supplied, the total `S.C. + U.C.(W)` whose
    /// error bar accounts for the correlation of the two parts.
    fn sweep_with(
        &self,
        delta: &[f64],
        sc_vals: Option<&[f64]>,
        w_max: usize,
        centered: bool,
    ) -> (Vec<Estimate>, Vec<Estimate>) {
        assert_eq!(delta.len(), self.sample.len());
        let c = self.center(centered);
        let s0 = self.sample.start;
        let len = delta.len();
        let ranges = BatchAccumulator::batch_ranges(len);
        let delta_sums: Vec<f64> = ranges
            .iter()
            .map(|r| delta[r.clone()].iter().sum())
            .collect();
        // Per-batch sums of (Φ(x_{n+j}) + Φ(x_{n−j}) − 2c) δ(x_n) (the j = 0
        // term once); U.C.(W) is their running sum over j ≤ W.
        let lag = |j: usize| -> Vec<f64> {
            ranges
                .iter()
                .zip(&delta_sums)
                .map(|(r, ds)| {
                    let d = &delta[r.clone()];
                    let fwd = &self.phi[s0 + j + r.start..s0 + j + r.end];
                    if j == 0 {
                        return dot_unrolled(fwd, d, None) - c * ds;
                    }
                    let back = &self.phi[s0 - j + r.start..s0 - j + r.end];
                    dot_unrolled(fwd, d, Some(back)) - 2.0 * c * ds
                })
                .collect()
        };
        let sc_sums: Option<Vec<f64>> =
            sc_vals.map(|sc| ranges.iter().map(|r| sc[r.clone()].iter().sum()).collect());
        let mut cum = lag(0);
        let mut uc = Vec::with_capacity(w_max + 1);
        let mut total = Vec::new();
        for w in 0..=w_max {
            if w > 0 {
                for (s, x) in cum.iter_mut().zip(lag(w)) {
                    *s += x;
                }
            }
            uc.push(BatchAccumulator::from_sums(len, cum.clone()).finish());
            if let Some(sc) = &sc_sums {
                let sums = cum.iter().zip(sc).map(|(u, s)| u + s).collect();
                total.push(BatchAccumulator::from_sums(len, sums).finish());
            }
        }
        (uc, total)
    }

    fn sc_values(&self, pert: &VectorField) -> Vec<f64> {
        let mut xbuf = vec![0.0; self.sys.dim()];
        self.sample
            .clone()
            .map(|n| {
                pert.value_into(self.orbit.point(n), &mut xbuf);
                dot(self.s_dphi.series.get(n), &xbuf)
            })
            .collect()
    }

    /// Everything `X`-dependent for one orbit.
    pub fn evaluate(&self, pert: &VectorField) -> Evaluation {
        let mut xbuf = vec![0.0; self.sys.dim()];
        let (delta, sc_vals): (Vec<f64>, Vec<f64>) = self
            .sample
            .clone()
            .map(|n| {
                let d = self.density_ratio(pert, n, &mut xbuf);
                (d, dot(self.s_dphi.series.get(n), &xbuf))
            })
            .unzip();
        let w_max = self.opts.w_max.max(self.opts.w.unwrap_or(0));
        let (sweep, total_sweep) =
            self.sweep_with(&delta, Some(&sc_vals), w_max, self.opts.centered);
        Evaluation {
            sc: batch_means(&sc_vals),
            sweep,
            total_sweep,
            zero_mean: batch_means(&delta),
        }
    }
}

/// `Σ (a_i + b_i) d_i` (or `Σ a_i d_i`) with four independent partial sums
/// so the loop vectorizes.
fn dot_unrolled(a: &[f64], d: &[f64], b: Option<&[f64]>) -> f64 {
    let mut acc = [0.0; 4];
    let n4 = d.len() / 4 * 4;
    match b {
        Some(b) => {
            for ((ac, dc), bc) in a[..n4]
                .chunks_exact(4)
                .zip(d[..n4].chunks_exact(4))
                .zip(b[..n4].chunks_exact(4))
            {
                for k in 0..4 {
                    acc[k] += (ac[k] + bc[k]) * dc[k];
                }
            }
            let tail: f64 = (n4..d.len()).map(|i| (a[i] + b[i]) * d[i]).sum();
            acc.iter().sum::<f64>() + tail
        }
        None => {
            for (ac, dc) in a[..n4].chunks_exact(4).zip(d[..n4].chunks_exact(4)) {
                for k in 0..4 {
                    acc[k] += ac[k] * dc[k];
                }
            }
            let tail: f64 = (n4..d.len()).map(|i| a[i] * d[i]).sum();
            acc.iter().sum::<f64>() + tail
        }
    }
}

/// `X`-dependent results on one orbit, before `W` is fixed.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub sc: Estimate,
    /// `U.C.(W)` for `W = 0..=w_max`.
    pub sweep: Vec<Estimate>,
    /// `S.C. + U.C.(W)` with a joint error bar.
    pub total_sweep: Vec<Estimate>,
    pub zero_mean: Estimate,
}

/// First `W` where three consecutive `U.C.(W)` agree within half a
/// standard error; the last `W` if the sweep never flattens.
pub fn plateau(sweep: &[Estimate]) -> usize {
    for w in 0..sweep.len().saturating_sub(2) {
        let tol = 0.5
            * sweep[w]
                .stderr
                .max(sweep[w + 1].stderr)
                .max(sweep[w + 2].stderr);
        let v = sweep[w].value;
        if (sweep[w + 1].value - v).abs() <= tol && (sweep[w + 2].value - v).abs() <= tol {
            return w;
        }
    }
    sweep.len().saturating_sub(1)
}

/// Runs the pipeline on `spec.replicas` independent orbits and pools.
pub fn linear_response(sys: &SystemDef, spec: &RunSpec) -> Result<ResponseReport> {
    linear_response_multi(sys, spec, std::slice::from_ref(sys.perturbation()))
        .map(|mut v| v.remove(0))
}

/// As [`linear_response`] for several perturbations sharing the orbit,
/// frames and adjoint shadows.
pub fn linear_response_multi(
    sys: &SystemDef,
    spec: &RunSpec,
    perts: &[VectorField],
) -> Result<Vec<ResponseReport>> {
    if spec.replicas == 0 || spec.n_steps == 0 {
        return Err(Error::Invalid(
            "replicas and n_steps must be positive".into(),
        ));
    }
    for p in perts {
        if p.dim() != sys.dim() {
            return Err(Error::Invalid(format!(
                "perturbation has {} components, system dimension is {}",
                p.dim(),
                sys.dim()
            )));
        }
    }
    let opts = &spec.options;
    let per_replica: Vec<Result<ReplicaOut>> = (0..spec.replicas)
        .into_par_iter()
        .map(|r| {
            let orbit = generate_orbit_with(sys, &spec.orbit_spec(r))?;
            let mut o = opts.clone();
            o.frames.seed = opts.frames.seed ^ spec.replica_seed(r).rotate_left(17);
            let engine = Engine::new(sys, orbit, o)?;
            info!("replica {r}: frames and adjoint shadows ready");
            let evals: Vec<Evaluation> = perts.iter().map(|p| engine.evaluate(p)).collect();
            Ok(ReplicaOut {
                lyapunov: lyapunov_exponents(&engine.frames.tangent),
                residual: engine.residual,
                tail_bound: engine.tail_bound(),
                max_condition: engine.frames.adjoint.max_condition,
                samples: engine.sample.len(),
                evals,
            })
        })
        .collect();
    let reps: Vec<ReplicaOut> = per_replica.into_iter().collect::<Result<_>>()?;

    let mut reports = Vec::with_capacity(perts.len());
    for k in 0..perts.len() {
        let w_len = reps[0].evals[k].sweep.len();
        let sweep: Vec<Estimate> = (0..w_len)
            .map(|w| Estimate::pool(&reps.iter().map(|r| r.evals[k].sweep[w]).collect::<Vec<_>>()))
            .collect();
        let w = opts
            .w
            .unwrap_or_else(|| plateau(&sweep[..=opts.w_max.min(w_len - 1)]));
        let totals: Vec<Estimate> = reps.iter().map(|r| r.evals[k].total_sweep[w]).collect();
        let sc = Estimate::pool(&reps.iter().map(|r| r.evals[k].sc).collect::<Vec<_>>());
        let zero_mean = Estimate::pool(
            &reps
                .iter()
                .map(|r| r.evals[k].zero_mean)
                .collect::<Vec<_>>(),
        );
        let n_rep = reps.len() as f64;
        let mut lyapunov = vec![0.0; sys.udim()];
        for r in &reps {
            for (l, v) in lyapunov.iter_mut().zip(&r.lyapunov) {
                *l += v / n_rep;
            }
        }
        reports.push(ResponseReport {
            system: sys.name().to_string(),
            params: sys.params().clone(),
            n_steps: spec.n_steps,
            replicas: spec.replicas,
            seed: spec.seed,
            centered: opts.centered,
            w,
            w_selected_by: if opts.w.is_some() {
                "config"
            } else {
                "plateau"
            }
            .to_string(),
            sc,
            uc: sweep[w],
            total: Estimate::pool(&totals),
            w_sweep: sweep
                .iter()
                .enumerate()
                .map(|(w, e)| SweepRow {
                    w,
                    uc: e.value,
                    stderr: e.stderr,
                })
                .collect(),
            diagnostics: Diagnostics {
                lyapunov,
                shadowing_residual: reps.iter().map(|r| r.residual).fold(0.0, f64::max),
                tail_bound: reps.iter().map(|r| r.tail_bound).fold(0.0, f64::max),
                zero_mean,
                max_condition: reps.iter().map(|r| r.max_condition).fold(1.0, f64::max),
                samples_per_replica: reps[0].samples,
            },
        });
    }
    Ok(reports)
}

struct ReplicaOut {
    lyapunov: Vec<f64>,
    residual: f64,
    tail_bound: f64,
    max_condition: f64,
    samples: usize,
    evals: Vec<Evaluation>,
}
