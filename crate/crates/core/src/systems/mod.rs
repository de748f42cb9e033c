//! Parameterized maps on the flat torus and the registry of built-in systems.
//!
//! A [`SystemDef`] bundles a base map `f` (with tangent, cotangent and
//! Hessian products), a perturbation field `X` and an observable `Φ`. The
//! perturbed family is `x ↦ f̃_γ(f(x))` with `f̃_γ(y) = y + γ X(y)`, so
//! `X = ∂f̃/∂γ` at `γ = 0` is a vector field evaluated at the image point.

mod builtins;
mod validate;

pub use builtins::{make_builtin, manifest, CatMap, CoupledCat, Sawtooth, Solenoid, BUILTIN_NAMES};
pub use validate::{validate_system, ValidationReport};

use crate::field::{ScalarField, VectorField};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// A smooth map with analytic first and second derivatives.
///
/// `apply` returns the image without reduction modulo 1; [`SystemDef`] does the
/// wrapping of periodic coordinates.
pub trait DynamicalMap: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn udim(&self) -> usize;
    fn periodic(&self, coord: usize) -> bool;
    fn apply(&self, x: &[f64], out: &mut [f64]);
    /// `f_* v` at `x`.
    fn jvp(&self, x: &[f64], v: &[f64], out: &mut [f64]);
    /// `f^* w` at `x`, where `w` is a covector at `f(x)`.
    fn vjp(&self, x: &[f64], w: &[f64], out: &mut [f64]);
    /// `(∇_y f_*) z` at `f(x)`.
    fn hvp(&self, x: &[f64], y: &[f64], z: &[f64], out: &mut [f64]);
    /// Whether floating-point orbits degenerate (e.g. the exact doubling map
    /// shifts mantissa bits out and lands on 0 after ~53 steps).
    fn needs_dither(&self) -> bool {
        false
    }
}

/// First-order part of a map, for user systems without an analytic Hessian.
pub trait FirstOrderMap: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn udim(&self) -> usize;
    fn periodic(&self, coord: usize) -> bool;
    fn apply(&self, x: &[f64], out: &mut [f64]);
    fn jvp(&self, x: &[f64], v: &[f64], out: &mut [f64]);
    fn vjp(&self, x: &[f64], w: &[f64], out: &mut [f64]);
}

/// Opt-in central finite-difference Hessian for a [`FirstOrderMap`].
///
/// Step is `ε^{1/3} · max(1, |x|_∞)`.
#[derive(Debug)]
pub struct FdHessian<F>(pub F);

impl<F: FirstOrderMap> DynamicalMap for FdHessian<F> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn udim(&self) -> usize {
        self.0.udim()
    }
    fn periodic(&self, coord: usize) -> bool {
        self.0.periodic(coord)
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.0.apply(x, out)
    }
    fn jvp(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        self.0.jvp(x, v, out)
    }
    fn vjp(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        self.0.vjp(x, w, out)
    }
    fn hvp(&self, x: &[f64], y: &[f64], z: &[f64], out: &mut [f64]) {
        let m = x.len();
        let scale = x.iter().fold(1.0f64, |a, b| a.max(b.abs()));
        let ynorm = y.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if ynorm == 0.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let h = f64::EPSILON.cbrt() * scale / ynorm;
        let xp: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + h * b).collect();
        let xm: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - h * b).collect();
        let mut jp = vec![0.0; m];
        let mut jm = vec![0.0; m];
        self.0.jvp(&xp, z, &mut jp);
        self.0.jvp(&xm, z, &mut jm);
        for i in 0..m {
            out[i] = (jp[i] - jm[i]) / (2.0 * h);
        }
    }
}

const STACK_DIM: usize = 32;

/// A parameterized system: base map, perturbation and observable.
#[derive(Clone, Debug)]
pub struct SystemDef {
    name: String,
    params: BTreeMap<String, f64>,
    map: Arc<dyn DynamicalMap>,
    pert: VectorField,
    obs: ScalarField,
}

impl SystemDef {
    pub fn new(
        name: impl Into<String>,
        params: BTreeMap<String, f64>,
        map: Arc<dyn DynamicalMap>,
        pert: VectorField,
        obs: ScalarField,
    ) -> Self {
        assert_eq!(pert.dim(), map.dim(), "perturbation dimension mismatch");
        SystemDef {
            name: name.into(),
            params,
            map,
            pert,
            obs,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    pub fn udim(&self) -> usize {
        self.map.udim()
    }

    pub fn base_map(&self) -> &dyn DynamicalMap {
        self.map.as_ref()
    }

    pub fn perturbation(&self) -> &VectorField {
        &self.pert
    }

    pub fn observable(&self) -> &ScalarField {
        &self.obs
    }

    pub fn with_perturbation(mut self, pert: VectorField) -> Self {
        assert_eq!(pert.dim(), self.dim(), "perturbation dimension mismatch");
        self.pert = pert;
        self
    }

    pub fn with_observable(mut self, obs: ScalarField) -> Self {
        self.obs = obs;
        self
    }

    pub fn is_periodic(&self, coord: usize) -> bool {
        self.map.periodic(coord)
    }

    pub fn needs_dither(&self) -> bool {
        self.map.needs_dither()
    }

    /// Reduces periodic coordinates into `[0, 1)`.
    pub fn wrap(&self, x: &mut [f64]) {
        for (i, xi) in x.iter_mut().enumerate() {
            if self.map.periodic(i) {
                *xi -= xi.floor();
                if *xi >= 1.0 {
                    *xi = 0.0;
                }
            }
        }
    }

    /// `b - a`, taking the shortest representative on periodic coordinates.
    pub fn displacement(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        for i in 0..out.len() {
            let mut d = b[i] - a[i];
            if self.map.periodic(i) {
                d -= d.round();
            }
            out[i] = d;
        }
    }

    /// The perturbed map before wrapping: `f(x) + γ X(f(x))`.
    pub fn step_unwrapped(&self, x: &[f64], gamma: f64, out: &mut [f64]) {
        self.map.apply(x, out);
        if gamma != 0.0 {
            let m = out.len();
            let mut stack = [0.0f64; 2 * STACK_DIM];
            let mut heap = Vec::new();
            let buf: &mut [f64] = if m <= STACK_DIM {
                &mut stack[..2 * m]
            } else {
                heap.resize(2 * m, 0.0);
                &mut heap
            };
            let (y, xv) = buf.split_at_mut(m);
            y.copy_from_slice(out);
            self.wrap(y);
            self.pert.value_into(y, xv);
            for (o, v) in out.iter_mut().zip(xv.iter()) {
                *o += gamma * v;
            }
        }
    }

    /// `f̃_γ ∘ f`, wrapped onto the chart.
    pub fn step(&self, x: &[f64], gamma: f64, out: &mut [f64]) {
        self.step_unwrapped(x, gamma, out);
        self.wrap(out);
    }

    pub fn jvp(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        self.map.jvp(x, v, out)
    }

    pub fn vjp(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        self.map.vjp(x, w, out)
    }

    pub fn hvp(&self, x: &[f64], y: &[f64], z: &[f64], out: &mut [f64]) {
        self.map.hvp(x, y, z, out)
    }

    pub fn pert(&self, x: &[f64], out: &mut [f64]) {
        self.pert.value_into(x, out)
    }

    /// `∇_y X(x)`.
    pub fn dpert(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.pert.derivative_into(x, y, out)
    }

    pub fn obs(&self, x: &[f64]) -> f64 {
        self.obs.value(x)
    }

    pub fn dobs(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        self.obs.add_gradient(x, out)
    }
}
