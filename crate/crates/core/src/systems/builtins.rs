use super::{DynamicalMap, SystemDef};
use crate::error::{Error, Result};
use crate::field::{ScalarField, TrigTerm, VectorField};
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::Arc;

pub const BUILTIN_NAMES: &[&str] = &["sawtooth", "catmap", "solenoid", "coupledcat"];

const MANIFEST: &str = include_str!("manifest.json");

/// Machine-readable description of the registry (names, parameter keys,
/// defaults and admissible ranges).
pub fn manifest() -> serde_json::Value {
    serde_json::from_str(MANIFEST).expect("embedded manifest is valid JSON")
}

struct Params<'a> {
    system: &'a str,
    given: &'a BTreeMap<String, f64>,
    used: BTreeMap<String, f64>,
}

impl<'a> Params<'a> {
    fn new(system: &'a str, given: &'a BTreeMap<String, f64>) -> Self {
        Params {
            system,
            given,
            used: BTreeMap::new(),
        }
    }

    fn get(&mut self, key: &str, default: f64, lo: f64, hi: f64, reason: &str) -> Result<f64> {
        let v = self.given.get(key).copied().unwrap_or(default);
        if !(v.is_finite() && v >= lo && v <= hi) {
            return Err(Error::ParamOutOfRange {
                param: key.to_string(),
                value: v,
                reason: reason.to_string(),
            });
        }
        self.used.insert(key.to_string(), v);
        Ok(v)
    }

    fn finish(self) -> Result<BTreeMap<String, f64>> {
        if let Some(k) = self.given.keys().find(|k| !self.used.contains_key(*k)) {
            return Err(Error::UnknownParam {
                system: self.system.to_string(),
                param: k.clone(),
            });
        }
        Ok(self.used)
    }
}

/// Builds a registry system with its default perturbation and observable.
pub fn make_builtin(name: &str, params: &BTreeMap<String, f64>) -> Result<SystemDef> {
    let mut p = Params::new(name, params);
    match name {
        "sawtooth" => {
            // Strictly below 1/(2π) keeps f' ≥ 2 - 2π|a| > 1.
            let a = p.get(
                "a",
                0.1,
                -0.15,
                0.15,
                "|a| must stay below 1/(2π) with margin (expanding)",
            )?;
            let params = p.finish()?;
            Ok(SystemDef::new(
                name,
                params,
                Arc::new(Sawtooth { a }),
                VectorField::constant(&[1.0]),
                ScalarField::new(vec![TrigTerm::cos(1.0, &[1.0])]),
            ))
        }
        "catmap" => {
            let params = p.finish()?;
            Ok(SystemDef::new(
                name,
                params,
                Arc::new(CatMap),
                VectorField::new(vec![
                    ScalarField::new(vec![TrigTerm::sin(1.0, &[1.0, 0.0])]),
                    ScalarField::new(vec![TrigTerm::cos(0.5, &[0.0, 1.0])]),
                ]),
                ScalarField::new(vec![TrigTerm::cos(1.0, &[1.0, 0.0])]),
            ))
        }
        "solenoid" => {
            let a = p.get("a", 0.05, -0.1, 0.1, "angular map must stay expanding")?;
            let b = p.get(
                "b",
                0.1,
                -0.2,
                0.2,
                "radial-to-angular feedback must stay small",
            )?;
            let lambda = p.get("lambda", 0.3, 0.05, 0.45, "disc contraction must be strong")?;
            let c = p.get("c", 0.5, 0.1, 0.9, "winding radius")?;
            let params = p.finish()?;
            Ok(SystemDef::new(
                name,
                params,
                Arc::new(Solenoid { a, b, lambda, c }),
                VectorField::new(vec![
                    ScalarField::new(vec![TrigTerm::sin(1.0, &[1.0, 0.0, 0.0])]),
                    ScalarField::zero(),
                    ScalarField::new(vec![TrigTerm::constant(0.2)]),
                ]),
                ScalarField::new(vec![
                    TrigTerm::cos(1.0, &[1.0, 0.0, 0.0]),
                    TrigTerm::sin(1.0, &[0.0, 0.5, 0.0]),
                ]),
            ))
        }
        "coupledcat" => {
            let k = p.get("k", 2.0, 1.0, 10.0, "number of blocks must be 1..=10")?;
            if k.fract() != 0.0 {
                return Err(Error::ParamOutOfRange {
                    param: "k".into(),
                    value: k,
                    reason: "must be an integer".into(),
                });
            }
            let coupling = p.get("coupling", 0.1, -0.3, 0.3, "coupling must stay weak")?;
            let mu = p.get("mu", 0.0, -0.3, 0.3, "self-perturbation must stay weak")?;
            let params = p.finish()?;
            let k = k as usize;
            let m = 2 * k;
            let mut pert = Vec::with_capacity(m);
            let mut obs = Vec::with_capacity(k);
            for i in 0..k {
                let mut f = vec![0.0; m];
                f[2 * i] = 1.0;
                pert.push(ScalarField::new(vec![TrigTerm::sin(1.0, &f)]));
                pert.push(ScalarField::zero());
                obs.push(TrigTerm::cos(1.0 / k as f64, &f));
            }
            Ok(SystemDef::new(
                name,
                params,
                Arc::new(CoupledCat { k, coupling, mu }),
                VectorField::new(pert),
                ScalarField::new(obs),
            ))
        }
        _ => Err(Error::UnknownSystem(name.to_string())),
    }
}

/// `x ↦ 2x + a sin(2πx) mod 1`.
#[derive(Clone, Copy, Debug)]
pub struct Sawtooth {
    pub a: f64,
}

impl DynamicalMap for Sawtooth {
    fn dim(&self) -> usize {
        1
    }
    fn udim(&self) -> usize {
        1
    }
    fn periodic(&self, _: usize) -> bool {
        true
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 2.0 * x[0] + self.a * (TAU * x[0]).sin();
    }
    fn jvp(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        out[0] = (2.0 + TAU * self.a * (TAU * x[0]).cos()) * v[0];
    }
    fn vjp(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        self.jvp(x, w, out)
    }
    fn hvp(&self, x: &[f64], y: &[f64], z: &[f64], out: &mut [f64]) {
        out[0] = -TAU * TAU * self.a * (TAU * x[0]).sin() * y[0] * z[0];
    }
    fn needs_dither(&self) -> bool {
        self.a == 0.0
    }
}

/// Linear cat map `z ↦ [[2,1],[1,1]] z mod 1`.
#[derive(Clone, Copy, Debug)]
pub struct CatMap;

impl DynamicalMap for CatMap {
    fn dim(&self) -> usize {
        2
    }
    fn udim(&self) -> usize {
        1
    }
    fn periodic(&self, _: usize) -> bool {
        true
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.jvp(x, x, out)
    }
    fn jvp(&self, _x: &[f64], v: &[f64], out: &mut [f64]) {
        out[0] = 2.0 * v[0] + v[1];
        out[1] = v[0] + v[1];
    }
    fn vjp(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        // A is symmetric.
        self.jvp(x, w, out)
    }
    fn hvp(&self, _x: &[f64], _y: &[f64], _z: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }
}

/// Solid-torus solenoid in coordinates `(θ, y, z)`:
///
/// ```text
/// θ' = 2θ + a sin 2πθ + b y      (mod 1)
/// y' = λ y + c cos 2πθ
/// z' = λ z + c sin 2πθ
/// ```
///
/// One expanding direction (rate ≈ 2) and two contracting ones (rate ≈ λ).
/// The attractor sits inside `|(y, z)| ≤ c / (1 - λ)`.
#[derive(Clone, Copy, Debug)]
pub struct Solenoid {
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
    pub c: f64,
}

impl Solenoid {
    #[inline]
    fn jacobian(&self, x: &[f64]) -> [[f64; 3]; 3] {
        let (s, co) = (TAU * x[0]).sin_cos();
        [
            [2.0 + TAU * self.a * co, self.b, 0.0],
            [-TAU * self.c * s, self.lambda, 0.0],
            [TAU * self.c * co, 0.0, self.lambda],
        ]
    }
}

impl DynamicalMap for Solenoid {
    fn dim(&self) -> usize {
        3
    }
    fn udim(&self) -> usize {
        1
    }
    fn periodic(&self, coord: usize) -> bool {
        coord == 0
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let (s, co) = (TAU * x[0]).sin_cos();
        out[0] = 2.0 * x[0] + self.a * s + self.b * x[1];
        out[1] = self.lambda * x[1] + self.c * co;
        out[2] = self.lambda * x[2] + self.c * s;
    }
    fn jvp(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        let j = self.jacobian(x);
        for i in 0..3 {
            out[i] = j[i][0] * v[0] + j[i][1] * v[1] + j[i][2] * v[2];
        }
    }
    fn vjp(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        let j = self.jacobian(x);
        for i in 0..3 {
            out[i] = j[0][i] * w[0] + j[1][i] * w[1] + j[2][i] * w[2];
        }
    }
    fn hvp(&self, x: &[f64], y: &[f64], z: &[f64], out: &mut [f64]) {
        let (s, co) = (TAU * x[0]).sin_cos();
        let yz = y[0] * z[0] * TAU * TAU;
        out[0] = -self.a * s * yz;
        out[1] = -self.c * co * yz;
        out[2] = -self.c * s * yz;
    }
}

/// `k` cat maps on `T^{2k}`, block `i` being
/// `z_i ↦ A z_i + (μ/2π) sin(2π z_{i,0}) e₀ + (κ/2π) sin(2π z_{i+1,0}) e₀`
/// (indices cyclic). Unstable dimension `k`.
#[derive(Clone, Copy, Debug)]
pub struct CoupledCat {
    pub k: usize,
    pub coupling: f64,
    pub mu: f64,
}

impl CoupledCat {
    #[inline]
    fn next(&self, i: usize) -> usize {
        (i + 1) % self.k
    }
}

impl DynamicalMap for CoupledCat {
    fn dim(&self) -> usize {
        2 * self.k
    }
    fn udim(&self) -> usize {
        self.k
    }
    fn periodic(&self, _: usize) -> bool {
        true
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.k {
            let (a, b) = (x[2 * i], x[2 * i + 1]);
            let nb = x[2 * self.next(i)];
            out[2 * i] = 2.0 * a
                + b
                + self.mu / TAU * (TAU * a).sin()
                + self.coupling / TAU * (TAU * nb).sin();
            out[2 * i + 1] = a + b;
        }
    }
    fn jvp(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        for i in 0..self.k {
            let j = self.next(i);
            let (a, nb) = (x[2 * i], x[2 * j]);
            out[2 * i] = (2.0 + self.mu * (TAU * a).cos()) * v[2 * i]
                + v[2 * i + 1]
                + self.coupling * (TAU * nb).cos() * v[2 * j];
            out[2 * i + 1] = v[2 * i] + v[2 * i + 1];
        }
    }
    fn vjp(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for i in 0..self.k {
            let j = self.next(i);
            let (a, nb) = (x[2 * i], x[2 * j]);
            out[2 * i] += (2.0 + self.mu * (TAU * a).cos()) * w[2 * i] + w[2 * i + 1];
            out[2 * i + 1] += w[2 * i] + w[2 * i + 1];
            out[2 * j] += self.coupling * (TAU * nb).cos() * w[2 * i];
        }
    }
    fn hvp(&self, x: &[f64], y: &[f64], z: &[f64], out: &mut [f64]) {
        for i in 0..self.k {
            let j = self.next(i);
            let (a, nb) = (x[2 * i], x[2 * j]);
            out[2 * i] = -TAU * self.mu * (TAU * a).sin() * y[2 * i] * z[2 * i]
                - TAU * self.coupling * (TAU * nb).sin() * y[2 * j] * z[2 * j];
            out[2 * i + 1] = 0.0;
        }
    }
}
