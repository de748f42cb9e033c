//! Smooth scalar and vector fields built from trigonometric terms.
//!
//! Perturbations `X` and observables `Φ` are described declaratively so they
//! can be carried in run configurations and differentiated analytically. A
//! term is `amp * k(2π ⟨freq, x⟩)` with `k ∈ {1, sin, cos}`.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrigKind {
    Const,
    Sin,
    Cos,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub amp: f64,
    pub kind: TrigKind,
    /// Frequency vector; missing trailing entries are zero.
    #[serde(default)]
    pub freq: Vec<f64>,
}

impl TrigTerm {
    pub fn constant(amp: f64) -> Self {
        TrigTerm {
            amp,
            kind: TrigKind::Const,
            freq: Vec::new(),
        }
    }

    pub fn sin(amp: f64, freq: &[f64]) -> Self {
        TrigTerm {
            amp,
            kind: TrigKind::Sin,
            freq: freq.to_vec(),
        }
    }

    pub fn cos(amp: f64, freq: &[f64]) -> Self {
        TrigTerm {
            amp,
            kind: TrigKind::Cos,
            freq: freq.to_vec(),
        }
    }

    #[inline]
    fn phase(&self, x: &[f64]) -> f64 {
        TAU * self.freq.iter().zip(x).map(|(k, xi)| k * xi).sum::<f64>()
    }
}

/// Scalar field `x ↦ Σ terms`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScalarField {
    pub terms: Vec<TrigTerm>,
}

impl ScalarField {
    pub fn new(terms: Vec<TrigTerm>) -> Self {
        ScalarField { terms }
    }

    pub fn zero() -> Self {
        ScalarField::default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.amp == 0.0)
    }

    /// Highest coordinate index referenced, plus one.
    pub fn arity(&self) -> usize {
        self.terms.iter().map(|t| t.freq.len()).max().unwrap_or(0)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| match t.kind {
                TrigKind::Const => t.amp,
                TrigKind::Sin => t.amp * t.phase(x).sin(),
                TrigKind::Cos => t.amp * t.phase(x).cos(),
            })
            .sum()
    }

    /// Adds the gradient at `x` into `out`.
    pub fn add_gradient(&self, x: &[f64], out: &mut [f64]) {
        for t in &self.terms {
            let d = match t.kind {
                TrigKind::Const => continue,
                TrigKind::Sin => t.amp * TAU * t.phase(x).cos(),
                TrigKind::Cos => -t.amp * TAU * t.phase(x).sin(),
            };
            for (o, k) in out.iter_mut().zip(&t.freq) {
                *o += d * k;
            }
        }
    }

    /// Directional derivative `⟨∇g(x), v⟩`.
    pub fn directional(&self, x: &[f64], v: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let kv: f64 = t.freq.iter().zip(v).map(|(k, vi)| k * vi).sum();
                match t.kind {
                    TrigKind::Const => 0.0,
                    TrigKind::Sin => t.amp * TAU * kv * t.phase(x).cos(),
                    TrigKind::Cos => -t.amp * TAU * kv * t.phase(x).sin(),
                }
            })
            .sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        ScalarField {
            terms: self
                .terms
                .iter()
                .map(|t| TrigTerm {
                    amp: t.amp * s,
                    ..t.clone()
                })
                .collect(),
        }
    }
}

/// Vector field with one scalar field per coordinate.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorField {
    pub components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Self {
        VectorField { components }
    }

    pub fn zero(dim: usize) -> Self {
        VectorField {
            components: vec![ScalarField::zero(); dim],
        }
    }

    pub fn constant(c: &[f64]) -> Self {
        VectorField {
            components: c
                .iter()
                .map(|&a| ScalarField::new(vec![TrigTerm::constant(a)]))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(ScalarField::is_zero)
    }

    pub fn value_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.value(x);
        }
    }

    /// `∇_v X(x)`.
    pub fn derivative_into(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.directional(x, v);
        }
    }

    /// Writes `X(x)` into `out` and returns `Σ_i ⟨a_i, ∇_{b_i} X(x)⟩` for the
    /// `u` columns of the column-major `dim×u` blocks `a` and `b`. Each term
    /// is evaluated once.
    pub fn value_and_trace(
        &self,
        x: &[f64],
        a: &[f64],
        b: &[f64],
        u: usize,
        out: &mut [f64],
    ) -> f64 {
        let m = self.dim();
        let mut trace = 0.0;
        for (c, (o, field)) in out.iter_mut().zip(&self.components).enumerate() {
            *o = 0.0;
            for t in &field.terms {
                let (v, d) = match t.kind {
                    TrigKind::Const => {
                        *o += t.amp;
                        continue;
                    }
                    TrigKind::Sin => t.phase(x).sin_cos(),
                    TrigKind::Cos => {
                        let (s, co) = t.phase(x).sin_cos();
                        (co, -s)
                    }
                };
                *o += t.amp * v;
                let cols = a.chunks_exact(m).zip(b.chunks_exact(m)).take(u);
                let s: f64 = cols
                    .map(|(ac, bc)| {
                        ac[c] * t.freq.iter().zip(bc).map(|(k, bj)| k * bj).sum::<f64>()
                    })
                    .sum();
                trace += t.amp * TAU * d * s;
            }
        }
        trace
    }

    /// `a·self + b·other`, term lists concatenated.
    pub fn combine(&self, a: f64, other: &VectorField, b: f64) -> VectorField {
        assert_eq!(self.dim(), other.dim());
        VectorField {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(p, q)| {
                    let mut terms = p.scaled(a).terms;
                    terms.extend(q.scaled(b).terms);
                    ScalarField { terms }
                })
                .collect(),
        }
    }
}
