//! Ulam's method (zeroth-order finite elements) for expanding circle maps:
//! transition matrix, stationary density and the operator formula
//! `δρ̃(Φ) = Σ_m ⟨Φ, L^m δL h⟩`.
//!
//! Transition masses are exact overlap lengths: each bin is pulled back
//! through the monotone lift `F` by bisection, so the only discretization
//! error is the piecewise-constant density.

use crate::error::{Error, Result};
use crate::systems::SystemDef;
use serde::{Deserialize, Serialize};

const MIDPOINTS_PER_BIN: usize = 64;
const POWER_TOL: f64 = 1e-14;
const POWER_MAX_SWEEPS: usize = 100_000;

/// Row-stochastic sparse matrix: row `i` lists where bin `i`'s mass goes.
#[derive(Clone, Debug)]
pub struct UlamMatrix {
    rows: Vec<Vec<(u32, f64)>>,
}

impl UlamMatrix {
    pub fn bins(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(u32, f64)] {
        &self.rows[i]
    }

    /// `out = p P` (push bin masses forward one step).
    pub fn push(&self, p: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (row, &pi) in self.rows.iter().zip(p) {
            if pi == 0.0 {
                continue;
            }
            for &(j, w) in row {
                out[j as usize] += pi * w;
            }
        }
    }

    pub fn max_row_defect(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.iter().map(|(_, w)| w).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Inverse of an increasing function on `[a, b]` by bisection.
fn invert<F: Fn(f64) -> f64>(lift: &F, y: f64, a: f64, b: f64, ya: f64, yb: f64) -> f64 {
    if y <= ya {
        return a;
    }
    if y >= yb {
        return b;
    }
    let (mut lo, mut hi) = (a, b);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if lift(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Ulam matrix of a circle map given by an increasing lift on `[0, 1]`.
pub fn build_from_lift<F: Fn(f64) -> f64>(n: usize, lift: F) -> Result<UlamMatrix> {
    if n < 2 {
        return Err(Error::Invalid("Ulam grid needs at least two bins".into()));
    }
    let width = 1.0 / n as f64;
    let mut rows = Vec::with_capacity(n);
    let mut ya = lift(0.0);
    for i in 0..n {
        let a = i as f64 * width;
        let b = (i + 1) as f64 * width;
        let yb = lift(b);
        if !(yb > ya) {
            return Err(Error::NotExpanding(format!(
                "lift is not increasing on bin {i}"
            )));
        }
        let k0 = (ya * n as f64).floor() as i64;
        let k1 = (yb * n as f64).ceil() as i64;
        let mut row: Vec<(u32, f64)> = Vec::with_capacity((k1 - k0) as usize);
        let mut x_prev = a;
        for k in k0..k1 {
            let hi = ((k + 1) as f64 * width).min(yb);
            let x_hi = if k + 1 == k1 {
                b
            } else {
                invert(&lift, hi, a, b, ya, yb)
            };
            let mass = (x_hi - x_prev) * n as f64;
            x_prev = x_hi;
            if mass > 0.0 {
                let j = k.rem_euclid(n as i64) as u32;
                match row.iter_mut().find(|(jj, _)| *jj == j) {
                    Some(e) => e.1 += mass,
                    None => row.push((j, mass)),
                }
            }
        }
        rows.push(row);
        ya = yb;
    }
    Ok(UlamMatrix { rows })
}

fn check_circle_map(sys: &SystemDef) -> Result<()> {
    if sys.dim() != 1 || !sys.is_periodic(0) {
        return Err(Error::Invalid(format!(
            "Ulam oracle needs a one-dimensional circle map, `{}` has dimension {}",
            sys.name(),
            sys.dim()
        )));
    }
    Ok(())
}

/// Ulam matrix of `x ↦ f̃_γ(f(x))`; fails unless the map expands every bin.
pub fn ulam_build(sys: &SystemDef, n_bins: usize, gamma: f64) -> Result<UlamMatrix> {
    check_circle_map(sys)?;
    let lift = |x: f64| {
        let mut y = [0.0];
        sys.step_unwrapped(&[x], gamma, &mut y);
        y[0]
    };
    let width = 1.0 / n_bins as f64;
    for i in 0..n_bins {
        let a = i as f64 * width;
        if lift(a + width) - lift(a) <= width {
            return Err(Error::NotExpanding(format!(
                "bin {i} of {n_bins} is not expanded at γ = {gamma}"
            )));
        }
    }
    build_from_lift(n_bins, lift)
}

/// Stationary bin masses (summing to 1) by power iteration.
pub fn ulam_density(p: &UlamMatrix) -> Result<Vec<f64>> {
    let n = p.bins();
    let mut v = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for _ in 0..POWER_MAX_SWEEPS {
        p.push(&v, &mut next);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let diff: f64 = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut v, &mut next);
        if diff < POWER_TOL {
            return Ok(v);
        }
    }
    Err(Error::NoConvergence(POWER_MAX_SWEEPS))
}

/// Bin averages of `g` by the composite midpoint rule.
pub fn bin_averages<G: Fn(f64) -> f64>(n: usize, g: G) -> Vec<f64> {
    let width = 1.0 / n as f64;
    (0..n)
        .map(|i| {
            (0..MIDPOINTS_PER_BIN)
                .map(|k| g((i as f64 + (k as f64 + 0.5) / MIDPOINTS_PER_BIN as f64) * width))
                .sum::<f64>()
                / MIDPOINTS_PER_BIN as f64
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct UlamOptions {
    pub n_bins: usize,
    /// Number of terms `m` in `Σ_m ⟨Φ, L^m δL h⟩`.
    pub n_terms: usize,
    /// Step of the central difference in `γ`.
    pub delta: f64,
}

impl Default for UlamOptions {
    fn default() -> Self {
        UlamOptions {
            n_bins: 1 << 12,
            n_terms: 80,
            delta: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UlamResult {
    pub n_bins: usize,
    pub value: f64,
    /// Partial sums of the operator series.
    pub partial_sums: Vec<f64>,
    /// Stationary density (bin mass × bin count).
    pub density: Vec<f64>,
}

/// Operator-formula response on an `n_bins` grid.
pub fn ulam_response(sys: &SystemDef, opts: &UlamOptions) -> Result<UlamResult> {
    let n = opts.n_bins;
    let p0 = ulam_build(sys, n, 0.0)?;
    let h = ulam_density(&p0)?;
    let plus = ulam_build(sys, n, opts.delta)?;
    let minus = ulam_build(sys, n, -opts.delta)?;
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    plus.push(&h, &mut a);
    minus.push(&h, &mut b);
    let mut q: Vec<f64> = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y) / (2.0 * opts.delta))
        .collect();
    let phi = bin_averages(n, |x| sys.obs(&[x]));
    let mut partial_sums = Vec::with_capacity(opts.n_terms);
    let mut sum = 0.0;
    let mut next = vec![0.0; n];
    for _ in 0..opts.n_terms {
        sum += q.iter().zip(&phi).map(|(a, b)| a * b).sum::<f64>();
        partial_sums.push(sum);
        p0.push(&q, &mut next);
        std::mem::swap(&mut q, &mut next);
    }
    Ok(UlamResult {
        n_bins: n,
        value: sum,
        partial_sums,
        density: h.iter().map(|m| m * n as f64).collect(),
    })
}

/// Response on `n_bins` with the grid error estimated as the change from
/// `n_bins / 2`.
pub fn ulam_response_with_error(sys: &SystemDef, opts: &UlamOptions) -> Result<(UlamResult, f64)> {
    let fine = ulam_response(sys, opts)?;
    let coarse = ulam_response(
        sys,
        &UlamOptions {
            n_bins: opts.n_bins / 2,
            ..*opts
        },
    )?;
    let err = (fine.value - coarse.value).abs();
    Ok((fine, err))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::make_builtin;
    use std::collections::BTreeMap;

    fn sawtooth(a: f64) -> SystemDef {
        let mut p = BTreeMap::new();
        p.insert("a".to_string(), a);
        make_builtin("sawtooth", &p).unwrap()
    }

    #[test]
    fn doubling_density_is_uniform() {
        let p = ulam_build(&sawtooth(0.0), 256, 0.0).unwrap();
        assert!(p.max_row_defect() < 1e-12);
        let h = ulam_density(&p).unwrap();
        for m in h {
            assert!((m * 256.0 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rows_are_stochastic_for_nonlinear_map() {
        let p = ulam_build(&sawtooth(0.12), 1000, 0.01).unwrap();
        assert!(p.max_row_defect() < 1e-12);
    }

    #[test]
    fn doubling_translation_response_vanishes() {
        let r = ulam_response(
            &sawtooth(0.0),
            &UlamOptions {
                n_bins: 1024,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(r.value.abs() < 1e-3, "{}", r.value);
    }

    #[test]
    fn rejects_non_circle_maps() {
        let sys = make_builtin("catmap", &BTreeMap::new()).unwrap();
        assert!(matches!(ulam_build(&sys, 64, 0.0), Err(Error::Invalid(_))));
    }
}
