//! Central finite difference of long-run averages in `γ`, with common
//! random initial conditions for the `±Δγ` orbits of each pair.

use crate::error::{Error, Result};
use crate::orbit::{walk_orbit, OrbitSpec, OrbitStart, DEFAULT_SPINUP};
use crate::stats::{mean_stderr, BatchAccumulator, Estimate};
use crate::systems::SystemDef;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FdOptions {
    pub delta: f64,
    pub n_steps: usize,
    pub pairs: usize,
    pub spinup: usize,
    pub seed: u64,
    /// Also difference at `2Δγ` and report the Richardson extrapolation.
    pub richardson: bool,
    pub dither: Option<bool>,
}

impl Default for FdOptions {
    fn default() -> Self {
        FdOptions {
            delta: 1e-3,
            n_steps: 1_000_000,
            pairs: 1,
            spinup: DEFAULT_SPINUP,
            seed: 0,
            richardson: false,
            dither: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdResult {
    pub delta: f64,
    pub estimate: Estimate,
    /// Difference quotient at `2Δγ`.
    pub coarse: Option<Estimate>,
    /// `(4·d(Δγ) − d(2Δγ)) / 3`.
    pub richardson: Option<f64>,
}

fn pair_quotient(sys: &SystemDef, opts: &FdOptions, delta: f64, pair: usize) -> Result<Estimate> {
    let spec = OrbitSpec {
        start: OrbitStart::Seed(
            opts.seed
                .wrapping_add((pair as u64).wrapping_mul(0x2545_f491_4f6c_dd1d)),
        ),
        spinup: opts.spinup,
        n_steps: opts.n_steps,
        dither: opts.dither,
    };
    let len = opts.n_steps + 1;
    let run = |gamma: f64| -> Result<BatchAccumulator> {
        let mut acc = BatchAccumulator::new(len);
        walk_orbit(sys, gamma, &spec, |_, x| acc.push(sys.obs(x)))?;
        Ok(acc)
    };
    let plus = run(delta)?;
    let minus = run(-delta)?;
    Ok(plus.scaled_difference(&minus, 1.0 / (2.0 * delta)))
}

fn quotient(sys: &SystemDef, opts: &FdOptions, delta: f64) -> Result<Estimate> {
    let parts: Vec<Estimate> = (0..opts.pairs)
        .into_par_iter()
        .map(|p| pair_quotient(sys, opts, delta, p))
        .collect::<Result<_>>()?;
    if parts.len() >= 8 {
        // Enough independent pairs to estimate the spread directly.
        let vals: Vec<f64> = parts.iter().map(|e| e.value).collect();
        Ok(mean_stderr(&vals))
    } else {
        Ok(Estimate::pool(&parts))
    }
}

/// `(⟨Φ⟩_{+Δγ} − ⟨Φ⟩_{−Δγ}) / 2Δγ` averaged over orbit pairs.
pub fn fd_response(sys: &SystemDef, opts: &FdOptions) -> Result<FdResult> {
    if !(opts.delta > 0.0) || opts.pairs == 0 || opts.n_steps < 1 {
        return Err(Error::Invalid(
            "fd needs delta > 0, pairs ≥ 1, n_steps ≥ 1".into(),
        ));
    }
    let estimate = quotient(sys, opts, opts.delta)?;
    let (coarse, richardson) = if opts.richardson {
        let c = quotient(sys, opts, 2.0 * opts.delta)?;
        (Some(c), Some((4.0 * estimate.value - c.value) / 3.0))
    } else {
        (None, None)
    };
    Ok(FdResult {
        delta: opts.delta,
        estimate,
        coarse,
        richardson,
    })
}
