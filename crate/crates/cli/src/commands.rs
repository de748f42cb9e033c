//! Subcommand bodies; each returns the serialized output.

use crate::config::{Axis, Config, ConfigError};
use crate::{CliError, Format};
use fastresp::oracles::{
    decay_check, ensemble_response, fd_response, ulam_error_scaling, ulam_response, DecayReport,
    EnsembleReport, FdOptions, FdResult, UlamOptions,
};
use fastresp::orbit::generate_orbit_with;
use fastresp::response::{equivalence_check, Equivalence};
use fastresp::stats::loglog_slope;
use fastresp::{linear_response, Engine, ResponseReport};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

const SIGMAS: f64 = 3.0;

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| CliError::Output(e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct RunRow<'a> {
    system: &'a str,
    n_steps: usize,
    replicas: usize,
    seed: u64,
    w: usize,
    sc: f64,
    sc_stderr: f64,
    uc: f64,
    uc_stderr: f64,
    total: f64,
    total_stderr: f64,
}

impl<'a> From<&'a ResponseReport> for RunRow<'a> {
    fn from(r: &'a ResponseReport) -> Self {
        RunRow {
            system: &r.system,
            n_steps: r.n_steps,
            replicas: r.replicas,
            seed: r.seed,
            w: r.w,
            sc: r.sc.value,
            sc_stderr: r.sc.stderr,
            uc: r.uc.value,
            uc_stderr: r.uc.stderr,
            total: r.total.value,
            total_stderr: r.total.stderr,
        }
    }
}

pub fn run(cfg: &Config, format: Format) -> Result<String, CliError> {
    let sys = cfg.system()?;
    let rep = linear_response(&sys, &cfg.run_spec())?;
    log::info!(
        "{}: total {:.6} ± {:.6}",
        rep.system,
        rep.total.value,
        rep.total.stderr
    );
    match format {
        Format::Json => Ok(to_json(&rep)),
        Format::Csv => to_csv(&[RunRow::from(&rep)]),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PairCheck {
    pub pair: String,
    pub a: f64,
    pub b: f64,
    pub defect: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl PairCheck {
    fn new(pair: &str, a: f64, b: f64, threshold: f64) -> Self {
        let defect = (a - b).abs();
        PairCheck {
            pair: pair.to_string(),
            a,
            b,
            defect,
            threshold,
            pass: defect <= threshold,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct UlamCheck {
    pub n_bins: usize,
    pub value: f64,
    /// Change from half the bins.
    pub grid_error: f64,
}

#[derive(Debug, Serialize)]
pub struct Validation {
    pub system: String,
    pub params: BTreeMap<String, f64>,
    pub fast: ResponseReport,
    pub fd: FdResult,
    pub ulam: Option<UlamCheck>,
    pub triangle: Vec<PairCheck>,
    pub equivalence: Option<Equivalence>,
    pub decay: Option<DecayReport>,
    pub ensemble: Option<EnsembleReport>,
    pub pass: bool,
}

pub fn validate(cfg: &Config, format: Format) -> Result<String, CliError> {
    let sys = cfg.system()?;
    let spec = cfg.run_spec();
    let fast = linear_response(&sys, &spec)?;
    let fd = fd_response(&sys, &cfg.fd_options())?;
    let t = fast.total;
    let d = fd.estimate;
    let mut triangle = vec![PairCheck::new(
        "fast-fd",
        t.value,
        d.value,
        SIGMAS * t.combined_stderr(&d),
    )];

    let ulam = if sys.dim() == 1 {
        let opts = cfg.ulam.as_ref().map(|u| u.options()).unwrap_or_default();
        let (fine, coarse) = rayon::join(
            || ulam_response(&sys, &opts),
            || {
                ulam_response(
                    &sys,
                    &UlamOptions {
                        n_bins: opts.n_bins / 2,
                        ..opts
                    },
                )
            },
        );
        let (fine, coarse) = (fine?, coarse?);
        let grid_error = (fine.value - coarse.value).abs();
        triangle.push(PairCheck::new(
            "fast-ulam",
            t.value,
            fine.value,
            grid_error.max(SIGMAS * t.stderr),
        ));
        triangle.push(PairCheck::new(
            "fd-ulam",
            d.value,
            fine.value,
            grid_error.max(SIGMAS * d.stderr),
        ));
        Some(UlamCheck {
            n_bins: opts.n_bins,
            value: fine.value,
            grid_error,
        })
    } else {
        None
    };

    let needs_engine = cfg.equivalence.is_some() || cfg.decay.is_some();
    let orbit = if needs_engine || cfg.ensemble.is_some() {
        Some(generate_orbit_with(&sys, &spec.orbit_spec(0))?)
    } else {
        None
    };
    let ensemble = match (&cfg.ensemble, &orbit) {
        (Some(e), Some(o)) => Some(ensemble_response(&sys, o, e.horizon)?),
        _ => None,
    };
    let (equivalence, decay) = match orbit {
        Some(o) if needs_engine => {
            let engine = Engine::new(&sys, o, spec.options.clone())?;
            let eq = match &cfg.equivalence {
                Some(e) => Some(equivalence_check(&engine, sys.perturbation(), e.w)?),
                None => None,
            };
            let dc = match &cfg.decay {
                Some(s) => Some(decay_check(
                    &sys,
                    engine.orbit(),
                    engine.frames(),
                    s.probes,
                    s.n_max,
                    cfg.seed,
                )?),
                None => None,
            };
            (eq, dc)
        }
        _ => (None, None),
    };
    let pass = triangle.iter().all(|p| p.pass) && equivalence.map_or(true, |e| e.passes(SIGMAS));

    match format {
        Format::Json => Ok(to_json(&Validation {
            system: fast.system.clone(),
            params: fast.params.clone(),
            fast,
            fd,
            ulam,
            triangle,
            equivalence,
            decay,
            ensemble,
            pass,
        })),
        Format::Csv => to_csv(&triangle),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub x: f64,
    pub value: f64,
    pub stderr: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct SweepReport {
    pub axis: Axis,
    pub rows: Vec<SweepRow>,
    /// Log-log slope: `stderr` against `N`, or `|value|` against bin width.
    pub slope: Option<f64>,
}

fn default_values(axis: Axis) -> Vec<f64> {
    match axis {
        Axis::W => vec![],
        Axis::N => vec![1e4, 3e4, 1e5, 3e5],
        Axis::Bins => (6..=12).map(|k| (1u32 << k) as f64).collect(),
        Axis::DeltaGamma => vec![1e-3, 3e-3, 1e-2, 3e-2],
    }
}

fn as_count(v: f64, what: &str) -> Result<usize, CliError> {
    if v >= 1.0 && v.fract() == 0.0 && v < 1e12 {
        Ok(v as usize)
    } else {
        Err(ConfigError::Value(format!("{what} values must be positive integers, got {v}")).into())
    }
}

fn cell_seed(base: u64, i: usize) -> u64 {
    base.wrapping_add((i as u64 + 1).wrapping_mul(0xd1b5_4a32_d192_ed03))
}

pub fn sweep(cfg: &Config, axis: Axis, values: &[f64], format: Format) -> Result<String, CliError> {
    let values = if values.is_empty() {
        default_values(axis)
    } else {
        values.to_vec()
    };
    let sys = cfg.system()?;
    let (rows, slope) = match axis {
        Axis::W => {
            let mut spec = cfg.run_spec();
            if let Some(max) = values.iter().copied().reduce(f64::max) {
                spec.options.w_max = as_count(max, "W")?;
                spec.options.w = spec.options.w.map(|w| w.min(spec.options.w_max));
            }
            let rep = linear_response(&sys, &spec)?;
            let keep: Vec<usize> = values
                .iter()
                .map(|v| as_count(*v, "W"))
                .collect::<Result<_, _>>()?;
            let rows = rep
                .w_sweep
                .iter()
                .filter(|r| keep.is_empty() || keep.contains(&r.w))
                .map(|r| SweepRow {
                    x: r.w as f64,
                    value: r.uc,
                    stderr: Some(r.stderr),
                })
                .collect();
            (rows, None)
        }
        Axis::N => {
            let ns: Vec<usize> = values
                .iter()
                .map(|v| as_count(*v, "N"))
                .collect::<Result<_, _>>()?;
            let rows: Vec<SweepRow> = ns
                .par_iter()
                .enumerate()
                .map(|(i, &n)| {
                    let mut spec = cfg.run_spec();
                    spec.n_steps = n;
                    spec.seed = cell_seed(cfg.seed, i);
                    linear_response(&sys, &spec).map(|r| SweepRow {
                        x: n as f64,
                        value: r.total.value,
                        stderr: Some(r.total.stderr),
                    })
                })
                .collect::<fastresp::Result<_>>()?;
            let xs: Vec<f64> = rows.iter().map(|r| r.x).collect();
            let ys: Vec<f64> = rows.iter().filter_map(|r| r.stderr).collect();
            let slope =
                (rows.len() >= 2 && ys.iter().all(|s| *s > 0.0)).then(|| loglog_slope(&xs, &ys));
            (rows, slope)
        }
        Axis::Bins => {
            let bins: Vec<usize> = values
                .iter()
                .map(|v| as_count(*v, "bins"))
                .collect::<Result<_, _>>()?;
            match &cfg.scaling {
                Some(s) => {
                    let widths: Vec<f64> = bins.iter().map(|b| 1.0 / *b as f64).collect();
                    let rep = ulam_error_scaling(s.a_dim, s.m_dim, &widths, |x| {
                        x.iter().map(|v| v * v).sum()
                    })?;
                    let rows = bins
                        .iter()
                        .zip(&rep.rows)
                        .map(|(b, r)| SweepRow {
                            x: *b as f64,
                            value: r.error,
                            stderr: None,
                        })
                        .collect();
                    (rows, Some(rep.slope).filter(|s| s.is_finite()))
                }
                None => {
                    let base = cfg.ulam.as_ref().map(|u| u.options()).unwrap_or_default();
                    let rows = bins
                        .par_iter()
                        .map(|&n| {
                            ulam_response(&sys, &UlamOptions { n_bins: n, ..base }).map(|r| {
                                SweepRow {
                                    x: n as f64,
                                    value: r.value,
                                    stderr: None,
                                }
                            })
                        })
                        .collect::<fastresp::Result<_>>()?;
                    (rows, None)
                }
            }
        }
        Axis::DeltaGamma => {
            let base = cfg.fd_options();
            let rows = values
                .par_iter()
                .enumerate()
                .map(|(i, &delta)| {
                    let opts = FdOptions {
                        delta,
                        seed: cell_seed(cfg.seed, i),
                        richardson: false,
                        ..base.clone()
                    };
                    fd_response(&sys, &opts).map(|r| SweepRow {
                        x: delta,
                        value: r.estimate.value,
                        stderr: Some(r.estimate.stderr),
                    })
                })
                .collect::<fastresp::Result<_>>()?;
            (rows, None)
        }
    };
    match format {
        Format::Json => Ok(to_json(&SweepReport { axis, rows, slope })),
        Format::Csv => to_csv(&rows),
    }
}
