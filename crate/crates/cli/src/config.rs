//! Versioned JSON run configuration. Unknown keys are rejected.

use fastresp::oracles::{FdOptions, UlamOptions};
use fastresp::response::ResponseOptions;
use fastresp::{make_builtin, FrameOptions, RunSpec, ScalarField, SystemDef, VectorField};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("config schema: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("config schema: unsupported version {0} (expected {SCHEMA_VERSION})")]
    Version(u32),
    #[error("config schema: {0}")]
    Value(String),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    /// The system's built-in `X`.
    #[default]
    Default,
    Zero,
    Custom(VectorField),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    #[default]
    Default,
    Custom(ScalarField),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdSection {
    #[serde(default = "FdSection::default_delta")]
    pub delta: f64,
    #[serde(default = "FdSection::default_pairs")]
    pub pairs: usize,
    /// Orbit length per side; defaults to the run's `n_steps`.
    pub n_steps: Option<usize>,
    #[serde(default)]
    pub richardson: bool,
}

impl FdSection {
    fn default_delta() -> f64 {
        FdOptions::default().delta
    }
    fn default_pairs() -> usize {
        8
    }
}

impl Default for FdSection {
    fn default() -> Self {
        FdSection {
            delta: Self::default_delta(),
            pairs: Self::default_pairs(),
            n_steps: None,
            richardson: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UlamSection {
    #[serde(default = "UlamSection::default_bins")]
    pub bins: usize,
    #[serde(default = "UlamSection::default_terms")]
    pub n_terms: usize,
    #[serde(default = "UlamSection::default_delta")]
    pub delta: f64,
}

impl UlamSection {
    fn default_bins() -> usize {
        UlamOptions::default().n_bins
    }
    fn default_terms() -> usize {
        UlamOptions::default().n_terms
    }
    fn default_delta() -> f64 {
        UlamOptions::default().delta
    }

    pub fn options(&self) -> UlamOptions {
        UlamOptions {
            n_bins: self.bins,
            n_terms: self.n_terms,
            delta: self.delta,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivalenceSection {
    pub w: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySection {
    #[serde(default = "DecaySection::default_probes")]
    pub probes: usize,
    #[serde(default = "DecaySection::default_n_max")]
    pub n_max: usize,
}

impl DecaySection {
    fn default_probes() -> usize {
        20
    }
    fn default_n_max() -> usize {
        12
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub horizon: usize,
}

/// Toy singular measure for the `bins` sweep: transverse dimension
/// `m_dim − a_dim`, observable `|x|²`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSection {
    pub a_dim: usize,
    pub m_dim: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum Axis {
    #[serde(rename = "W")]
    #[value(name = "W", alias = "w")]
    W,
    #[serde(rename = "N")]
    #[value(name = "N", alias = "n")]
    N,
    #[serde(rename = "bins")]
    #[value(name = "bins")]
    Bins,
    #[serde(rename = "delta_gamma")]
    #[value(name = "delta_gamma")]
    DeltaGamma,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: Axis,
    #[serde(default)]
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    pub system: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub perturbation: Perturbation,
    #[serde(default)]
    pub observable: Observable,
    #[serde(default = "Config::default_n_steps")]
    pub n_steps: usize,
    #[serde(default = "Config::default_spinup")]
    pub spinup: usize,
    #[serde(default = "Config::default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub seed: u64,
    pub dither: Option<bool>,
    #[serde(default = "Config::default_margin")]
    pub margin: usize,
    pub w: Option<usize>,
    #[serde(default = "Config::default_w_max")]
    pub w_max: usize,
    #[serde(default = "Config::default_centered")]
    pub centered: bool,
    pub fd: Option<FdSection>,
    pub ulam: Option<UlamSection>,
    pub equivalence: Option<EquivalenceSection>,
    pub decay: Option<DecaySection>,
    pub ensemble: Option<EnsembleSection>,
    pub scaling: Option<ScalingSection>,
    pub sweep: Option<SweepSection>,
}

impl Config {
    fn default_n_steps() -> usize {
        100_000
    }
    fn default_spinup() -> usize {
        fastresp::orbit::DEFAULT_SPINUP
    }
    fn default_replicas() -> usize {
        1
    }
    fn default_margin() -> usize {
        ResponseOptions::default().margin
    }
    fn default_w_max() -> usize {
        ResponseOptions::default().w_max
    }
    fn default_centered() -> bool {
        ResponseOptions::default().centered
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Config::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let cfg: Config = serde_json::from_str(text)?;
        if cfg.version != SCHEMA_VERSION {
            return Err(ConfigError::Version(cfg.version));
        }
        if cfg.n_steps == 0 || cfg.replicas == 0 {
            return Err(ConfigError::Value(
                "`n_steps` and `replicas` must be positive".into(),
            ));
        }
        if let Some(w) = cfg.w {
            if w > cfg.w_max {
                return Err(ConfigError::Value(format!(
                    "`w` = {w} exceeds `w_max` = {}",
                    cfg.w_max
                )));
            }
        }
        Ok(cfg)
    }

    /// The configured system with `X` and `Φ` applied.
    pub fn system(&self) -> fastresp::Result<SystemDef> {
        let mut sys = make_builtin(&self.system, &self.params)?;
        match &self.perturbation {
            Perturbation::Default => {}
            Perturbation::Zero => {
                let m = sys.dim();
                sys = sys.with_perturbation(VectorField::zero(m));
            }
            Perturbation::Custom(x) => {
                if x.dim() != sys.dim() {
                    return Err(fastresp::Error::Invalid(format!(
                        "perturbation has {} components, `{}` has dimension {}",
                        x.dim(),
                        self.system,
                        sys.dim()
                    )));
                }
                sys = sys.with_perturbation(x.clone());
            }
        }
        if let Observable::Custom(phi) = &self.observable {
            sys = sys.with_observable(phi.clone());
        }
        Ok(sys)
    }

    pub fn run_spec(&self) -> RunSpec {
        RunSpec {
            n_steps: self.n_steps,
            spinup: self.spinup,
            replicas: self.replicas,
            seed: self.seed,
            dither: self.dither,
            options: ResponseOptions {
                margin: self.margin,
                w: self.w,
                w_max: self.w_max,
                centered: self.centered,
                frames: FrameOptions::seeded(self.seed),
            },
        }
    }

    pub fn fd_options(&self) -> FdOptions {
        let s = self.fd.clone().unwrap_or_default();
        FdOptions {
            delta: s.delta,
            n_steps: s.n_steps.unwrap_or(self.n_steps),
            pairs: s.pairs,
            spinup: self.spinup,
            seed: self.seed,
            richardson: s.richardson,
            dither: self.dither,
        }
    }
}
