use crate::stats::Estimate;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Result of a response run. Serialized field order is fixed so identical
/// runs give byte-identical JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseReport {
    pub system: String,
    pub params: BTreeMap<String, f64>,
    pub n_steps: usize,
    pub replicas: usize,
    pub seed: u64,
    pub centered: bool,
    /// `W` used for `uc` and `total`.
    pub w: usize,
    /// `"config"` or `"plateau"`.
    pub w_selected_by: String,
    pub sc: Estimate,
    pub uc: Estimate,
    pub total: Estimate,
    pub w_sweep: Vec<SweepRow>,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub w: usize,
    pub uc: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Unstable Lyapunov exponents, averaged over replicas.
    pub lyapunov: Vec<f64>,
    /// Largest defining-equation residual of the adjoint shadows.
    pub shadowing_residual: f64,
    /// Relative truncation bound of the shadowing windows.
    pub tail_bound: f64,
    /// Mean of `δL^uσ/σ`, which should vanish.
    pub zero_mean: Estimate,
    /// Largest condition number of `A_n Q_n` used.
    pub max_condition: f64,
    pub samples_per_replica: usize,
}

impl ResponseReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
