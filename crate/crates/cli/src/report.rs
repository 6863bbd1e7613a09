//! Report documents. Every report carries `schema_version` and the command
//! that produced it; cell indices are 1-based.

use pwaq_core::certify::{ConditionReport, StabilityConstants};
use pwaq_core::reach::SuccessorMap;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

pub fn one_based(map: &SuccessorMap) -> Vec<Vec<usize>> {
    map.sets.iter().map(|s| s.iter().map(|j| j + 1).collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool) -> Self {
        Check { name: name.into(), pass }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachReport {
    pub schema_version: u32,
    pub command: String,
    pub method: String,
    pub channel: String,
    pub delta: f64,
    pub successors: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRate {
    pub source: usize,
    pub target: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conditions {
    pub gap_ok: bool,
    pub gap_slack: f64,
    pub invariance_ok: bool,
    pub invariance_slack: f64,
}

impl From<ConditionReport> for Conditions {
    fn from(c: ConditionReport) -> Self {
        Conditions { gap_ok: c.gap_ok, gap_slack: c.gap_slack, invariance_ok: c.invariance_ok, invariance_slack: c.invariance_slack }
    }
}

/// Stability constants. Non-finite values serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: Vec<f64>,
    pub m_i: Vec<f64>,
    pub m: f64,
    /// `M_K` (input mode) or `M` (state mode).
    pub radius: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_tilde: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_bar: Option<f64>,
    pub omega: Option<f64>,
    pub k0_bar: Option<f64>,
}

impl Constants {
    pub fn new(c: &StabilityConstants, omega: Option<f64>) -> Self {
        Constants {
            alpha: c.alpha,
            beta: c.beta,
            gamma: c.gamma.clone(),
            m_i: c.m_i.clone(),
            m: c.m,
            radius: c.radius,
            m_tilde: c.m_tilde,
            m_bar: c.m_bar,
            omega,
            k0_bar: c.k0_bar.is_finite().then_some(c.k0_bar),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub schema_version: u32,
    pub command: String,
    pub mode: String,
    pub eps: f64,
    pub delta_param: f64,
    /// `file` when the pieces were supplied, `search` otherwise.
    pub lyapunov_source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    pub successor_map: Vec<Vec<usize>>,
    pub pair_rates: Vec<PairRate>,
    pub constants: Constants,
    pub conditions: Conditions,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfinementResult {
    pub cell: usize,
    pub target: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthReport {
    pub schema_version: u32,
    pub command: String,
    pub variant: String,
    pub status: String,
    pub rounds: usize,
    pub iterations: usize,
    pub trace: f64,
    pub residual: f64,
    pub gains: Vec<Vec<Vec<f64>>>,
    pub successor_map: Vec<Vec<usize>>,
    pub confinements: Vec<ConfinementResult>,
    /// Zoom rate of the state-quantized loop with the default tuning, for
    /// the pieces written to the artifact.
    pub omega_state: Option<f64>,
    /// Same rate for the pieces returned by the CCL iteration.
    pub omega_ccl: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub artifact: Option<String>,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub schema_version: u32,
    pub command: String,
    pub mode: String,
    pub steps: usize,
    pub stop: String,
    pub final_state: Vec<f64>,
    pub final_norm: f64,
    pub zoom_events: usize,
    pub requantized: usize,
    pub omega: Option<f64>,
    pub conditions: Option<Conditions>,
    pub failures: Vec<String>,
    pub trigger_uses_true_state: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub svg: Option<String>,
}

pub fn to_json<T: Serialize>(r: &T) -> String {
    let mut s = serde_json::to_string_pretty(r).expect("report serializes");
    s.push('\n');
    s
}
