use extham_core::brackets::ScanStats;
use extham_core::dynamics::DriftReport;
use extham_core::noether::{ScaledRotation, SymmetryDelta};
use extham_core::phase_space::ExtendedState;
use extham_core::verification::{Check, CriterionOutcome};
use serde::Serialize;

use crate::config::ScenarioConfig;

#[derive(Debug, Clone, Serialize)]
pub struct BracketEntry {
    pub invariant: String,
    #[serde(flatten)]
    pub stats: ScanStats,
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetryEntry {
    pub invariant: String,
    pub initial: ExtendedState,
    pub delta: SymmetryDelta,
    pub transformed: ExtendedState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scaled_rotation: Option<ScaledRotation>,
    /// Flows compared point by point after the same parameter span.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub commutation_residual: Option<f64>,
    /// Transformed end point compared with the orbit through the transformed
    /// start, matched in t.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orbit_commutation_residual: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub samples: usize,
    pub param_end: f64,
    pub t_end: f64,
    /// (t_end − t_start) / (param_end − param_start); 1 for the conventional
    /// parametrization, dt/ds along an extended run.
    pub mean_dt_dparam: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<ScenarioConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub drift: Vec<DriftReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub brackets: Vec<BracketEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub symmetry: Vec<SymmetryEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub criteria: Vec<CriterionOutcome>,
    pub verdicts: Vec<Check>,
    pub passed: bool,
}

impl CheckReport {
    pub fn new(command: &'static str, config: Option<ScenarioConfig>) -> Self {
        Self {
            command,
            config,
            simulation: None,
            drift: Vec::new(),
            brackets: Vec::new(),
            symmetry: Vec::new(),
            criteria: Vec::new(),
            verdicts: Vec::new(),
            passed: true,
        }
    }

    /// Recompute the overall verdict from the contained checks.
    pub fn finish(mut self) -> Self {
        self.passed = self
            .verdicts
            .iter()
            .filter(|c| !c.informational)
            .all(|c| c.passed)
            && self.criteria.iter().all(CriterionOutcome::passed);
        self
    }
}
