//! Stability and threshold reports for a whole scenario.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::spectral::{
    build_expectation_map, critical_amplifier_scale, eigen_analysis, stability_threshold, ExpectationMap,
    StabilityReport, ThresholdMechanism, ThresholdReport,
};
use crate::system::{SystemSpec, Term};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSummary {
    /// Closed-form boundary for a single recognized mechanism.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<ThresholdReport>,
    /// Factor on every coupling (diagonal decay kept) that puts ρ at one.
    pub critical_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub map: ExpectationMap,
    pub stability: StabilityReport,
    pub thresholds: ThresholdSummary,
}

/// The closed-form mechanism matching `spec`, if it has exactly one term
/// of a solvable shape.
pub fn recognized_mechanism(spec: &SystemSpec) -> Option<ThresholdMechanism> {
    let delta = spec.delta.value();
    match spec.terms.as_slice() {
        [Term::Reinforcement(t)] if spec.n_persons == 1 && spec.n_inequities == 2 && !t.is_direct() => {
            Some(ThresholdMechanism::Reinforcement { delta, b: Some(t.b) })
        }
        [Term::Multiplier(t)] if spec.n_inequities == 1 && spec.n_persons == 2 && t.weights[1][0] > 0.0 => {
            Some(ThresholdMechanism::TwoAgentMultiplier { delta, d2: t.weights[1][0] })
        }
        [Term::Multiplier(t)] if spec.n_inequities == 1 && spec.n_persons > 2 => {
            let d = t.weights[0][1];
            let common = t
                .weights
                .iter()
                .enumerate()
                .all(|(i, row)| row.iter().enumerate().all(|(k, &w)| i == k || w == d));
            common.then_some(ThresholdMechanism::CommonMultiplier { delta, persons: spec.n_persons })
        }
        _ => None,
    }
}

pub fn threshold_summary(spec: &SystemSpec) -> Result<ThresholdSummary> {
    let map = build_expectation_map(spec)?;
    let closed_form = recognized_mechanism(spec).map(stability_threshold).transpose()?;
    Ok(ThresholdSummary { closed_form, critical_scale: critical_amplifier_scale(&map, spec.delta.value())? })
}

pub fn analyze(spec: &SystemSpec) -> Result<AnalysisReport> {
    let map = build_expectation_map(spec)?;
    let stability = eigen_analysis(&map)?;
    Ok(AnalysisReport { thresholds: threshold_summary(spec)?, stability, map })
}
