//! JSON scenario documents.
//!
//! A scenario bundles a system, an initial state and run settings. Only
//! `name`, `dimensions` and `delta` are required:
//!
//! ```json
//! {"name": "quiet", "dimensions": {"persons": 1, "inequities": 1}, "delta": 0.5}
//! ```
//!
//! `initial_state` is a persons × inequities matrix (rows are persons) and
//! defaults to all zeros.

use serde::{Deserialize, Serialize};

use crate::ensemble::{EnsembleConfig, Sampling, Transfer};
use crate::error::{Error, FieldError, Result};
use crate::estimate::Mode;
use crate::intervention::InterventionSpec;
use crate::norm::NormSpec;
use crate::process::{DecayFactor, PopulationState, ShockModel};
use crate::system::{validate_system, SystemSpec, Term, MAX_DIMENSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dimensions {
    pub persons: usize,
    pub inequities: usize,
    /// Names of the inequity dimensions, one per inequity when given.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
}

fn default_shock() -> ShockModel {
    ShockModel::DegenerateZero
}

fn default_horizon() -> usize {
    100
}

fn default_paths() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub dimensions: Dimensions,
    pub delta: f64,
    #[serde(default = "default_shock")]
    pub shock: ShockModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub terms: Vec<Term>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub norm: NormSpec,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervention: Option<InterventionSpec>,
}

impl ScenarioFile {
    /// Baseline-only scenario with default run settings.
    pub fn minimal(name: &str, persons: usize, inequities: usize, delta: f64) -> Self {
        Self {
            name: name.to_string(),
            description: None,
            dimensions: Dimensions { persons, inequities, labels: Vec::new() },
            delta,
            shock: default_shock(),
            initial_state: None,
            terms: Vec::new(),
            horizon: default_horizon(),
            paths: default_paths(),
            seed: 0,
            norm: NormSpec::default(),
            mode: Mode::default(),
            sampling: Sampling::default(),
            interval: None,
            intervention: None,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.dimensions.persons, self.dimensions.inequities)
    }

    /// Every problem in the document, each tagged with its field path.
    pub fn validate(&self) -> Vec<FieldError> {
        let mut errs = Vec::new();
        let (n, m) = self.dims();
        if n == 0 {
            errs.push(FieldError::new("dimensions.persons", "must be at least 1"));
        }
        if m == 0 {
            errs.push(FieldError::new("dimensions.inequities", "must be at least 1"));
        }
        let sized = n.checked_mul(m).is_some_and(|d| d <= MAX_DIMENSION);
        if !sized {
            errs.push(FieldError::new("dimensions", format!("persons x inequities must not exceed {MAX_DIMENSION}")));
        }
        if !self.dimensions.labels.is_empty() && self.dimensions.labels.len() != m {
            errs.push(FieldError::new(
                "dimensions.labels",
                format!("expected {m} labels, got {}", self.dimensions.labels.len()),
            ));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            errs.push(FieldError::new("delta", "must lie in open interval (0,1)"));
        }
        if let Err(e) = self.shock.validate() {
            errs.push(FieldError::new("shock", e.to_string()));
        }
        if let Some(rows) = &self.initial_state {
            if rows.len() != n {
                errs.push(FieldError::new("initial_state", format!("expected {n} rows, got {}", rows.len())));
            }
            for (i, r) in rows.iter().enumerate() {
                if r.len() != m {
                    errs.push(FieldError::new(format!("initial_state[{i}]"), format!("expected {m} entries, got {}", r.len())));
                }
                if r.iter().any(|v| !v.is_finite()) {
                    errs.push(FieldError::new(format!("initial_state[{i}]"), "entries must be finite"));
                }
            }
        }
        if self.horizon == 0 {
            errs.push(FieldError::new("horizon", "must be at least 1"));
        }
        if self.paths == 0 {
            errs.push(FieldError::new("paths", "must be at least 1"));
        }
        if self.sampling == Sampling::Antithetic && !self.paths.is_multiple_of(2) {
            errs.push(FieldError::new("paths", "must be even under antithetic sampling"));
        }
        if let Some([lo, hi]) = self.interval {
            if lo > hi {
                errs.push(FieldError::new("interval", format!("start {lo} exceeds end {hi}")));
            } else if hi > self.horizon {
                errs.push(FieldError::new("interval", format!("end {hi} exceeds horizon {}", self.horizon)));
            }
        }
        if n > 0 && m > 0 && sized && (self.delta > 0.0 && self.delta < 1.0) && self.shock.validate().is_ok() {
            let spec = self.unchecked_system();
            for v in validate_system(&spec).violations {
                let path = match v.term {
                    Some(i) => format!("terms[{i}]"),
                    None => "terms".to_string(),
                };
                errs.push(FieldError::new(path, v.reason));
            }
        }
        if let Some(iv) = &self.intervention {
            if let Err(e) = iv.validate((n, m)) {
                errs.push(FieldError::new("intervention", e.to_string()));
            }
        }
        errs
    }

    fn unchecked_system(&self) -> SystemSpec {
        SystemSpec {
            delta: DecayFactor::new(self.delta).unwrap_or_else(|_| DecayFactor::new(0.5).expect("valid")),
            shock: self.shock,
            n_persons: self.dimensions.persons,
            n_inequities: self.dimensions.inequities,
            terms: self.terms.clone(),
        }
    }

    pub fn system(&self) -> Result<SystemSpec> {
        let errs = self.validate();
        if !errs.is_empty() {
            return Err(Error::Scenario(errs));
        }
        Ok(self.unchecked_system())
    }

    pub fn initial(&self) -> Result<PopulationState> {
        let (n, m) = self.dims();
        match &self.initial_state {
            Some(rows) => PopulationState::from_rows(rows),
            None => PopulationState::zeros(n, m),
        }
    }

    pub fn ensemble_config(&self) -> EnsembleConfig {
        EnsembleConfig::new(self.horizon, self.paths, self.seed).with_sampling(self.sampling)
    }

    /// Config for the intervened run: an exploit transfer is attached, a
    /// disrupt leaves the config unchanged.
    pub fn intervened_config(&self) -> EnsembleConfig {
        let cfg = self.ensemble_config();
        match &self.intervention {
            Some(InterventionSpec::Exploit { transfer, time }) => {
                cfg.with_transfer(Transfer { time: *time, values: transfer.concat() })
            }
            _ => cfg,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

/// Parses and fully validates a scenario document.
pub fn parse_scenario(document: &str) -> Result<ScenarioFile> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let scenario: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { String::new() } else { path };
        Error::Scenario(vec![FieldError::new(path, e.into_inner().to_string())])
    })?;
    let errs = scenario.validate();
    if errs.is_empty() {
        Ok(scenario)
    } else {
        Err(Error::Scenario(errs))
    }
}
