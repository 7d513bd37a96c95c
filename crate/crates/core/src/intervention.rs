//! Policy interventions: disrupt an amplifier (change one of its strengths)
//! or exploit it (a one-time transfer the unchanged system then carries),
//! plus the tipping threshold a transfer must cross in an unstable system.
//!
//! Transfers are in the same units as the state: advantaged-group standard
//! deviations.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ensemble::{run_ensemble, EnsembleConfig, Transfer};
use crate::error::{Error, FieldError, Result};
use crate::estimate::{
    interval_verdict_from_margin, longrun_verdict, LongRunMethod, MarginSeries, Mode, Verdict,
};
use crate::norm::NormSpec;
use crate::process::PopulationState;
use crate::rng::RandomStream;
use crate::spectral::{build_expectation_map, eigen_analysis, Classification, ExpectationMap, StabilityReport};
use crate::system::{amplified_trajectory, SpilloverTerm, SystemSpec, Term};

/// Location of one amplifier strength inside a system's terms list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamPath {
    /// `terms[i].b` or `terms[i].c`.
    Strength { term: usize, field: StrengthField },
    /// `terms[i].weights[r][c]`.
    Weight { term: usize, row: usize, col: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrengthField {
    B,
    C,
}

impl fmt::Display for ParamPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamPath::Strength { term, field: StrengthField::B } => write!(f, "terms[{term}].b"),
            ParamPath::Strength { term, field: StrengthField::C } => write!(f, "terms[{term}].c"),
            ParamPath::Weight { term, row, col } => write!(f, "terms[{term}].weights[{row}][{col}]"),
        }
    }
}

fn bracketed(s: &str) -> Option<(usize, &str)> {
    let rest = s.strip_prefix('[')?;
    let close = rest.find(']')?;
    let idx = rest[..close].trim().parse().ok()?;
    Some((idx, &rest[close + 1..]))
}

impl FromStr for ParamPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::PathNotFound(s.to_string());
        let rest = s.trim().strip_prefix("terms").ok_or_else(bad)?;
        let (term, rest) = bracketed(rest).ok_or_else(bad)?;
        let field = rest.strip_prefix('.').ok_or_else(bad)?;
        match field {
            "b" => Ok(ParamPath::Strength { term, field: StrengthField::B }),
            "c" => Ok(ParamPath::Strength { term, field: StrengthField::C }),
            _ => {
                let rest = field.strip_prefix("weights").ok_or_else(bad)?;
                let (row, rest) = bracketed(rest).ok_or_else(bad)?;
                let (col, rest) = bracketed(rest).ok_or_else(bad)?;
                if !rest.is_empty() {
                    return Err(bad());
                }
                Ok(ParamPath::Weight { term, row, col })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InterventionSpec {
    /// Set one amplifier strength (0 removes that coupling).
    Disrupt { parameter: String, value: f64 },
    /// Add `transfer` to the state right after step `time`.
    Exploit {
        transfer: Vec<Vec<f64>>,
        #[serde(default)]
        time: u64,
    },
}

impl InterventionSpec {
    pub fn validate(&self, dims: (usize, usize)) -> Result<()> {
        match self {
            InterventionSpec::Disrupt { parameter, value } => {
                parameter.parse::<ParamPath>()?;
                if !value.is_finite() || *value < 0.0 {
                    return Err(Error::Inadmissible {
                        path: parameter.clone(),
                        reason: format!("strength must be non-negative, got {value}"),
                    });
                }
                Ok(())
            }
            InterventionSpec::Exploit { transfer, .. } => {
                let ok = transfer.len() == dims.0 && transfer.iter().all(|r| r.len() == dims.1);
                if !ok {
                    return Err(Error::InvalidArgument(format!(
                        "transfer must be {}x{}",
                        dims.0, dims.1
                    )));
                }
                if transfer.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument("transfer entries must be finite".into()));
                }
                Ok(())
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DisruptDoc {
    parameter: String,
    value: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExploitDoc {
    transfer: Vec<Vec<f64>>,
    #[serde(default)]
    time: u64,
}

fn located<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> Result<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { String::new() } else { path };
        Error::Scenario(vec![FieldError::new(path, e.into_inner().to_string())])
    })
}

/// Parses an intervention document, reporting the failing field path.
pub fn parse_intervention(document: &str) -> Result<InterventionSpec> {
    let bad = |path: &str, msg: String| Error::Scenario(vec![FieldError::new(path, msg)]);
    let v: serde_json::Value = serde_json::from_str(document).map_err(|e| bad("", e.to_string()))?;
    let serde_json::Value::Object(mut map) = v else {
        return Err(bad("", "expected an object".into()));
    };
    let kind = match map.remove("kind") {
        Some(serde_json::Value::String(k)) => k,
        Some(_) => return Err(bad("kind", "expected a string".into())),
        None => return Err(bad("kind", "missing field `kind`".into())),
    };
    let rest = serde_json::Value::Object(map);
    match kind.as_str() {
        "disrupt" => located::<DisruptDoc>(rest).map(|d| InterventionSpec::Disrupt { parameter: d.parameter, value: d.value }),
        "exploit" => located::<ExploitDoc>(rest).map(|d| InterventionSpec::Exploit { transfer: d.transfer, time: d.time }),
        other => Err(bad("kind", format!("unknown variant `{other}`, expected `disrupt` or `exploit`"))),
    }
}

/// Returns a copy of `spec` with the strength at `path` set to `value`.
pub fn set_parameter(spec: &SystemSpec, path: ParamPath, value: f64) -> Result<SystemSpec> {
    let name = path.to_string();
    if !value.is_finite() || value < 0.0 {
        return Err(Error::Inadmissible { path: name, reason: format!("strength must be non-negative, got {value}") });
    }
    let idx = match path {
        ParamPath::Strength { term, .. } | ParamPath::Weight { term, .. } => term,
    };
    let mut terms = spec.terms.clone();
    let term = terms.get_mut(idx).ok_or_else(|| Error::PathNotFound(name.clone()))?;
    let remove = value == 0.0;
    let mut replacement: Option<Option<Term>> = None;
    match (term, path) {
        (Term::Spillover(t), ParamPath::Strength { field: StrengthField::B, .. }) => {
            if remove {
                replacement = Some(None);
            } else {
                t.b = value;
            }
        }
        (Term::Synergy(t), ParamPath::Strength { field: StrengthField::C, .. }) => {
            if remove {
                replacement = Some(None);
            } else {
                t.c = value;
            }
        }
        (Term::Reinforcement(t), ParamPath::Strength { field, .. }) => {
            if t.is_direct() {
                if remove {
                    replacement = Some(None);
                } else {
                    t.b = value;
                    t.c = value;
                }
            } else if remove {
                // The surviving direction is a plain spillover.
                let (target, source, b) = match field {
                    StrengthField::B => (t.k, t.j, t.c),
                    StrengthField::C => (t.j, t.k, t.b),
                };
                replacement = Some(Some(Term::Spillover(SpilloverTerm {
                    persons: t.persons.clone(),
                    target,
                    source,
                    b,
                })));
            } else {
                match field {
                    StrengthField::B => t.b = value,
                    StrengthField::C => t.c = value,
                }
            }
        }
        (Term::Multiplier(t), ParamPath::Weight { row, col, .. }) => {
            let cell = t
                .weights
                .get_mut(row)
                .and_then(|r| r.get_mut(col))
                .ok_or_else(|| Error::PathNotFound(name.clone()))?;
            if row == col && value != 0.0 {
                return Err(Error::Inadmissible { path: name, reason: "multiplier diagonal must stay zero".into() });
            }
            *cell = value;
        }
        _ => return Err(Error::PathNotFound(name)),
    }
    match replacement {
        Some(None) => {
            terms.remove(idx);
        }
        Some(Some(t)) => terms[idx] = t,
        None => {}
    }
    spec.with_terms(terms).map_err(|e| Error::Inadmissible { path: name, reason: e.to_string() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisruptOutcome {
    pub parameter: String,
    pub value: f64,
    pub before: StabilityReport,
    pub after: StabilityReport,
    pub phase_transition: bool,
    #[serde(skip)]
    pub spec: Option<SystemSpec>,
}

pub fn apply_disrupt(spec: &SystemSpec, parameter: &str, value: f64) -> Result<DisruptOutcome> {
    let path: ParamPath = parameter.parse()?;
    let new_spec = set_parameter(spec, path, value)?;
    let before = eigen_analysis(&build_expectation_map(spec)?)?;
    let after = eigen_analysis(&build_expectation_map(&new_spec)?)?;
    Ok(DisruptOutcome {
        parameter: path.to_string(),
        value,
        phase_transition: before.classification != after.classification,
        before,
        after,
        spec: Some(new_spec),
    })
}

/// Trajectory after adding `transfer` to `state` (at the state's own time),
/// under the unchanged system.
pub fn apply_exploit(
    state: &PopulationState,
    transfer: &PopulationState,
    spec: &SystemSpec,
    horizon: usize,
    stream: RandomStream,
) -> Result<Vec<PopulationState>> {
    let start = state.add(transfer)?;
    amplified_trajectory(&start, spec, horizon, stream)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fate {
    /// Diverges along the dominant eigenvector.
    Positive,
    /// Diverges along its negative.
    Negative,
    OnSeparatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TippingReport {
    pub spectral_radius: f64,
    pub unstable_eigenvector: Vec<f64>,
    pub mode_vector: Vec<f64>,
    pub initial_mode_coordinate: f64,
    pub direction: Vec<f64>,
    /// Magnitude at which the dominant-mode coordinate reaches zero.
    pub critical_magnitude: f64,
    /// Same threshold located by bisection on simulated zero-shock paths.
    pub bisection_magnitude: f64,
    pub bisection_horizon: usize,
    pub fate_without_transfer: Fate,
    pub fate_past_threshold: Fate,
}

/// Terminal direction of the zero-shock path from `state`, read off its
/// projection on the dominant eigenvector. The state is renormalized each
/// step so long horizons cannot overflow.
fn simulated_fate(map: &ExpectationMap, state: &[f64], eigvec: &[f64], horizon: usize) -> Fate {
    let mut y = state.to_vec();
    for _ in 0..horizon {
        y = map.apply(&y);
        let n = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n == 0.0 {
            return Fate::OnSeparatrix;
        }
        y.iter_mut().for_each(|v| *v /= n);
    }
    let proj: f64 = y.iter().zip(eigvec).map(|(a, b)| a * b).sum();
    if proj > 0.0 {
        Fate::Positive
    } else if proj < 0.0 {
        Fate::Negative
    } else {
        Fate::OnSeparatrix
    }
}

/// Dominant-mode coordinate `w·Aᵀ·y` of the zero-shock state after `horizon` steps.
pub fn terminal_mode_coordinate(map: &ExpectationMap, state: &[f64], horizon: usize) -> Result<f64> {
    let report = eigen_analysis(map)?;
    let end = map.propagate(state, horizon);
    report
        .mode_coordinate(&end)
        .ok_or_else(|| Error::InvalidArgument("map has no real dominant eigenvalue".into()))
}

/// Horizon long enough that subdominant modes cannot flip the simulated fate
/// near the threshold.
fn bisection_horizon(report: &StabilityReport, minimum: usize) -> usize {
    let rho = report.spectral_radius;
    let second = report
        .eigenvalues
        .iter()
        .map(|z| z.modulus())
        .filter(|m| *m < rho * (1.0 - 1e-9))
        .fold(0.0, f64::max);
    if second <= 0.0 {
        return minimum;
    }
    let needed = (1e-16f64.ln() / (second / rho).ln()).ceil();
    (needed as usize).clamp(minimum, 100_000)
}

pub fn tipping_threshold(map: &ExpectationMap, state0: &[f64], direction: &[f64]) -> Result<TippingReport> {
    tipping_threshold_with_horizon(map, state0, direction, 50)
}

pub fn tipping_threshold_with_horizon(
    map: &ExpectationMap,
    state0: &[f64],
    direction: &[f64],
    min_horizon: usize,
) -> Result<TippingReport> {
    let n = map.dimension;
    if state0.len() != n || direction.len() != n {
        return Err(Error::InvalidArgument(format!("state and direction must have {n} entries")));
    }
    let report = eigen_analysis(map)?;
    if report.classification != Classification::Unstable {
        let label = match report.classification {
            Classification::Stable => "stable",
            _ => "knife-edge",
        };
        return Err(Error::NoTippingPoint(label.into()));
    }
    let w = report
        .dominant_left_eigenvector
        .clone()
        .ok_or_else(|| Error::NoTippingPoint("without a real dominant mode".into()))?;
    let v = report.dominant_eigenvector.clone().expect("paired with left vector");

    let dnorm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(dnorm.is_finite() && dnorm > 0.0) {
        return Err(Error::InvalidArgument("direction must be a non-zero finite vector".into()));
    }
    let dir: Vec<f64> = direction.iter().map(|x| x / dnorm).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut c0 = dot(&w, state0);
    let scale0 = state0.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if c0.abs() <= 1e-12 * scale0 {
        c0 = 0.0;
    }
    let cd = dot(&w, &dir);
    if cd.abs() <= 1e-12 {
        return Err(Error::Unreachable("direction is orthogonal to the unstable mode".into()));
    }
    let tau = if c0 == 0.0 { 0.0 } else { -c0 / cd };
    if tau < 0.0 {
        return Err(Error::Unreachable("direction pushes further along the unstable mode".into()));
    }

    let horizon = bisection_horizon(&report, min_horizon);
    let fate_at = |t: f64| {
        let s: Vec<f64> = state0.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
        simulated_fate(map, &s, &v, horizon)
    };
    let start = fate_at(0.0);
    let bisection = if start == Fate::OnSeparatrix {
        0.0
    } else {
        let scale = state0.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1.0);
        let mut lo = 0.0;
        let mut hi = scale;
        let mut doublings = 0;
        while fate_at(hi) == start {
            lo = hi;
            hi *= 2.0;
            doublings += 1;
            if doublings > 80 {
                return Err(Error::Unreachable("bisection found no sign change".into()));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if fate_at(mid) == start {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-13 * hi.max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    };

    let fate_past_threshold = fate_at(tau + 1e-6 * tau.max(1.0));
    Ok(TippingReport {
        spectral_radius: report.spectral_radius,
        unstable_eigenvector: v,
        mode_vector: w,
        initial_mode_coordinate: c0,
        direction: dir,
        critical_magnitude: tau,
        bisection_magnitude: bisection,
        bisection_horizon: horizon,
        fate_without_transfer: start,
        fate_past_threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeComparison {
    pub intervention: InterventionSpec,
    /// `μ(E[Y_intervened]) − μ(E[Y_status_quo])`, coupled.
    pub margin: MarginSeries,
    pub interval_before: Option<Verdict>,
    pub interval_after: Option<Verdict>,
    pub longrun_before: Verdict,
    pub longrun_after: Verdict,
    pub classification_before: Classification,
    pub classification_after: Classification,
}

impl RegimeComparison {
    pub fn verdicts_changed(&self) -> bool {
        self.longrun_before.holds != self.longrun_after.holds
            || self.interval_before.as_ref().map(|v| v.holds) != self.interval_after.as_ref().map(|v| v.holds)
    }
}

/// Runs status quo and intervention side by side on common random numbers.
pub fn compare_regimes(
    spec: &SystemSpec,
    state0: &PopulationState,
    intervention: &InterventionSpec,
    cfg: &EnsembleConfig,
    norm: NormSpec,
    interval: Option<[usize; 2]>,
) -> Result<RegimeComparison> {
    intervention.validate(spec.dims())?;
    let (new_spec, new_cfg, longrun_state) = match intervention {
        InterventionSpec::Disrupt { parameter, value } => {
            let path: ParamPath = parameter.parse()?;
            (set_parameter(spec, path, *value)?, cfg.clone(), state0.clone())
        }
        InterventionSpec::Exploit { transfer, time } => {
            let values: Vec<f64> = transfer.concat();
            let shifted = if *time == 0 {
                state0.add(&PopulationState::new(spec.n_persons, spec.n_inequities, values.clone())?)?
            } else {
                state0.clone()
            };
            let c = cfg.clone().with_transfer(Transfer { time: *time, values });
            (spec.clone(), c, shifted)
        }
    };

    let baseline = spec.without_terms();
    let x = run_ensemble(&baseline, state0, cfg)?;
    let y = run_ensemble(spec, state0, cfg)?;
    let y_new = run_ensemble(&new_spec, state0, &new_cfg)?;
    let x_new = run_ensemble(&new_spec.without_terms(), state0, &new_cfg)?;

    let margin = MarginSeries::coupled(&y, &y_new, norm, Mode::MeanLevel)?;
    let (interval_before, interval_after) = match interval {
        Some(b) => {
            let before = MarginSeries::coupled(&x, &y, norm, Mode::MeanLevel)?;
            let after = MarginSeries::coupled(&x_new, &y_new, norm, Mode::MeanLevel)?;
            (
                Some(interval_verdict_from_margin(&before, b)?),
                Some(interval_verdict_from_margin(&after, b)?),
            )
        }
        None => (None, None),
    };
    let longrun_before = longrun_verdict(spec, state0, &LongRunMethod::Spectral)?;
    let longrun_after = longrun_verdict(&new_spec, &longrun_state, &LongRunMethod::Spectral)?;
    Ok(RegimeComparison {
        intervention: intervention.clone(),
        margin,
        interval_before,
        interval_after,
        classification_before: eigen_analysis(&build_expectation_map(spec)?)?.classification,
        classification_after: eigen_analysis(&build_expectation_map(&new_spec)?)?.classification,
        longrun_before,
        longrun_after,
    })
}
