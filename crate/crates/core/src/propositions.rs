//! Numerical checks that each single amplifier behaves as claimed: raises
//! expected inequity on an interval, leaves the long run alone, or (when
//! strong enough) changes the long run.
//!
//! Every check runs in mean-level mode on a preset, optionally with
//! parameter overrides, and records enough evidence to recompute its verdict.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{run_ensemble, Sampling};
use crate::error::{Error, Result};
use crate::estimate::{MarginPoint, MarginSeries, Mode};
use crate::presets::load_preset;
use crate::process::ShockModel;
use crate::scenario::ScenarioFile;
use crate::spectral::{build_expectation_map, eigen_analysis};
use crate::system::{amplified_trajectory, Term};
use crate::rng::RandomStream;

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_PATHS: usize = 10_000;
pub const DEFAULT_HORIZON: usize = 200;
pub const DEFAULT_INTERVAL: [usize; 2] = [1, 50];
pub const TERMINAL_MARGIN_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PropositionId {
    P1,
    P2,
    P3,
    P4,
    P5,
    P6,
    P7,
    P8,
}

impl PropositionId {
    pub const ALL: [PropositionId; 8] = [
        PropositionId::P1,
        PropositionId::P2,
        PropositionId::P3,
        PropositionId::P4,
        PropositionId::P5,
        PropositionId::P6,
        PropositionId::P7,
        PropositionId::P8,
    ];

    fn index(self) -> u64 {
        self as u64 + 1
    }

    pub fn kind(self) -> CheckKind {
        use PropositionId::*;
        match self {
            P1 | P3 | P5 | P7 => CheckKind::Interval,
            P2 | P4 => CheckKind::NotLongRun,
            P6 | P8 => CheckKind::LongRun,
        }
    }

    pub fn preset(self) -> &'static str {
        use PropositionId::*;
        match self {
            P1 | P2 => "spillover-demo",
            P3 | P4 => "synergy-demo",
            P5 => "fig1-weak",
            P6 => "fig1-strong",
            P7 => "fig2-stable",
            P8 => "fig2-unstable",
        }
    }

    pub fn statement(self) -> &'static str {
        use PropositionId::*;
        match self {
            P1 => "spillover raises expected inequity over an interval",
            P2 => "spillover alone leaves the long-run expectation at zero",
            P3 => "synergy raises expected inequity over an interval",
            P4 => "synergy alone leaves the long-run expectation at zero",
            P5 => "social multipliers raise expected inequity over an interval",
            P6 => "strong social multipliers keep expected inequity from vanishing",
            P7 => "reinforcement raises expected inequity over an interval",
            P8 => "strong reinforcement keeps expected inequity from vanishing",
        }
    }

    /// Parameter names accepted as overrides besides `delta`.
    fn parameters(self) -> &'static [&'static str] {
        use PropositionId::*;
        match self {
            P1 | P2 => &["b"],
            P3 | P4 => &["c", "sigma"],
            P5 | P6 => &["d1", "d2"],
            P7 | P8 => &["b", "c"],
        }
    }
}

impl fmt::Display for PropositionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for PropositionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown proposition `{s}` (expected P1..P8)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    /// Coupled margin positive with 95% confidence at every t in the interval.
    Interval,
    /// Terminal margin below tolerance and ρ < 1.
    NotLongRun,
    /// ρ > 1 and the margin increasing over the final quartile.
    LongRun,
}

/// Run settings and parameter overrides for one check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOptions {
    pub seed: u64,
    pub paths: usize,
    pub horizon: usize,
    pub interval: [usize; 2],
    pub overrides: BTreeMap<String, f64>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            paths: DEFAULT_PATHS,
            horizon: DEFAULT_HORIZON,
            interval: DEFAULT_INTERVAL,
            overrides: BTreeMap::new(),
        }
    }
}

impl CheckOptions {
    pub fn with_override(mut self, key: &str, value: f64) -> Self {
        self.overrides.insert(key.to_string(), value);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Parses `key=value`.
pub fn parse_override(text: &str) -> Result<(String, f64)> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| Error::InvalidArgument(format!("override `{text}` is not key=value")))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("override `{text}` has a non-numeric value")))?;
    Ok((k.trim().to_string(), v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub confidence: f64,
    pub terminal_margin: f64,
    pub interval: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub spectral_radius: f64,
    /// Coupled mean-level margins: the interval window, the terminal point,
    /// or the final quartile, depending on the check kind.
    pub margins: Vec<MarginPoint>,
    /// Zero-shock margins on the interval (interval checks for spillover,
    /// multipliers and reinforcement).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deterministic_margins: Option<Vec<MarginPoint>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropositionCheck {
    pub id: PropositionId,
    pub statement: String,
    pub kind: CheckKind,
    pub mode: Mode,
    pub scenario: ScenarioFile,
    pub tolerances: Tolerances,
    pub evidence: Evidence,
    pub passed: bool,
}

/// The verdict implied by a check's evidence and tolerances alone.
pub fn recompute_passed(check: &PropositionCheck) -> bool {
    let ev = &check.evidence;
    match check.kind {
        CheckKind::Interval => {
            let [lo, hi] = check.tolerances.interval;
            let covers = |ms: &[MarginPoint]| (lo..=hi).all(|t| ms.iter().any(|p| p.t == t));
            let stochastic = covers(&ev.margins) && ev.margins.iter().all(|p| p.lower() > 0.0);
            let exact = ev
                .deterministic_margins
                .as_ref()
                .is_none_or(|ms| covers(ms) && ms.iter().all(|p| p.margin > 0.0));
            stochastic && exact
        }
        CheckKind::NotLongRun => {
            ev.spectral_radius < 1.0
                && ev.margins.last().is_some_and(|p| p.margin.abs() < check.tolerances.terminal_margin)
        }
        CheckKind::LongRun => {
            ev.spectral_radius > 1.0
                && ev.margins.len() >= 2
                && ev.margins.windows(2).all(|w| w[1].margin > w[0].margin)
        }
    }
}

fn regime(ok: bool, inequality: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::RegimeViolation(inequality.to_string()))
    }
}

/// The preset for `id` with overrides applied and the assumed regime checked.
pub fn check_scenario(id: PropositionId, opts: &CheckOptions) -> Result<ScenarioFile> {
    let mut s = load_preset(id.preset())?;
    for key in opts.overrides.keys() {
        if key != "delta" && !id.parameters().contains(&key.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "{id} accepts overrides for delta, {}; got `{key}`",
                id.parameters().join(", ")
            )));
        }
    }
    let get = |k: &str| opts.overrides.get(k).copied();
    if let Some(d) = get("delta") {
        s.delta = d;
    }
    match s.terms.first_mut() {
        Some(Term::Spillover(t)) => t.b = get("b").unwrap_or(t.b),
        Some(Term::Synergy(t)) => t.c = get("c").unwrap_or(t.c),
        Some(Term::Multiplier(t)) => {
            t.weights[0][1] = get("d1").unwrap_or(t.weights[0][1]);
            t.weights[1][0] = get("d2").unwrap_or(t.weights[1][0]);
        }
        Some(Term::Reinforcement(t)) => {
            t.b = get("b").unwrap_or(t.b);
            t.c = get("c").unwrap_or(t.c);
        }
        None => unreachable!("proposition presets carry one term"),
    }
    if let Some(sigma) = get("sigma") {
        s.shock = if sigma == 0.0 { ShockModel::DegenerateZero } else { ShockModel::Gaussian { sigma } };
    }
    if opts.paths < 4 || !opts.paths.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "checks need an even number of paths, at least 4 (two antithetic pairs); got {}",
            opts.paths
        )));
    }
    s.seed = opts.seed;
    s.paths = opts.paths;
    s.horizon = opts.horizon;
    s.interval = Some(opts.interval);
    s.sampling = Sampling::Antithetic;

    let delta = s.delta;
    regime(delta > 0.0 && delta < 1.0, "0 < delta < 1")?;
    match &s.terms[0] {
        Term::Spillover(t) => regime(t.b > 0.0, "b > 0")?,
        Term::Synergy(t) => {
            regime(t.c > 0.0, "c > 0")?;
            regime(!s.shock.is_degenerate(), "sigma > 0")?;
        }
        Term::Multiplier(t) => {
            let (d1, d2) = (t.weights[0][1], t.weights[1][0]);
            regime(d1 >= 0.0 && d2 >= 0.0, "d1 >= 0 and d2 >= 0")?;
            if id == PropositionId::P6 {
                regime((d1 * d2).sqrt() > 1.0 - delta, "sqrt(d1*d2) > 1 - delta")?;
            } else {
                regime(d1 + d2 > 0.0, "d1 + d2 > 0")?;
            }
        }
        Term::Reinforcement(t) => {
            regime(t.b > 0.0 && t.c > 0.0, "b > 0 and c > 0")?;
            if id == PropositionId::P8 {
                regime((t.b * t.c).sqrt() > 1.0 - delta, "sqrt(b*c) > 1 - delta")?;
            }
        }
    }
    let errs = s.validate();
    if !errs.is_empty() {
        return Err(Error::Scenario(errs));
    }
    Ok(s)
}

fn deterministic_margins(s: &ScenarioFile, interval: [usize; 2]) -> Result<Vec<MarginPoint>> {
    let mut spec = s.system()?;
    spec.shock = ShockModel::DegenerateZero;
    let x0 = s.initial()?;
    let y = amplified_trajectory(&x0, &spec, interval[1], RandomStream::new(0))?;
    let x = amplified_trajectory(&x0, &spec.without_terms(), interval[1], RandomStream::new(0))?;
    Ok((interval[0]..=interval[1])
        .map(|t| MarginPoint {
            t,
            margin: s.norm.eval(y[t].values()) - s.norm.eval(x[t].values()),
            ci_half_width: 0.0,
        })
        .collect())
}

pub fn check_proposition(id: PropositionId, opts: &CheckOptions) -> Result<PropositionCheck> {
    let s = check_scenario(id, opts)?;
    let spec = s.system()?;
    let x0 = s.initial()?;
    let rho = eigen_analysis(&build_expectation_map(&spec)?)?.spectral_radius;

    let cfg = s.ensemble_config();
    let y = run_ensemble(&spec, &x0, &cfg)?;
    let x = run_ensemble(&spec.without_terms(), &x0, &cfg)?;
    let margin = MarginSeries::coupled(&x, &y, s.norm, Mode::MeanLevel)?;

    let [lo, hi] = opts.interval;
    let kind = id.kind();
    let margins = match kind {
        CheckKind::Interval => {
            if hi > s.horizon || lo > hi {
                return Err(Error::InvalidArgument(format!("interval {:?} outside horizon {}", opts.interval, s.horizon)));
            }
            margin.points[lo..=hi].to_vec()
        }
        CheckKind::NotLongRun => vec![*margin.last().expect("non-empty")],
        CheckKind::LongRun => margin.points[s.horizon * 3 / 4..].to_vec(),
    };
    let deterministic = match id {
        PropositionId::P1 | PropositionId::P5 | PropositionId::P7 => Some(deterministic_margins(&s, opts.interval)?),
        _ => None,
    };
    let mut check = PropositionCheck {
        id,
        statement: id.statement().to_string(),
        kind,
        mode: Mode::MeanLevel,
        tolerances: Tolerances { confidence: 0.95, terminal_margin: TERMINAL_MARGIN_TOL, interval: opts.interval },
        evidence: Evidence { spectral_radius: rho, margins, deterministic_margins: deterministic },
        scenario: s,
        passed: false,
    };
    check.passed = recompute_passed(&check);
    Ok(check)
}

/// All eight checks, run concurrently. Check k uses seed `opts.seed + k`.
pub fn check_all(opts: &CheckOptions) -> Result<Vec<PropositionCheck>> {
    PropositionId::ALL
        .par_iter()
        .map(|&id| {
            let o = CheckOptions { seed: opts.seed.wrapping_add(id.index()), ..opts.clone() };
            check_proposition(id, &o)
        })
        .collect()
}
