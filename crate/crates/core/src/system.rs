//! Amplification terms and the system `S` that layers them over the baseline
//! decay. Every term reads the previous period only, so a step is a pure
//! function of the lagged state and the current shocks.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::process::{DecayFactor, PopulationState, ShockModel, ShockSource};
use crate::rng::RandomStream;

/// Which persons a term applies to.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum PersonScope {
    #[default]
    All,
    Only(Vec<usize>),
}

impl PersonScope {
    pub fn contains(&self, person: usize) -> bool {
        match self {
            PersonScope::All => true,
            PersonScope::Only(ps) => ps.contains(&person),
        }
    }

    pub fn is_all(&self) -> bool {
        matches!(self, PersonScope::All)
    }

    /// Parses `all` or a comma-separated list of person indices.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.eq_ignore_ascii_case("all") {
            return Ok(PersonScope::All);
        }
        let persons = text
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidArgument(format!("bad person index `{}`", p.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PersonScope::Only(persons))
    }
}

impl Serialize for PersonScope {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PersonScope::All => s.serialize_str("all"),
            PersonScope::Only(ps) => ps.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for PersonScope {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            List(Vec<usize>),
        }
        match Raw::deserialize(d)? {
            Raw::Text(t) if t == "all" => Ok(PersonScope::All),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "person scope must be \"all\" or a list of indices, got \"{t}\""
            ))),
            Raw::List(ps) => Ok(PersonScope::Only(ps)),
        }
    }
}

/// Inequity `source` spills into inequity `target` with strength `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpilloverTerm {
    #[serde(default, skip_serializing_if = "PersonScope::is_all")]
    pub persons: PersonScope,
    pub target: usize,
    pub source: usize,
    pub b: f64,
}

/// A pre-existing `source` inequity scales the current shock to `target`:
/// the contribution is `c·sign(ε)·y_source·ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynergyTerm {
    #[serde(default, skip_serializing_if = "PersonScope::is_all")]
    pub persons: PersonScope,
    pub target: usize,
    pub source: usize,
    pub c: f64,
}

/// Peer effects within one inequity. `weights[i][k]` is the influence of
/// person k's inequity on person i's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierTerm {
    pub inequity: usize,
    pub weights: Vec<Vec<f64>>,
}

impl MultiplierTerm {
    /// Two persons: `d1` is person 2's pull on person 1, `d2` the reverse.
    pub fn two_agent(inequity: usize, d1: f64, d2: f64) -> Self {
        Self { inequity, weights: vec![vec![0.0, d1], vec![d2, 0.0]] }
    }

    /// Every ordered pair of distinct persons gets weight `d`.
    pub fn common(inequity: usize, persons: usize, d: f64) -> Self {
        let weights = (0..persons)
            .map(|i| (0..persons).map(|k| if i == k { 0.0 } else { d }).collect())
            .collect();
        Self { inequity, weights }
    }
}

/// Feedback loop: `k` feeds `j` with strength `b`, `j` feeds `k` with `c`.
/// With `j == k` it is direct (compound-interest) reinforcement and `b == c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReinforcementTerm {
    #[serde(default, skip_serializing_if = "PersonScope::is_all")]
    pub persons: PersonScope,
    pub j: usize,
    pub k: usize,
    pub b: f64,
    pub c: f64,
}

impl ReinforcementTerm {
    pub fn is_direct(&self) -> bool {
        self.j == self.k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Term {
    Spillover(SpilloverTerm),
    Synergy(SynergyTerm),
    Multiplier(MultiplierTerm),
    Reinforcement(ReinforcementTerm),
}

impl Term {
    pub fn spillover(target: usize, source: usize, b: f64) -> Self {
        Term::Spillover(SpilloverTerm { persons: PersonScope::All, target, source, b })
    }

    pub fn synergy(target: usize, source: usize, c: f64) -> Self {
        Term::Synergy(SynergyTerm { persons: PersonScope::All, target, source, c })
    }

    pub fn reinforcement(j: usize, k: usize, b: f64, c: f64) -> Self {
        Term::Reinforcement(ReinforcementTerm { persons: PersonScope::All, j, k, b, c })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Term::Spillover(_) => "spillover",
            Term::Synergy(_) => "synergy",
            Term::Multiplier(_) => "multiplier",
            Term::Reinforcement(_) => "reinforcement",
        }
    }
}

/// One failed constraint. `term` is the index into the terms list, or None
/// for system-level problems.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub term: Option<usize>,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.term {
            Some(i) => write!(f, "term {i}: {}", self.reason),
            None => f.write_str(&self.reason),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::Validation(self.violations))
        }
    }
}

/// The amplification system: decay, shocks, dimensions and terms.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub delta: DecayFactor,
    pub shock: ShockModel,
    pub n_persons: usize,
    pub n_inequities: usize,
    pub terms: Vec<Term>,
}

impl SystemSpec {
    /// Builds and validates.
    pub fn new(
        delta: DecayFactor,
        shock: ShockModel,
        dims: (usize, usize),
        terms: Vec<Term>,
    ) -> Result<Self> {
        let spec = Self { delta, shock, n_persons: dims.0, n_inequities: dims.1, terms };
        validate_system(&spec).into_result()?;
        Ok(spec)
    }

    pub fn baseline(delta: DecayFactor, shock: ShockModel, dims: (usize, usize)) -> Result<Self> {
        Self::new(delta, shock, dims, Vec::new())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_persons, self.n_inequities)
    }

    pub fn dimension(&self) -> usize {
        self.n_persons * self.n_inequities
    }

    pub fn with_terms(&self, terms: Vec<Term>) -> Result<Self> {
        Self::new(self.delta, self.shock, self.dims(), terms)
    }

    /// The same decay and shocks with no amplification.
    pub fn without_terms(&self) -> Self {
        Self { terms: Vec::new(), ..self.clone() }
    }
}

/// Largest supported N·M (the expectation map is stored dense).
pub const MAX_DIMENSION: usize = 4096;

pub fn validate_system(spec: &SystemSpec) -> ValidationReport {
    let (n, m) = spec.dims();
    let mut out = Vec::new();
    let mut push = |term: Option<usize>, reason: String| out.push(Violation { term, reason });

    if n == 0 || m == 0 {
        push(None, format!("dimensions must be positive, got ({n}, {m})"));
    }
    if n.checked_mul(m).is_none_or(|d| d > MAX_DIMENSION) {
        push(None, format!("persons x inequities must not exceed {MAX_DIMENSION}, got ({n}, {m})"));
        return ValidationReport { violations: out };
    }
    if let Err(e) = spec.shock.validate() {
        push(None, e.to_string());
    }

    let strength = |push: &mut dyn FnMut(Option<usize>, String), idx: usize, name: &str, v: f64| {
        if !(v.is_finite() && v > 0.0) {
            push(Some(idx), format!("strength must be positive ({name} = {v})"));
        }
    };
    let inequity = |push: &mut dyn FnMut(Option<usize>, String), idx: usize, name: &str, v: usize| {
        if v >= m {
            push(Some(idx), format!("inequity index {name} = {v} out of range (M = {m})"));
        }
    };
    let scope = |push: &mut dyn FnMut(Option<usize>, String), idx: usize, s: &PersonScope| {
        if let PersonScope::Only(ps) = s {
            if ps.is_empty() {
                push(Some(idx), "person scope is empty".into());
            }
            for &p in ps.iter().filter(|&&p| p >= n) {
                push(Some(idx), format!("person index {p} out of range (N = {n})"));
            }
        }
    };

    for (idx, term) in spec.terms.iter().enumerate() {
        match term {
            Term::Spillover(t) => {
                strength(&mut push, idx, "b", t.b);
                inequity(&mut push, idx, "target", t.target);
                inequity(&mut push, idx, "source", t.source);
                if t.source == t.target {
                    push(Some(idx), format!("spillover source must differ from target (k = j = {})", t.target));
                }
                scope(&mut push, idx, &t.persons);
            }
            Term::Synergy(t) => {
                strength(&mut push, idx, "c", t.c);
                inequity(&mut push, idx, "target", t.target);
                inequity(&mut push, idx, "source", t.source);
                if t.source == t.target {
                    push(Some(idx), format!("synergy source must differ from target (k = j = {})", t.target));
                }
                scope(&mut push, idx, &t.persons);
            }
            Term::Multiplier(t) => {
                inequity(&mut push, idx, "inequity", t.inequity);
                if t.weights.len() != n || t.weights.iter().any(|r| r.len() != n) {
                    push(Some(idx), format!("multiplier weights must be {n}x{n}"));
                    continue;
                }
                for (i, row) in t.weights.iter().enumerate() {
                    for (k, &w) in row.iter().enumerate() {
                        if !w.is_finite() || w < 0.0 {
                            push(Some(idx), format!("multiplier weight ({i},{k}) must be non-negative, got {w}"));
                        } else if i == k && w != 0.0 {
                            push(Some(idx), format!("multiplier diagonal ({i},{i}) must be zero, got {w}"));
                        }
                    }
                }
            }
            Term::Reinforcement(t) => {
                strength(&mut push, idx, "b", t.b);
                strength(&mut push, idx, "c", t.c);
                inequity(&mut push, idx, "j", t.j);
                inequity(&mut push, idx, "k", t.k);
                if t.is_direct() && t.b != t.c {
                    push(Some(idx), format!("direct reinforcement (j = k) requires b = c, got b = {}, c = {}", t.b, t.c));
                }
                scope(&mut push, idx, &t.persons);
            }
        }
    }
    ValidationReport { violations: out }
}

/// Amplifier contributions for every entry, computed from the lagged state.
/// Each entry's contributions are summed in sorted order so the result does
/// not depend on the order of the terms list.
fn amplification(state: &[f64], spec: &SystemSpec, shocks: &[f64]) -> Vec<Option<f64>> {
    let (n, m) = spec.dims();
    let at = |i: usize, j: usize| i * m + j;
    let mut parts: Vec<Vec<f64>> = vec![Vec::new(); n * m];

    for term in &spec.terms {
        match term {
            Term::Spillover(t) => {
                for i in (0..n).filter(|&i| t.persons.contains(i)) {
                    parts[at(i, t.target)].push(t.b * state[at(i, t.source)]);
                }
            }
            Term::Synergy(t) => {
                for i in (0..n).filter(|&i| t.persons.contains(i)) {
                    let eps = shocks[at(i, t.target)];
                    parts[at(i, t.target)].push(t.c * eps.abs() * state[at(i, t.source)]);
                }
            }
            Term::Multiplier(t) => {
                let j = t.inequity;
                for (i, row) in t.weights.iter().enumerate() {
                    for (k, &w) in row.iter().enumerate() {
                        if k != i && w != 0.0 {
                            parts[at(i, j)].push(w * state[at(k, j)]);
                        }
                    }
                }
            }
            Term::Reinforcement(t) => {
                for i in (0..n).filter(|&i| t.persons.contains(i)) {
                    if t.is_direct() {
                        parts[at(i, t.j)].push(t.b * state[at(i, t.j)]);
                    } else {
                        parts[at(i, t.j)].push(t.b * state[at(i, t.k)]);
                        parts[at(i, t.k)].push(t.c * state[at(i, t.j)]);
                    }
                }
            }
        }
    }

    parts
        .into_iter()
        .map(|mut p| {
            if p.is_empty() {
                None
            } else {
                p.sort_by(f64::total_cmp);
                Some(p.into_iter().sum())
            }
        })
        .collect()
}

/// One synchronous update of every entry.
pub fn amplified_step(
    state: &PopulationState,
    spec: &SystemSpec,
    shocks: &[f64],
) -> Result<PopulationState> {
    if state.dims() != spec.dims() {
        return Err(Error::InvalidArgument(format!(
            "state is {:?} but system is {:?}",
            state.dims(),
            spec.dims()
        )));
    }
    if shocks.len() != spec.dimension() {
        return Err(Error::InvalidArgument(format!(
            "expected {} shocks, got {}",
            spec.dimension(),
            shocks.len()
        )));
    }
    Ok(step_unchecked(state, spec, shocks))
}

pub(crate) fn step_unchecked(state: &PopulationState, spec: &SystemSpec, shocks: &[f64]) -> PopulationState {
    let d = spec.delta.value();
    let prev = state.values();
    let amp = amplification(prev, spec, shocks);
    let next = prev
        .iter()
        .zip(shocks)
        .zip(amp)
        .map(|((y, e), a)| {
            let base = d * y + e;
            match a {
                Some(a) => base + a,
                None => base,
            }
        })
        .collect();
    state.with_values(next, state.time + 1)
}

pub fn amplified_trajectory(
    state0: &PopulationState,
    spec: &SystemSpec,
    horizon: usize,
    stream: RandomStream,
) -> Result<Vec<PopulationState>> {
    let source = ShockSource::new(spec.shock, stream, spec.dims());
    trajectory_from(state0, spec, horizon, source)
}

pub(crate) fn trajectory_from(
    state0: &PopulationState,
    spec: &SystemSpec,
    horizon: usize,
    mut source: ShockSource,
) -> Result<Vec<PopulationState>> {
    if state0.dims() != spec.dims() {
        return Err(Error::InvalidArgument(format!(
            "state is {:?} but system is {:?}",
            state0.dims(),
            spec.dims()
        )));
    }
    let mut out = Vec::with_capacity(horizon + 1);
    out.push(state0.clone());
    for _ in 0..horizon {
        let shocks = source.next_grid();
        let next = step_unchecked(out.last().expect("non-empty"), spec, &shocks);
        out.push(next);
    }
    Ok(out)
}
