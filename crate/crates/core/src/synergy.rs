//! Conditional means of a synergy target given the sign of its current shock.
//!
//! Conditioning on `ε(t) ≥ 0` only touches the current-period terms: the
//! lagged state is independent of `ε(t)`, so
//!
//! ```text
//! E[y_j(t) | ε(t) ≥ 0] = Σ_k A'_jk E[y_k(t−1)] + c·E[y_src(t−1)]·e + e
//! ```
//!
//! where `A'` is the expectation map without this synergy coupling and
//! `e = E[ε | ε ≥ 0]` (with `v = E[ε | ε < 0]` and `−c·v` for the other sign).
//! The unconditional lag `E[y(t−1)]` is propagated by the full map.
//!
//! The series also carries the closed recursion `Y(t) = δY(t−1) + c·δᵗ·X(0)·e + e`
//! (started from `Y(1) = δY(0) + c·X(0)·e + e`), which feeds the lagged
//! conditional mean back in as if it were unconditional. It drifts above the
//! ensemble and is kept for comparison only.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::mean_and_se;
use crate::error::{Error, Result};
use crate::process::{PopulationState, ShockSource};
use crate::rng::RandomStream;
use crate::spectral::build_expectation_map;
use crate::system::{step_unchecked, SynergyTerm, SystemSpec, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShockSign {
    NonNegative,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalPoint {
    pub t: usize,
    /// Exact conditional mean.
    pub recursion: f64,
    /// Closed recursion with the conditional lag, for comparison.
    pub literal_recursion: f64,
    /// Mean over paths whose current shock has the requested sign.
    pub monte_carlo: f64,
    pub std_error: f64,
    pub filtered_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalMeanSeries {
    pub sign: ShockSign,
    pub person: usize,
    pub target: usize,
    pub source: usize,
    /// `E[ε | ε ≥ 0]` or `E[ε | ε < 0]`, matching `sign`.
    pub conditional_shock_mean: f64,
    pub points: Vec<ConditionalPoint>,
}

fn single_synergy(spec: &SystemSpec) -> Result<(usize, SynergyTerm)> {
    let found: Vec<(usize, &SynergyTerm)> = spec
        .terms
        .iter()
        .enumerate()
        .filter_map(|(i, t)| match t {
            Term::Synergy(s) => Some((i, s)),
            _ => None,
        })
        .collect();
    match found.as_slice() {
        [(i, s)] => Ok((*i, (*s).clone())),
        _ => Err(Error::InvalidArgument(format!(
            "conditional means need exactly one synergy term, found {}",
            found.len()
        ))),
    }
}

/// Conditional means for both shock signs at t = 1..=horizon, each paired
/// with a sign-filtered ensemble estimate from `paths` independent paths.
pub fn conditional_mean_series(
    spec: &SystemSpec,
    state0: &PopulationState,
    horizon: usize,
    paths: usize,
    seed: u64,
) -> Result<[ConditionalMeanSeries; 2]> {
    let (term_idx, syn) = single_synergy(spec)?;
    let (e_pos, v_neg) = match (spec.shock.positive_mean(), spec.shock.negative_mean()) {
        (Some(e), Some(v)) if !spec.shock.is_degenerate() => (e, v),
        _ => {
            return Err(Error::InvalidArgument(
                "sign conditioning is undefined for degenerate-zero shocks".into(),
            ))
        }
    };
    if state0.dims() != spec.dims() {
        return Err(Error::InvalidArgument("state does not match system dimensions".into()));
    }
    if paths == 0 {
        return Err(Error::InvalidArgument("paths must be at least 1".into()));
    }
    let person = (0..spec.n_persons)
        .find(|&i| syn.persons.contains(i))
        .ok_or_else(|| Error::InvalidArgument("synergy term covers no person".into()))?;
    let m = spec.n_inequities;
    let tgt = person * m + syn.target;
    let src = person * m + syn.source;

    // Unconditional means E[y(t)], t = 0..horizon-1.
    let full = build_expectation_map(spec)?;
    let mut others = spec.clone();
    others.terms.remove(term_idx);
    let without = build_expectation_map(&others)?;
    let mut means = vec![state0.values().to_vec()];
    for _ in 1..horizon {
        let next = full.apply(means.last().expect("non-empty"));
        means.push(next);
    }

    // Filtered ensemble: per path, (y_target(t), ε_target(t)) for t = 1..=horizon.
    let records: Vec<Vec<(f64, f64)>> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let stream = RandomStream::new(seed).with_path(p as u64);
            let mut source = ShockSource::new(spec.shock, stream, spec.dims());
            let mut state = state0.clone();
            (0..horizon)
                .map(|_| {
                    let shocks = source.next_grid();
                    state = step_unchecked(&state, spec, &shocks);
                    (state.values()[tgt], shocks[tgt])
                })
                .collect()
        })
        .collect();

    let delta = spec.delta.value();
    let x0 = state0.values()[src];
    let build = |sign: ShockSign| -> ConditionalMeanSeries {
        let (cond_eps, abs_weight) = match sign {
            ShockSign::NonNegative => (e_pos, e_pos),
            ShockSign::Negative => (v_neg, -v_neg),
        };
        let mut literal = state0.values()[tgt];
        let points = (1..=horizon)
            .map(|t| {
                let lag = &means[t - 1];
                let linear: f64 = (0..lag.len()).map(|k| without.get(tgt, k) * lag[k]).sum();
                let recursion = linear + syn.c * lag[src] * abs_weight + cond_eps;
                // Printed initial condition at t = 1, printed recursion after.
                let decay = if t == 1 { 1.0 } else { delta.powi(t as i32) };
                literal = delta * literal + syn.c * decay * x0 * abs_weight + cond_eps;

                let kept: Vec<f64> = records
                    .iter()
                    .map(|r| r[t - 1])
                    .filter(|&(_, eps)| match sign {
                        ShockSign::NonNegative => eps >= 0.0,
                        ShockSign::Negative => eps < 0.0,
                    })
                    .map(|(y, _)| y)
                    .collect();
                let (mc, se) = mean_and_se(&kept);
                ConditionalPoint {
                    t,
                    recursion,
                    literal_recursion: literal,
                    monte_carlo: mc,
                    std_error: se,
                    filtered_paths: kept.len(),
                }
            })
            .collect();
        ConditionalMeanSeries {
            sign,
            person,
            target: syn.target,
            source: syn.source,
            conditional_shock_mean: cond_eps,
            points,
        }
    };
    Ok([build(ShockSign::NonNegative), build(ShockSign::Negative)])
}
