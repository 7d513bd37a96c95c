//! Monte Carlo ensembles of amplified trajectories.
//!
//! Path `p` draws its shocks from the substreams of `(seed, p)`, so two
//! ensembles run with the same seed share shocks path by path (common random
//! numbers) and results do not depend on how rayon schedules the work.
//! Under antithetic sampling, paths `2q` and `2q + 1` share substream `q`
//! with opposite signs and each pair counts as one statistical unit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{PopulationState, ShockSource};
use crate::rng::RandomStream;
use crate::system::{step_unchecked, SystemSpec};

/// Upper bound on stored path values (paths × (horizon + 1) × N·M).
pub const MAX_STORED_VALUES: usize = 120_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    #[default]
    Independent,
    Antithetic,
}

/// A one-time additive change to the state right after step `time`
/// (`time = 0` alters the initial condition).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transfer {
    pub time: u64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub horizon: usize,
    pub paths: usize,
    pub seed: u64,
    pub sampling: Sampling,
    pub transfer: Option<Transfer>,
}

impl EnsembleConfig {
    pub fn new(horizon: usize, paths: usize, seed: u64) -> Self {
        Self { horizon, paths, seed, sampling: Sampling::Independent, transfer: None }
    }

    pub fn antithetic(mut self) -> Self {
        self.sampling = Sampling::Antithetic;
        self
    }

    pub fn with_sampling(mut self, sampling: Sampling) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn with_transfer(mut self, transfer: Transfer) -> Self {
        self.transfer = Some(transfer);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub label: String,
    pub n_persons: usize,
    pub n_inequities: usize,
    pub paths: usize,
    pub horizon: usize,
    pub seed: u64,
    pub sampling: Sampling,
    /// `mean[t]` is the flattened mean matrix at time t.
    pub mean: Vec<Vec<f64>>,
    /// Entrywise standard errors of `mean`, computed over statistical units.
    pub std_error: Vec<Vec<f64>>,
    /// Path-major raw values: `[path][t][entry]`.
    data: Vec<f64>,
}

impl Ensemble {
    pub fn dimension(&self) -> usize {
        self.n_persons * self.n_inequities
    }

    /// Number of statistical units (paths, or antithetic pairs).
    pub fn units(&self) -> usize {
        match self.sampling {
            Sampling::Independent => self.paths,
            Sampling::Antithetic => self.paths / 2,
        }
    }

    pub fn path_state(&self, path: usize, t: usize) -> &[f64] {
        let dim = self.dimension();
        let start = (path * (self.horizon + 1) + t) * dim;
        &self.data[start..start + dim]
    }

    /// Unit values of a per-path scalar `f` at time t.
    pub fn unit_values<F: Fn(&[f64]) -> f64>(&self, t: usize, f: F) -> Vec<f64> {
        match self.sampling {
            Sampling::Independent => (0..self.paths).map(|p| f(self.path_state(p, t))).collect(),
            Sampling::Antithetic => (0..self.paths / 2)
                .map(|q| 0.5 * (f(self.path_state(2 * q, t)) + f(self.path_state(2 * q + 1, t))))
                .collect(),
        }
    }

    pub fn mean_state(&self, t: usize) -> Result<PopulationState> {
        PopulationState::new(self.n_persons, self.n_inequities, self.mean[t].clone())
    }

    pub(crate) fn is_coupled_with(&self, other: &Ensemble) -> bool {
        self.paths == other.paths
            && self.horizon == other.horizon
            && self.seed == other.seed
            && self.sampling == other.sampling
            && self.n_persons == other.n_persons
            && self.n_inequities == other.n_inequities
    }
}

/// Sample mean and standard error, shifted by the first value so identical
/// samples give exactly that value and a zero error.
pub(crate) fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let x0 = xs[0];
    let (s1, s2) = xs.iter().fold((0.0, 0.0), |(a, b), &x| {
        let d = x - x0;
        (a + d, b + d * d)
    });
    let nf = n as f64;
    let mean = x0 + s1 / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = ((s2 - s1 * s1 / nf) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

pub fn run_ensemble(
    spec: &SystemSpec,
    state0: &PopulationState,
    cfg: &EnsembleConfig,
) -> Result<Ensemble> {
    if cfg.paths == 0 {
        return Err(Error::InvalidArgument("paths must be at least 1".into()));
    }
    if cfg.sampling == Sampling::Antithetic && !cfg.paths.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "antithetic sampling needs an even path count, got {}",
            cfg.paths
        )));
    }
    if state0.dims() != spec.dims() {
        return Err(Error::InvalidArgument(format!(
            "state is {:?} but system is {:?}",
            state0.dims(),
            spec.dims()
        )));
    }
    let dim = spec.dimension();
    if let Some(tr) = &cfg.transfer {
        if tr.values.len() != dim {
            return Err(Error::InvalidArgument(format!(
                "transfer has {} entries, state has {dim}",
                tr.values.len()
            )));
        }
    }
    let requested = cfg
        .paths
        .checked_mul(cfg.horizon.saturating_add(1))
        .and_then(|v| v.checked_mul(dim))
        .unwrap_or(usize::MAX);
    if requested > MAX_STORED_VALUES {
        return Err(Error::Capacity { requested, limit: MAX_STORED_VALUES });
    }

    let per_path: Vec<Vec<f64>> = (0..cfg.paths)
        .into_par_iter()
        .map(|p| simulate_path(spec, state0, cfg, p))
        .collect();
    let data = per_path.concat();

    let mut ens = Ensemble {
        label: String::new(),
        n_persons: spec.n_persons,
        n_inequities: spec.n_inequities,
        paths: cfg.paths,
        horizon: cfg.horizon,
        seed: cfg.seed,
        sampling: cfg.sampling,
        mean: Vec::with_capacity(cfg.horizon + 1),
        std_error: Vec::with_capacity(cfg.horizon + 1),
        data,
    };
    for t in 0..=cfg.horizon {
        let (m, se): (Vec<f64>, Vec<f64>) = (0..dim)
            .map(|e| mean_and_se(&ens.unit_values(t, |s| s[e])))
            .unzip();
        ens.mean.push(m);
        ens.std_error.push(se);
    }
    Ok(ens)
}

fn simulate_path(spec: &SystemSpec, state0: &PopulationState, cfg: &EnsembleConfig, path: usize) -> Vec<f64> {
    let (stream_path, negate) = match cfg.sampling {
        Sampling::Independent => (path as u64, false),
        Sampling::Antithetic => ((path / 2) as u64, path % 2 == 1),
    };
    let stream = RandomStream::new(cfg.seed).with_path(stream_path);
    let mut source = ShockSource::new(spec.shock, stream, spec.dims()).antithetic(negate);
    let dim = spec.dimension();
    let mut out = Vec::with_capacity((cfg.horizon + 1) * dim);

    let transfer_at = |state: PopulationState, t: u64| -> PopulationState {
        match &cfg.transfer {
            Some(tr) if tr.time == t => {
                let v = state.values().iter().zip(&tr.values).map(|(a, b)| a + b).collect();
                state.with_values(v, state.time)
            }
            _ => state,
        }
    };

    let mut state = transfer_at(state0.clone(), 0);
    out.extend_from_slice(state.values());
    for t in 1..=cfg.horizon {
        let shocks = source.next_grid();
        state = transfer_at(step_unchecked(&state, spec, &shocks), t as u64);
        out.extend_from_slice(state.values());
    }
    out
}
