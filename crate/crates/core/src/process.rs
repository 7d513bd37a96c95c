//! The baseline decaying process `x(t) = δ·x(t−1) + ε(t)`, applied entrywise
//! to an N×M matrix of standardized inequities.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::rng::RandomStream;

/// One-step decay factor, strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct DecayFactor(f64);

impl DecayFactor {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidArgument(format!(
                "decay factor must lie in open interval (0,1), got {value}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl<'de> Deserialize<'de> for DecayFactor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        DecayFactor::new(v).map_err(|_| serde::de::Error::custom("must lie in open interval (0,1)"))
    }
}

/// Matrix of inequities `y_ij(t)`: rows are persons, columns are inequity
/// dimensions. Stored person-major, so entry (i, j) sits at `i * M + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationState {
    n_persons: usize,
    n_inequities: usize,
    values: Vec<f64>,
    pub time: u64,
}

impl PopulationState {
    pub fn new(n_persons: usize, n_inequities: usize, values: Vec<f64>) -> Result<Self> {
        if n_persons == 0 || n_inequities == 0 {
            return Err(Error::InvalidArgument("dimensions must be positive".into()));
        }
        if values.len() != n_persons * n_inequities {
            return Err(Error::InvalidArgument(format!(
                "expected {} values for a {n_persons}x{n_inequities} state, got {}",
                n_persons * n_inequities,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("state entries must be finite, got {bad}")));
        }
        Ok(Self { n_persons, n_inequities, values, time: 0 })
    }

    pub fn zeros(n_persons: usize, n_inequities: usize) -> Result<Self> {
        Self::new(n_persons, n_inequities, vec![0.0; n_persons * n_inequities])
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidArgument("ragged state rows".into()));
        }
        Self::new(n, m, rows.concat())
    }

    pub fn n_persons(&self) -> usize {
        self.n_persons
    }

    pub fn n_inequities(&self) -> usize {
        self.n_inequities
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_persons, self.n_inequities)
    }

    pub fn index(&self, person: usize, inequity: usize) -> usize {
        person * self.n_inequities + inequity
    }

    pub fn get(&self, person: usize, inequity: usize) -> f64 {
        self.values[self.index(person, inequity)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.n_inequities).map(<[f64]>::to_vec).collect()
    }

    pub(crate) fn with_values(&self, values: Vec<f64>, time: u64) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self { n_persons: self.n_persons, n_inequities: self.n_inequities, values, time }
    }

    /// `self + other`, entrywise. The result keeps `self`'s time index.
    pub fn add(&self, other: &PopulationState) -> Result<Self> {
        if self.dims() != other.dims() {
            return Err(Error::InvalidArgument(format!(
                "dimension mismatch: {:?} vs {:?}",
                self.dims(),
                other.dims()
            )));
        }
        let v = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(self.with_values(v, self.time))
    }
}

/// Distribution of the idiosyncratic shocks. All kinds are mean zero and
/// independent across persons, inequities and time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ShockModel {
    DegenerateZero,
    Gaussian { sigma: f64 },
    Uniform { half_width: f64 },
}

impl ShockModel {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        let m = ShockModel::Gaussian { sigma };
        m.validate()?;
        Ok(m)
    }

    pub fn uniform(half_width: f64) -> Result<Self> {
        let m = ShockModel::Uniform { half_width };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let (name, v) = match *self {
            ShockModel::DegenerateZero => return Ok(()),
            ShockModel::Gaussian { sigma } => ("sigma", sigma),
            ShockModel::Uniform { half_width } => ("half_width", half_width),
        };
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")))
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, ShockModel::DegenerateZero)
    }

    pub fn variance(&self) -> f64 {
        match *self {
            ShockModel::DegenerateZero => 0.0,
            ShockModel::Gaussian { sigma } => sigma * sigma,
            ShockModel::Uniform { half_width } => half_width * half_width / 3.0,
        }
    }

    /// `E[|ε|]` in closed form.
    pub fn half_normal_mean(&self) -> f64 {
        match *self {
            ShockModel::DegenerateZero => 0.0,
            ShockModel::Gaussian { sigma } => sigma * (2.0 / PI).sqrt(),
            ShockModel::Uniform { half_width } => half_width / 2.0,
        }
    }

    /// `E[ε | ε ≥ 0]`. Undefined (None) for the degenerate model, where
    /// conditioning on the sign carries no information.
    pub fn positive_mean(&self) -> Option<f64> {
        match self {
            ShockModel::DegenerateZero => None,
            _ => Some(self.half_normal_mean()),
        }
    }

    /// `E[ε | ε < 0]`; the event has probability zero for the degenerate model.
    pub fn negative_mean(&self) -> Option<f64> {
        self.positive_mean().map(|e| -e)
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            ShockModel::DegenerateZero => 0.0,
            ShockModel::Gaussian { sigma } => {
                Normal::new(0.0, sigma).expect("validated sigma").sample(rng)
            }
            ShockModel::Uniform { half_width } => rng.random_range(-half_width..half_width),
        }
    }
}

/// `δ·x + ε`.
pub fn baseline_step(x: f64, delta: DecayFactor, eps: f64) -> Result<f64> {
    ensure_finite("state", x)?;
    ensure_finite("shock", eps)?;
    Ok(delta.value() * x + eps)
}

/// `E[x(t)] = δᵗ·x₀`.
pub fn expected_baseline(x0: f64, delta: DecayFactor, t: u32) -> Result<f64> {
    ensure_finite("initial state", x0)?;
    Ok(delta.value().powi(t as i32) * x0)
}

pub fn sample_shocks(model: &ShockModel, stream: RandomStream, count: usize) -> Vec<f64> {
    let mut rng = stream.rng();
    (0..count).map(|_| model.sample(&mut rng)).collect()
}

/// Per-entry shock generators for one path. Draw `t` of entry (i, j) is the
/// shock applied at time `t`; `negate` yields the antithetic partner path.
pub struct ShockSource {
    model: ShockModel,
    rngs: Vec<ChaCha8Rng>,
    negate: bool,
}

impl ShockSource {
    pub fn new(model: ShockModel, stream: RandomStream, dims: (usize, usize)) -> Self {
        let (n, m) = dims;
        let rngs = (0..n)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .map(|(i, j)| stream.entry(i, j).rng())
            .collect();
        Self { model, rngs, negate: false }
    }

    pub fn antithetic(mut self, negate: bool) -> Self {
        self.negate = negate;
        self
    }

    pub fn next_grid(&mut self) -> Vec<f64> {
        let model = self.model;
        let sign = if self.negate { -1.0 } else { 1.0 };
        self.rngs.iter_mut().map(|r| sign * model.sample(r)).collect()
    }
}

/// Baseline trajectory of length `horizon + 1`, starting with `state0`.
pub fn baseline_trajectory(
    state0: &PopulationState,
    delta: DecayFactor,
    model: &ShockModel,
    horizon: usize,
    stream: RandomStream,
) -> Vec<PopulationState> {
    let source = ShockSource::new(*model, stream, state0.dims());
    baseline_trajectory_from(state0, delta, horizon, source)
}

pub(crate) fn baseline_trajectory_from(
    state0: &PopulationState,
    delta: DecayFactor,
    horizon: usize,
    mut source: ShockSource,
) -> Vec<PopulationState> {
    let d = delta.value();
    let mut out = Vec::with_capacity(horizon + 1);
    out.push(state0.clone());
    for _ in 0..horizon {
        let prev = out.last().expect("non-empty");
        let shocks = source.next_grid();
        let v = prev.values.iter().zip(&shocks).map(|(x, e)| d * x + e).collect();
        let next = prev.with_values(v, prev.time + 1);
        out.push(next);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn delta(v: f64) -> DecayFactor {
        DecayFactor::new(v).unwrap()
    }

    #[test]
    fn decay_factor_rejects_boundaries() {
        for bad in [0.0, 1.0, -0.2, 1.5, f64::NAN, f64::INFINITY] {
            assert!(DecayFactor::new(bad).is_err(), "{bad}");
        }
        assert!(DecayFactor::new(1e-9).is_ok());
    }

    #[test]
    fn baseline_step_examples() {
        assert_eq!(baseline_step(1.0, delta(0.5), 0.0).unwrap(), 0.5);
        assert_eq!(baseline_step(0.0, delta(0.7), 0.3).unwrap(), 0.3);
        assert_relative_eq!(baseline_step(2.0, delta(0.6), -0.1).unwrap(), 1.1, epsilon = 1e-15);
        assert!(baseline_step(f64::NAN, delta(0.5), 0.0).is_err());
        assert!(baseline_step(1.0, delta(0.5), f64::INFINITY).is_err());
    }

    #[test]
    fn expected_baseline_examples() {
        assert_eq!(expected_baseline(1.0, delta(0.6), 0).unwrap(), 1.0);
        assert_relative_eq!(expected_baseline(1.0, delta(0.6), 2).unwrap(), 0.36, epsilon = 1e-15);
        assert_relative_eq!(expected_baseline(3.0, delta(0.5), 3).unwrap(), 0.375, epsilon = 1e-15);
    }

    #[test]
    fn shock_model_accessors() {
        let g = ShockModel::gaussian(0.1).unwrap();
        assert_relative_eq!(g.half_normal_mean(), 0.1 * (2.0 / PI).sqrt());
        assert!((g.positive_mean().unwrap() - 0.0798).abs() < 1e-4);
        assert_eq!(g.negative_mean().unwrap(), -g.positive_mean().unwrap());
        let u = ShockModel::uniform(0.4).unwrap();
        assert_eq!(u.half_normal_mean(), 0.2);
        assert_relative_eq!(u.variance(), 0.16 / 3.0);
        assert_eq!(ShockModel::DegenerateZero.half_normal_mean(), 0.0);
        assert!(ShockModel::DegenerateZero.positive_mean().is_none());
        assert!(ShockModel::gaussian(0.0).is_err());
        assert!(ShockModel::uniform(-1.0).is_err());
    }

    #[test]
    fn degenerate_shocks_are_zero() {
        let s = sample_shocks(&ShockModel::DegenerateZero, RandomStream::new(1), 100);
        assert!(s.iter().all(|&x| x == 0.0));
        assert!(sample_shocks(&ShockModel::DegenerateZero, RandomStream::new(1), 0).is_empty());
    }

    #[test]
    fn gaussian_shock_moments() {
        let n = 100_000;
        let sigma = 0.1;
        let s = sample_shocks(&ShockModel::Gaussian { sigma }, RandomStream::new(11), n);
        let mean = s.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 3.0 * sigma / (n as f64).sqrt(), "mean {mean}");

        // |ε| is half-normal with mean σ√(2/π) and variance σ²(1 − 2/π).
        let abs_mean = s.iter().map(|x| x.abs()).sum::<f64>() / n as f64;
        let se = sigma * (1.0 - 2.0 / PI).sqrt() / (n as f64).sqrt();
        assert!((abs_mean - sigma * (2.0 / PI).sqrt()).abs() < 3.0 * se, "E|e| {abs_mean}");
    }

    #[test]
    fn uniform_shocks_stay_in_support() {
        let s = sample_shocks(&ShockModel::Uniform { half_width: 0.3 }, RandomStream::new(2), 10_000);
        assert!(s.iter().all(|x| x.abs() < 0.3));
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        assert!(mean.abs() < 3.0 * 0.3 / 3f64.sqrt() / 100.0);
    }

    #[test]
    fn zero_shock_trajectory_halves() {
        let s0 = PopulationState::new(1, 1, vec![1.0]).unwrap();
        let traj = baseline_trajectory(&s0, delta(0.5), &ShockModel::DegenerateZero, 3, RandomStream::new(0));
        let v: Vec<f64> = traj.iter().map(|s| s.get(0, 0)).collect();
        assert_eq!(v, vec![1.0, 0.5, 0.25, 0.125]);
        assert_eq!(traj.last().unwrap().time, 3);
    }

    #[test]
    fn zero_shock_magnitude_strictly_decreases() {
        let s0 = PopulationState::new(2, 2, vec![1.0, -3.0, 0.2, -0.01]).unwrap();
        let traj = baseline_trajectory(&s0, delta(0.9), &ShockModel::DegenerateZero, 50, RandomStream::new(0));
        for w in traj.windows(2) {
            for (a, b) in w[0].values().iter().zip(w[1].values()) {
                assert!(b.abs() < a.abs());
            }
        }
    }

    #[test]
    fn trajectory_matches_explicit_form() {
        let d = 0.8;
        let model = ShockModel::Gaussian { sigma: 0.3 };
        let stream = RandomStream::new(99);
        let s0 = PopulationState::new(2, 3, vec![1.0, -2.0, 0.5, 0.0, 3.0, -0.7]).unwrap();
        let horizon = 1000;
        let traj = baseline_trajectory(&s0, delta(d), &model, horizon, stream);
        assert_eq!(traj.len(), horizon + 1);
        for i in 0..2 {
            for j in 0..3 {
                let eps = sample_shocks(&model, stream.entry(i, j), horizon);
                for t in [0usize, 1, 2, 17, 250, 1000] {
                    let explicit = d.powi(t as i32) * s0.get(i, j)
                        + (1..=t).map(|k| d.powi((t - k) as i32) * eps[k - 1]).sum::<f64>();
                    let got = traj[t].get(i, j);
                    let scale = got.abs().max(explicit.abs()).max(1.0);
                    assert!((got - explicit).abs() <= 1e-12 * scale, "({i},{j}) t={t}");
                }
            }
        }
    }

    #[test]
    fn trajectories_are_reproducible() {
        let s0 = PopulationState::new(3, 2, vec![0.5; 6]).unwrap();
        let model = ShockModel::Uniform { half_width: 1.0 };
        let a = baseline_trajectory(&s0, delta(0.3), &model, 40, RandomStream::new(5));
        let b = baseline_trajectory(&s0, delta(0.3), &model, 40, RandomStream::new(5));
        assert_eq!(a, b);
    }

    #[test]
    fn state_construction_errors() {
        assert!(PopulationState::new(0, 1, vec![]).is_err());
        assert!(PopulationState::new(1, 2, vec![1.0]).is_err());
        assert!(PopulationState::new(1, 1, vec![f64::NAN]).is_err());
        assert!(PopulationState::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        let s = PopulationState::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(s.get(1, 0), 3.0);
        assert_eq!(s.rows(), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }
}
