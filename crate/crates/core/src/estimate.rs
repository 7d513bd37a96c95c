//! Norm series, coupled margins, and the interval / long-run verdicts.
//!
//! Two comparison modes are offered. Mean-level applies the norm to the
//! entrywise mean matrix, `μ(E[Y(t)])`; dispersion averages the norm of each
//! realized matrix, `E[μ(Y(t))]`. They agree on the sign of short-run
//! effects but not in the limit: under stationary noise the dispersion
//! series settles at a positive level while the mean-level series decays.

use serde::{Deserialize, Serialize};

use crate::ensemble::{mean_and_se, run_ensemble, Ensemble, EnsembleConfig};
use crate::error::{Error, Result};
use crate::norm::NormSpec;
use crate::process::PopulationState;
use crate::spectral::{build_expectation_map, eigen_analysis, Classification};
use crate::system::SystemSpec;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    MeanLevel,
    Dispersion,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::MeanLevel => "mean-level",
            Mode::Dispersion => "dispersion",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t: usize,
    pub estimate: f64,
    pub ci_half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSeriesEstimate {
    pub mode: Mode,
    pub norm: NormSpec,
    pub points: Vec<SeriesPoint>,
}

impl NormSeriesEstimate {
    pub fn at(&self, t: usize) -> Option<&SeriesPoint> {
        self.points.iter().find(|p| p.t == t)
    }
}

/// Per-unit values whose mean is (to first order) the series estimate at t.
/// Mean-level mode linearizes μ at the mean matrix.
fn unit_scores(ens: &Ensemble, norm: NormSpec, mode: Mode, t: usize) -> (f64, Vec<f64>) {
    match mode {
        Mode::MeanLevel => {
            let mean = &ens.mean[t];
            let grad = norm.gradient(mean);
            let scores = ens.unit_values(t, |s| s.iter().zip(&grad).map(|(a, b)| a * b).sum());
            (norm.eval(mean), scores)
        }
        Mode::Dispersion => {
            let scores = ens.unit_values(t, |s| norm.eval(s));
            (mean_and_se(&scores).0, scores)
        }
    }
}

pub fn estimate_norm_series(ens: &Ensemble, norm: NormSpec, mode: Mode) -> NormSeriesEstimate {
    let points = (0..=ens.horizon)
        .map(|t| {
            let (estimate, scores) = unit_scores(ens, norm, mode, t);
            let (_, se) = mean_and_se(&scores);
            SeriesPoint { t, estimate, ci_half_width: Z95 * se }
        })
        .collect();
    NormSeriesEstimate { mode, norm, points }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginPoint {
    pub t: usize,
    /// `estimate_Y − estimate_X`.
    pub margin: f64,
    pub ci_half_width: f64,
}

impl MarginPoint {
    pub fn lower(&self) -> f64 {
        self.margin - self.ci_half_width
    }

    pub fn upper(&self) -> f64 {
        self.margin + self.ci_half_width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginSeries {
    pub mode: Mode,
    pub norm: NormSpec,
    /// True when computed from paired (common random number) ensembles.
    pub paired: bool,
    pub points: Vec<MarginPoint>,
}

impl MarginSeries {
    /// Paired margin between two ensembles run with the same seed, paths and
    /// sampling: the confidence interval comes from per-unit differences.
    pub fn coupled(x: &Ensemble, y: &Ensemble, norm: NormSpec, mode: Mode) -> Result<Self> {
        if !x.is_coupled_with(y) {
            return Err(Error::InvalidArgument(
                "ensembles are not coupled (seed, paths, horizon, sampling and dimensions must match)".into(),
            ));
        }
        let points = (0..=x.horizon)
            .map(|t| {
                let (ex, sx) = unit_scores(x, norm, mode, t);
                let (ey, sy) = unit_scores(y, norm, mode, t);
                let diffs: Vec<f64> = sy.iter().zip(&sx).map(|(a, b)| a - b).collect();
                let (_, se) = mean_and_se(&diffs);
                MarginPoint { t, margin: ey - ex, ci_half_width: Z95 * se }
            })
            .collect();
        Ok(Self { mode, norm, paired: true, points })
    }

    /// Unpaired margin from two independent series; widths add in quadrature.
    pub fn from_series(x: &NormSeriesEstimate, y: &NormSeriesEstimate) -> Result<Self> {
        if x.norm != y.norm || x.mode != y.mode {
            return Err(Error::InvalidArgument(format!(
                "series differ in norm or mode: {}/{} vs {}/{}",
                x.norm.name(),
                x.mode.name(),
                y.norm.name(),
                y.mode.name()
            )));
        }
        let points = y
            .points
            .iter()
            .filter_map(|py| {
                x.at(py.t).map(|px| MarginPoint {
                    t: py.t,
                    margin: py.estimate - px.estimate,
                    ci_half_width: px.ci_half_width.hypot(py.ci_half_width),
                })
            })
            .collect();
        Ok(Self { mode: x.mode, norm: x.norm, paired: false, points })
    }

    pub fn at(&self, t: usize) -> Option<&MarginPoint> {
        self.points.iter().find(|p| p.t == t)
    }

    pub fn last(&self) -> Option<&MarginPoint> {
        self.points.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictKind {
    Interval,
    LongRun,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictMethod {
    MonteCarlo,
    Spectral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<[usize; 2]>,
    pub holds: bool,
    pub method: VerdictMethod,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub margins: Vec<MarginPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode_coordinate: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

fn check_interval(interval: [usize; 2]) -> Result<()> {
    if interval[0] > interval[1] {
        return Err(Error::InvalidArgument(format!("empty interval {interval:?}")));
    }
    Ok(())
}

/// Holds iff the lower 95% bound of `Y − X` is positive at every t in B.
pub fn interval_verdict_from_margin(margin: &MarginSeries, interval: [usize; 2]) -> Result<Verdict> {
    check_interval(interval)?;
    let mut within = Vec::new();
    for t in interval[0]..=interval[1] {
        let p = margin
            .at(t)
            .ok_or_else(|| Error::InvalidArgument(format!("margin series does not cover t = {t}")))?;
        within.push(*p);
    }
    let holds = within.iter().all(|p| p.lower() > 0.0);
    Ok(Verdict {
        kind: VerdictKind::Interval,
        interval: Some(interval),
        holds,
        method: VerdictMethod::MonteCarlo,
        margins: within,
        spectral_radius: None,
        mode_coordinate: None,
        warnings: Vec::new(),
    })
}

/// Interval verdict from two separately estimated series.
pub fn interval_verdict(
    series_x: &NormSeriesEstimate,
    series_y: &NormSeriesEstimate,
    interval: [usize; 2],
) -> Result<Verdict> {
    interval_verdict_from_margin(&MarginSeries::from_series(series_x, series_y)?, interval)
}

#[derive(Debug, Clone, PartialEq)]
pub enum LongRunMethod {
    Spectral,
    /// Finite-horizon proxy: compares the tail of the coupled mean-level margin.
    MonteCarlo { config: EnsembleConfig, norm: NormSpec },
}

/// Whether expected inequity norms under `spec` stay above the baseline's
/// limit (zero) as t → ∞, starting from `state0`.
pub fn longrun_verdict(spec: &SystemSpec, state0: &PopulationState, method: &LongRunMethod) -> Result<Verdict> {
    let map = build_expectation_map(spec)?;
    let report = eigen_analysis(&map)?;
    let rho = report.spectral_radius;
    match method {
        LongRunMethod::Spectral => {
            let coord = report.mode_coordinate(state0.values());
            let scale = state0.values().iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
            let holds = report.classification != Classification::Stable
                && coord.is_some_and(|c| c.abs() > 1e-12 * scale);
            Ok(Verdict {
                kind: VerdictKind::LongRun,
                interval: None,
                holds,
                method: VerdictMethod::Spectral,
                margins: Vec::new(),
                spectral_radius: Some(rho),
                mode_coordinate: coord,
                warnings: Vec::new(),
            })
        }
        LongRunMethod::MonteCarlo { config, norm } => {
            let mut warnings = vec!["finite-horizon proxy for a limit; prefer the spectral method".to_string()];
            let t_end = config.horizon;
            if rho < 1.0 && (t_end as f64) < 10.0 / (1.0 - rho) {
                warnings.push(format!(
                    "horizon {t_end} is shorter than 10/(1-rho) = {:.1}",
                    10.0 / (1.0 - rho)
                ));
            }
            let x = run_ensemble(&spec.without_terms(), state0, config)?;
            let y = run_ensemble(spec, state0, config)?;
            let margin = MarginSeries::coupled(&x, &y, *norm, Mode::MeanLevel)?;
            let last = *margin.last().expect("horizon >= 0");
            let quarter = margin.at(t_end * 3 / 4).expect("covered");
            let holds = last.lower() > 0.0 && last.margin >= quarter.margin;
            let tail = margin.points[t_end * 3 / 4..].to_vec();
            Ok(Verdict {
                kind: VerdictKind::LongRun,
                interval: None,
                holds,
                method: VerdictMethod::MonteCarlo,
                margins: tail,
                spectral_radius: Some(rho),
                mode_coordinate: report.mode_coordinate(state0.values()),
                warnings,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::EnsembleConfig;
    use crate::process::{DecayFactor, ShockModel};
    use crate::system::{MultiplierTerm, Term};

    fn spillover() -> (SystemSpec, PopulationState) {
        let spec = SystemSpec::new(
            DecayFactor::new(0.5).unwrap(),
            ShockModel::Gaussian { sigma: 0.1 },
            (1, 2),
            vec![Term::spillover(0, 1, 0.4)],
        )
        .unwrap();
        (spec, PopulationState::new(1, 2, vec![0.0, 1.0]).unwrap())
    }

    #[test]
    fn dispersion_dominates_mean_level() {
        let (spec, s0) = spillover();
        let ens = run_ensemble(&spec, &s0, &EnsembleConfig::new(30, 2000, 5)).unwrap();
        for norm in [NormSpec::MeanAbsolute, NormSpec::MaxAbsolute, NormSpec::RootMeanSquare] {
            let ml = estimate_norm_series(&ens, norm, Mode::MeanLevel);
            let dp = estimate_norm_series(&ens, norm, Mode::Dispersion);
            for (a, b) in ml.points.iter().zip(&dp.points) {
                assert!(b.estimate >= a.estimate * (1.0 - 1e-12), "{norm:?} t={}", a.t);
            }
        }
    }

    #[test]
    fn spillover_interval_verdict_holds() {
        let (spec, s0) = spillover();
        let cfg = EnsembleConfig::new(20, 10_000, 17).antithetic();
        let x = run_ensemble(&spec.without_terms(), &s0, &cfg).unwrap();
        let y = run_ensemble(&spec, &s0, &cfg).unwrap();
        let m = MarginSeries::coupled(&x, &y, NormSpec::MeanAbsolute, Mode::MeanLevel).unwrap();
        let v = interval_verdict_from_margin(&m, [1, 20]).unwrap();
        assert!(v.holds);
        assert_eq!(v.margins.len(), 20);

        let unpaired = interval_verdict(
            &estimate_norm_series(&x, NormSpec::MeanAbsolute, Mode::MeanLevel),
            &estimate_norm_series(&y, NormSpec::MeanAbsolute, Mode::MeanLevel),
            [1, 20],
        )
        .unwrap();
        assert!(unpaired.holds);
    }

    #[test]
    fn empty_system_never_discriminates() {
        let (spec, s0) = spillover();
        let cfg = EnsembleConfig::new(10, 1000, 2);
        let x = run_ensemble(&spec.without_terms(), &s0, &cfg).unwrap();
        let y = run_ensemble(&spec.without_terms(), &s0, &cfg).unwrap();
        let m = MarginSeries::coupled(&x, &y, NormSpec::MeanAbsolute, Mode::MeanLevel).unwrap();
        assert!(m.points.iter().all(|p| p.margin == 0.0 && p.ci_half_width == 0.0));
        assert!(!interval_verdict_from_margin(&m, [1, 10]).unwrap().holds);
    }

    #[test]
    fn interval_containing_origin_fails() {
        let (spec, s0) = spillover();
        let cfg = EnsembleConfig::new(10, 1000, 2).antithetic();
        let x = run_ensemble(&spec.without_terms(), &s0, &cfg).unwrap();
        let y = run_ensemble(&spec, &s0, &cfg).unwrap();
        let m = MarginSeries::coupled(&x, &y, NormSpec::MeanAbsolute, Mode::MeanLevel).unwrap();
        assert!(!interval_verdict_from_margin(&m, [0, 10]).unwrap().holds);
        assert!(interval_verdict_from_margin(&m, [1, 10]).unwrap().holds);
        assert!(interval_verdict_from_margin(&m, [5, 11]).is_err());
        assert!(interval_verdict_from_margin(&m, [5, 4]).is_err());
    }

    #[test]
    fn mismatched_series_rejected() {
        let (spec, s0) = spillover();
        let ens = run_ensemble(&spec, &s0, &EnsembleConfig::new(3, 10, 2)).unwrap();
        let a = estimate_norm_series(&ens, NormSpec::MeanAbsolute, Mode::MeanLevel);
        let b = estimate_norm_series(&ens, NormSpec::MeanAbsolute, Mode::Dispersion);
        let c = estimate_norm_series(&ens, NormSpec::MaxAbsolute, Mode::MeanLevel);
        assert!(interval_verdict(&a, &b, [1, 3]).is_err());
        assert!(interval_verdict(&a, &c, [1, 3]).is_err());
    }

    #[test]
    fn uncoupled_ensembles_rejected() {
        let (spec, s0) = spillover();
        let x = run_ensemble(&spec, &s0, &EnsembleConfig::new(3, 10, 2)).unwrap();
        let y = run_ensemble(&spec, &s0, &EnsembleConfig::new(3, 10, 3)).unwrap();
        assert!(MarginSeries::coupled(&x, &y, NormSpec::MeanAbsolute, Mode::MeanLevel).is_err());
    }

    #[test]
    fn longrun_spectral_examples() {
        let (spec, s0) = spillover();
        assert!(!longrun_verdict(&spec, &s0, &LongRunMethod::Spectral).unwrap().holds);

        let strong = SystemSpec::new(
            DecayFactor::new(0.6).unwrap(),
            ShockModel::Gaussian { sigma: 0.1 },
            (2, 1),
            vec![Term::Multiplier(MultiplierTerm::two_agent(0, 0.3, 0.9))],
        )
        .unwrap();
        let ones = PopulationState::new(2, 1, vec![1.0, 1.0]).unwrap();
        let v = longrun_verdict(&strong, &ones, &LongRunMethod::Spectral).unwrap();
        assert!(v.holds);
        assert!((v.spectral_radius.unwrap() - (0.6 + 0.27f64.sqrt())).abs() < 1e-10);

        let reinf = SystemSpec::new(
            DecayFactor::new(0.5).unwrap(),
            ShockModel::Gaussian { sigma: 0.1 },
            (1, 2),
            vec![Term::reinforcement(0, 1, 0.8, 0.8)],
        )
        .unwrap();
        let s = PopulationState::new(1, 2, vec![1.0, 1.0]).unwrap();
        assert!(longrun_verdict(&reinf, &s, &LongRunMethod::Spectral).unwrap().holds);
        // No projection on the growing mode: nothing to amplify.
        let flat = PopulationState::new(1, 2, vec![1.0, -1.0]).unwrap();
        assert!(!longrun_verdict(&reinf, &flat, &LongRunMethod::Spectral).unwrap().holds);
    }

    #[test]
    fn longrun_monte_carlo_proxy() {
        let reinf = SystemSpec::new(
            DecayFactor::new(0.5).unwrap(),
            ShockModel::Gaussian { sigma: 0.1 },
            (1, 2),
            vec![Term::reinforcement(0, 1, 0.8, 0.8)],
        )
        .unwrap();
        let s = PopulationState::new(1, 2, vec![1.0, 1.0]).unwrap();
        let method = LongRunMethod::MonteCarlo {
            config: EnsembleConfig::new(60, 200, 1).antithetic(),
            norm: NormSpec::MeanAbsolute,
        };
        let v = longrun_verdict(&reinf, &s, &method).unwrap();
        assert!(v.holds);
        assert_eq!(v.method, VerdictMethod::MonteCarlo);

        let (spec, s0) = spillover();
        let short = LongRunMethod::MonteCarlo {
            config: EnsembleConfig::new(12, 200, 1).antithetic(),
            norm: NormSpec::MeanAbsolute,
        };
        let v = longrun_verdict(&spec, &s0, &short).unwrap();
        assert!(!v.holds);
        assert!(v.warnings.iter().any(|w| w.contains("shorter than")));
    }
}
