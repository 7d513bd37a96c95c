//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_UNATTAINABLE` are evaluated exactly as stated
//! and reported, but do not fail the run; any other failure does.

use std::f64::consts::{PI, SQRT_2};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use amplify::ensemble::{run_ensemble, EnsembleConfig};
use amplify::estimate::{estimate_norm_series, Mode};
use amplify::intervention::{terminal_mode_coordinate, tipping_threshold};
use amplify::norm::NormSpec;
use amplify::portrait::{phase_portrait, portrait_from, Grid, PortraitOptions};
use amplify::presets::load_preset;
use amplify::process::{DecayFactor, PopulationState, ShockModel};
use amplify::propositions::{check_all, CheckKind, CheckOptions, TERMINAL_MARGIN_TOL};
use amplify::spectral::{build_expectation_map, eigen_analysis, Classification, ExpectationMap};
use amplify::synergy::conditional_mean_series;
use amplify::system::{MultiplierTerm, SystemSpec, Term};

const RHO_TOL: f64 = 1e-10;
const PORTRAIT_NORM: f64 = 1e-3;
const PORTRAIT_DURATION: f64 = 30.0;
const KNIFE_PERP_TOL: f64 = 1e-6;
const FIG_RUNTIME: Duration = Duration::from_secs(1);
const SUITE_RUNTIME: Duration = Duration::from_secs(60);
const CLOSED_FORM_TOL: f64 = 1e-10;
const ORACLE_SE: f64 = 3.0;
const ORACLE_MAX_FAILURES: usize = 2;
const HALF_NORMAL_TOL: f64 = 1e-4;
const TIPPING_TOL: f64 = 1e-6;
const ESCAPE_OFFSET: f64 = 0.01;
const ESCAPE_HORIZON: usize = 50;
const DISPERSION_FLOOR: f64 = 0.05;
const MEAN_LEVEL_CEIL: f64 = 1e-3;

/// Criterion 1 asks fig1-weak portraits from the unit grid to reach norm
/// 1e-3 by t = 30. The slowest mode of the flow decays like e^{-0.1 t}, so
/// the corner (1, 1) is still near 0.1 at t = 30.
const KNOWN_UNATTAINABLE: &[u32] = &[1];

type Criterion = (u32, &'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn spec_of(id: &str) -> SystemSpec {
    load_preset(id).unwrap().system().unwrap()
}

fn map_of(id: &str) -> ExpectationMap {
    build_expectation_map(&spec_of(id)).unwrap()
}

fn norm2(y: [f64; 2]) -> f64 {
    (y[0] * y[0] + y[1] * y[1]).sqrt()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let weak = eigen_analysis(&map_of("fig1-weak")).unwrap();
    let weak_ok = weak.classification == Classification::Stable && (weak.spectral_radius - 0.9).abs() <= RHO_TOL;
    let opts = PortraitOptions { duration: PORTRAIT_DURATION, ..PortraitOptions::default() };
    let p = phase_portrait(&map_of("fig1-weak"), &Grid::unit(5), opts).unwrap();
    let worst = p.trajectories.iter().map(|t| norm2(t.end())).fold(0.0, f64::max);
    let settle_ok = worst < PORTRAIT_NORM;
    let weak_time = start.elapsed();

    let start = Instant::now();
    let strong = eigen_analysis(&map_of("fig1-strong")).unwrap();
    let strong_ok = strong.classification == Classification::Unstable
        && (strong.spectral_radius - (0.6 + 0.27f64.sqrt())).abs() <= RHO_TOL;
    let p = portrait_from(&map_of("fig1-strong"), &[[1.0, 1.0], [-1.0, -1.0]], opts).unwrap();
    let (a, b) = (p.trajectories[0].end(), p.trajectories[1].end());
    let diverge_ok = a[0] > 1.0 && a[1] > 1.0 && b[0] < -1.0 && b[1] < -1.0 && norm2(a) > norm2([1.0, 1.0]);
    let strong_time = start.elapsed();

    outcome(
        weak_ok && settle_ok && strong_ok && diverge_ok && weak_time < FIG_RUNTIME && strong_time < FIG_RUNTIME,
        format!(
            "weak rho={:.12} {:?}; max grid norm at t=30 {:.4} (< {PORTRAIT_NORM}: {settle_ok}); strong rho={:.12} {:?}; \
             ends {:?} / {:?}; {:?} + {:?}",
            weak.spectral_radius, weak.classification, worst, strong.spectral_radius, strong.classification, a, b,
            weak_time, strong_time
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut detail = Vec::new();
    for (id, want) in [
        ("fig2-stable", Classification::Stable),
        ("fig2-knife", Classification::KnifeEdge),
        ("fig2-unstable", Classification::Unstable),
    ] {
        let r = eigen_analysis(&map_of(id)).unwrap();
        ok &= r.classification == want;
        detail.push(format!("{id} rho={:.12} {:?}", r.spectral_radius, r.classification));
        if want == Classification::KnifeEdge {
            ok &= (r.spectral_radius - 1.0).abs() < RHO_TOL;
        }
    }
    let p = phase_portrait(&map_of("fig2-knife"), &Grid::unit(5), PortraitOptions::default()).unwrap();
    let perp = p
        .trajectories
        .iter()
        .map(|t| {
            let [x, y] = t.end();
            (x - y).abs() / SQRT_2
        })
        .fold(0.0, f64::max);
    ok &= perp < KNIFE_PERP_TOL;
    let elapsed = start.elapsed();
    ok &= elapsed < FIG_RUNTIME;
    outcome(ok, format!("{}; knife-edge max perpendicular distance {perp:.3e}; {elapsed:?}", detail.join(", ")))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let checks = check_all(&CheckOptions::default()).unwrap();
    let elapsed = start.elapsed();
    let mut ok = checks.len() == 8 && checks.iter().all(|c| c.passed) && elapsed < SUITE_RUNTIME;
    let mut parts = Vec::new();
    for c in &checks {
        match c.kind {
            CheckKind::NotLongRun => {
                let m = c.evidence.margins.last().unwrap().margin;
                ok &= m.abs() < TERMINAL_MARGIN_TOL;
                parts.push(format!("{}={} |m(T)|={:.1e}", c.id, c.passed, m.abs()));
            }
            CheckKind::Interval => {
                let lo = c.evidence.margins.iter().map(|p| p.lower()).fold(f64::INFINITY, f64::min);
                ok &= c.tolerances.interval == [1, 50] && lo > 0.0;
                parts.push(format!("{}={} min lower {:.2e}", c.id, c.passed, lo));
            }
            CheckKind::LongRun => parts.push(format!("{}={} rho={:.4}", c.id, c.passed, c.evidence.spectral_radius)),
        }
    }
    outcome(ok, format!("{}; {elapsed:?}", parts.join(", ")))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for mech in 0..2 {
        for _ in 0..100 {
            let delta = rng.random_range(0.05..0.95);
            let p: f64 = rng.random_range(0.01..1.5);
            let q: f64 = rng.random_range(0.01..1.5);
            let d = DecayFactor::new(delta).unwrap();
            let (spec, s) = if mech == 0 {
                let spec = SystemSpec::new(d, ShockModel::DegenerateZero, (1, 2), vec![Term::reinforcement(0, 1, p, q)]);
                (spec.unwrap(), (p * q).sqrt())
            } else {
                let term = Term::Multiplier(MultiplierTerm::two_agent(0, p, q));
                (SystemSpec::new(d, ShockModel::DegenerateZero, (2, 1), vec![term]).unwrap(), (p * q).sqrt())
            };
            let r = eigen_analysis(&build_expectation_map(&spec).unwrap()).unwrap();
            let mut got: Vec<f64> = r.eigenvalues.iter().map(|z| z.re).collect();
            got.sort_by(f64::total_cmp);
            let imag = r.eigenvalues.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
            let err = (got[0] - (delta - s)).abs().max((got[1] - (delta + s)).abs()).max(imag);
            worst = worst.max(err);
        }
    }
    outcome(worst <= CLOSED_FORM_TOL, format!("200 triples, max eigenvalue error {worst:.2e}"))
}

fn criterion_5() -> Outcome {
    let delta = 0.5;
    let x0 = 1.0;
    let spec = SystemSpec::baseline(DecayFactor::new(delta).unwrap(), ShockModel::Gaussian { sigma: 0.1 }, (1, 1)).unwrap();
    let s0 = PopulationState::new(1, 1, vec![x0]).unwrap();
    let mut failures = 0;
    for rep in 0..50u64 {
        let ens = run_ensemble(&spec, &s0, &EnsembleConfig::new(20, 10_000, 500 + rep)).unwrap();
        let bad = [1usize, 5, 20].iter().any(|&t| {
            (ens.mean[t][0] - delta.powi(t as i32) * x0).abs() > ORACLE_SE * ens.std_error[t][0]
        });
        failures += usize::from(bad);
    }
    outcome(failures <= ORACLE_MAX_FAILURES, format!("{failures}/50 repetitions outside 3 SE"))
}

fn criterion_6() -> Outcome {
    let scenario = load_preset("synergy-demo").unwrap();
    let spec = scenario.system().unwrap();
    let [pos, neg] = conditional_mean_series(&spec, &scenario.initial().unwrap(), 10, 100_000, 6).unwrap();
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for series in [&pos, &neg] {
        for t in [1usize, 3, 10] {
            let p = &series.points[t - 1];
            let z = (p.recursion - p.monte_carlo).abs() / p.std_error;
            worst = worst.max(z);
            ok &= z <= ORACLE_SE;
        }
    }
    let sigma = 0.1;
    let e = spec.shock.positive_mean().unwrap();
    let e_err = (e - sigma * (2.0 / PI).sqrt()).abs();
    ok &= e_err <= HALF_NORMAL_TOL;
    outcome(ok, format!("max |recursion - filtered MC| = {worst:.2} SE; e_j error {e_err:.1e}"))
}

fn criterion_7() -> Outcome {
    let map = build_expectation_map(&spec_of("fig2-unstable")).unwrap();
    let s0 = [1.0, 1.0];
    let d = [-1.0 / SQRT_2, -1.0 / SQRT_2];
    let r = tipping_threshold(&map, &s0, &d).unwrap();
    let analytic_ok = (r.critical_magnitude - SQRT_2).abs() < 1e-12;
    let gap = (r.critical_magnitude - r.bisection_magnitude).abs();
    let at = |tau: f64| {
        let s: Vec<f64> = s0.iter().zip(&d).map(|(a, b)| a + tau * b).collect();
        terminal_mode_coordinate(&map, &s, ESCAPE_HORIZON).unwrap()
    };
    let below = at(r.critical_magnitude - ESCAPE_OFFSET);
    let above = at(r.critical_magnitude + ESCAPE_OFFSET);
    let escape_ok = below > 0.0 && above < 0.0;
    outcome(
        analytic_ok && gap < TIPPING_TOL && escape_ok,
        format!(
            "tau*={:.15} bisection={:.15} (gap {gap:.1e}); mode coordinate at T=50: {below:.3e} / {above:.3e}",
            r.critical_magnitude, r.bisection_magnitude
        ),
    )
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.json");
    std::fs::write(&scenario, load_preset("fig2-stable").unwrap().to_json()).unwrap();
    let run = |threads: &str, name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_amplify"))
            .args(["--threads", threads, "simulate"])
            .arg(&scenario)
            .args(["--paths", "2000", "--seed", "88", "--out"])
            .arg(&out)
            .env_remove("RUN_SEED")
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out).unwrap()
    };
    let a = run("1", "a.csv");
    let b = run("4", "b.csv");
    let c = run("1", "c.csv");
    outcome(a == b && a == c && !a.is_empty(), format!("{} bytes, 1 vs 4 threads identical: {}", a.len(), a == b))
}

fn criterion_9() -> Outcome {
    let spec = SystemSpec::baseline(DecayFactor::new(0.6).unwrap(), ShockModel::Gaussian { sigma: 0.1 }, (1, 1)).unwrap();
    let s0 = PopulationState::new(1, 1, vec![1.0]).unwrap();
    let ens = run_ensemble(&spec, &s0, &EnsembleConfig::new(100, 10_000, 9).antithetic()).unwrap();
    let ml = estimate_norm_series(&ens, NormSpec::MeanAbsolute, Mode::MeanLevel);
    let dp = estimate_norm_series(&ens, NormSpec::MeanAbsolute, Mode::Dispersion);
    let ml_max = ml.points[40..].iter().map(|p| p.estimate).fold(0.0, f64::max);
    let tail: Vec<f64> = dp.points[75..].iter().map(|p| p.estimate).collect();
    let tail_min = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let tail_spread = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max) - tail_min;
    let ci = dp.points[100].ci_half_width;
    let ok = ml_max < MEAN_LEVEL_CEIL && tail_min > DISPERSION_FLOOR && tail_spread < 4.0 * ci;
    outcome(
        ok,
        format!(
            "mean-level max over t>=40 {ml_max:.2e}; dispersion t>=75 in [{tail_min:.4}, {:.4}] (ci {ci:.1e})",
            tail_min + tail_spread
        ),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "two-agent multiplier regimes", criterion_1),
        (2, "reinforcement regimes", criterion_2),
        (3, "proposition suite", criterion_3),
        (4, "closed-form spectra", criterion_4),
        (5, "baseline Monte Carlo oracle", criterion_5),
        (6, "synergy conditional means", criterion_6),
        (7, "tipping threshold", criterion_7),
        (8, "thread-count determinism", criterion_8),
        (9, "mode divergence", criterion_9),
    ];
    let mut unexpected = Vec::new();
    for (n, name, f) in criteria {
        let o = f();
        let known = KNOWN_UNATTAINABLE.contains(&n);
        let tag = match (o.passed, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known unattainable)",
            (false, false) => "FAIL",
        };
        println!("{tag} criterion {n} {name}: {}", o.detail);
        if !o.passed && !known {
            unexpected.push(n);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
