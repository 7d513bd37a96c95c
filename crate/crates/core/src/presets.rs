//! Built-in scenarios for the figure regimes and the single-mechanism demos.
//!
//! Two readings are baked in here. The two-agent multiplier figure labels its
//! stronger case with the first weight (d1 = 0.3, d2 = 0.9), and the
//! reinforcement figure's strengths are read as b = c = value.

use crate::ensemble::Sampling;
use crate::error::{Error, Result};
use crate::process::ShockModel;
use crate::scenario::ScenarioFile;
use crate::system::{MultiplierTerm, Term};

pub const PRESET_IDS: [&str; 9] = [
    "fig1-weak",
    "fig1-strong",
    "fig2-stable",
    "fig2-knife",
    "fig2-unstable",
    "fig3-b-gt-c",
    "fig3-c-gt-b",
    "spillover-demo",
    "synergy-demo",
];

const SHOCK: ShockModel = ShockModel::Gaussian { sigma: 0.1 };

fn base(name: &str, description: &str, persons: usize, inequities: usize, delta: f64) -> ScenarioFile {
    let mut s = ScenarioFile::minimal(name, persons, inequities, delta);
    s.description = Some(description.to_string());
    s.shock = SHOCK;
    s.horizon = 200;
    s.paths = 10_000;
    s.sampling = Sampling::Antithetic;
    s.interval = Some([1, 50]);
    s
}

fn multiplier(name: &str, d1: f64) -> ScenarioFile {
    let mut s = base(name, "two persons coupled through one inequity", 2, 1, 0.6);
    s.terms = vec![Term::Multiplier(MultiplierTerm::two_agent(0, d1, 0.9))];
    s.initial_state = Some(vec![vec![1.0], vec![1.0]]);
    s
}

fn reinforcement(name: &str, b: f64, c: f64) -> ScenarioFile {
    let mut s = base(name, "feedback loop between two inequities of one person", 1, 2, 0.5);
    s.dimensions.labels = vec!["wealth".into(), "neighborhood".into()];
    s.terms = vec![Term::reinforcement(0, 1, b, c)];
    s.initial_state = Some(vec![vec![1.0, 1.0]]);
    s
}

pub fn load_preset(id: &str) -> Result<ScenarioFile> {
    let s = match id {
        "fig1-weak" => multiplier(id, 0.1),
        "fig1-strong" => multiplier(id, 0.3),
        "fig2-stable" => reinforcement(id, 0.2, 0.2),
        "fig2-knife" => reinforcement(id, 0.5, 0.5),
        "fig2-unstable" => reinforcement(id, 0.8, 0.8),
        "fig3-b-gt-c" => reinforcement(id, 0.9, 0.4),
        "fig3-c-gt-b" => reinforcement(id, 0.4, 0.9),
        "spillover-demo" => {
            let mut s = base(id, "inequity 1 spills into inequity 0", 1, 2, 0.5);
            s.terms = vec![Term::spillover(0, 1, 0.4)];
            s.initial_state = Some(vec![vec![0.0, 1.0]]);
            s
        }
        "synergy-demo" => {
            let mut s = base(id, "inequity 1 scales the shocks to inequity 0", 1, 2, 0.5);
            s.terms = vec![Term::synergy(0, 1, 0.5)];
            s.initial_state = Some(vec![vec![0.0, 1.0]]);
            s
        }
        _ => return Err(Error::UnknownPreset(id.to_string())),
    };
    Ok(s)
}
