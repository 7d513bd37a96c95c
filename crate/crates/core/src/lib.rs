//! Simulation and spectral-stability analysis of inequity processes under
//! amplification: a baseline decaying stochastic process, four amplifier
//! kinds layered on top of it, the linear map driving expected inequities,
//! Monte Carlo estimation of norm series and discrimination verdicts, and
//! disrupt/exploit interventions with tipping thresholds.

pub mod analysis;
pub mod ensemble;
pub mod error;
pub mod estimate;
pub mod export;
pub mod intervention;
pub mod norm;
pub mod portrait;
pub mod presets;
pub mod process;
pub mod propositions;
pub mod rng;
pub mod scenario;
pub mod spectral;
pub mod synergy;
pub mod system;

pub use error::{Error, FieldError, Result};
