//! Resilience assessment of power distribution grids under probabilistic
//! wind events.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`hazard`] samples line failures from fragility curves at each wind
//!    intensity of a discretized scenario set.
//! 2. [`engine`] replays each trial over the outage/restoration timeline of a
//!    [`grid::Network`] in base or smart mode and computes the five
//!    [`params::ParameterVector`] entries, averaged per scenario.
//! 3. [`risk`] normalizes each parameter across scenarios and summarizes its
//!    worst tail with CVaR.
//! 4. [`mcdm`] turns expert densities into Shapley weights and aggregates the
//!    CVaRs with a Choquet integral into one resilience score.

pub mod engine;
pub mod grid;
pub mod hazard;
pub mod mcdm;
pub mod params;
pub mod risk;

pub use engine::{ScenarioStats, TimelineConfig, TrialResult, TrialSettings};
pub use grid::{load_network, Mode, Network};
pub use hazard::{FragilityCurve, WindScenario, WindScenarioSet};
pub use params::{Param, ParameterVector};
