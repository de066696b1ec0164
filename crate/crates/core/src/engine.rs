//! Monte-Carlo trials over the phased outage/restoration timeline.
//!
//! Phase 1 runs fault-free for `t1_up`. The event strikes at its end and
//! lasts `event_duration` (phase 2); critical loads cut off by failed lines
//! go down at that instant. Phase 3 is damage assessment, shorter in smart
//! mode. In smart mode the phase-4 pickup closes tie switches and brings
//! DGs online at the end of phase 3; base mode picks up nothing before the
//! horizon ends.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridError, LineMask, Mode, Network, PathCount, SourceId, DEFAULT_PATH_CAP};
use crate::hazard::{sample_line_failures, trial_rng, WindScenarioSet};
use crate::params::ParameterVector;

/// Resistance reported for a trial in which no critical load went down.
pub const DEFAULT_RESISTANCE_CAP: f64 = 1e3;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid timeline: {0}")]
    Timeline(String),
    #[error("network has no critical loads")]
    NoCriticalLoads,
    #[error("total critical-load time is zero")]
    ZeroHorizon,
    #[error("resourcefulness undefined: no tie switches and no sources")]
    NoResources,
    #[error("n_trials must be at least 1")]
    NoTrials,
    #[error("scenario index {0} out of range")]
    ScenarioIndex(usize),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelineConfig {
    #[serde(rename = "t1_up_hours")]
    pub t1_up: f64,
    #[serde(rename = "event_duration_hours")]
    pub event_duration: f64,
    #[serde(rename = "assessment_time_base_hours")]
    pub assessment_time_base: f64,
    #[serde(rename = "assessment_time_smart_hours")]
    pub assessment_time_smart: f64,
    #[serde(rename = "restoration_duration_hours")]
    pub restoration_duration: f64,
    #[serde(rename = "horizon_hours")]
    pub horizon: f64,
}

impl Default for TimelineConfig {
    fn default() -> Self {
        TimelineConfig {
            t1_up: 4.0,
            event_duration: 6.0,
            assessment_time_base: 12.0,
            assessment_time_smart: 2.0,
            restoration_duration: 4.0,
            horizon: 48.0,
        }
    }
}

impl TimelineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let fields = [
            ("t1_up_hours", self.t1_up),
            ("event_duration_hours", self.event_duration),
            ("assessment_time_base_hours", self.assessment_time_base),
            ("assessment_time_smart_hours", self.assessment_time_smart),
            ("restoration_duration_hours", self.restoration_duration),
            ("horizon_hours", self.horizon),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(EngineError::Timeline(format!("{name} must be positive, got {value}")));
            }
        }
        if self.assessment_time_smart > self.assessment_time_base {
            return Err(EngineError::Timeline(
                "smart assessment time exceeds base assessment time".into(),
            ));
        }
        let used = self.t1_up + self.event_duration + self.assessment_time_base + self.restoration_duration;
        if used > self.horizon {
            return Err(EngineError::Timeline(format!(
                "phases 1-4 take {used} h, longer than the {} h horizon",
                self.horizon
            )));
        }
        Ok(())
    }

    pub fn assessment_time(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Base => self.assessment_time_base,
            Mode::Smart => self.assessment_time_smart,
        }
    }

    /// Time from the start of the horizon until repair/restoration begins.
    pub fn restoration_start(&self, mode: Mode) -> f64 {
        self.t1_up + self.event_duration + self.assessment_time(mode)
    }
}

/// Knobs shared by every trial of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSettings {
    pub path_cap: u64,
    pub resistance_cap: f64,
}

impl Default for TrialSettings {
    fn default() -> Self {
        TrialSettings {
            path_cap: DEFAULT_PATH_CAP,
            resistance_cap: DEFAULT_RESISTANCE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub mode: Mode,
    pub failed_lines: LineMask,
    /// Percentage of lines failed, ties included.
    pub damage_pct: f64,
    pub n_critical: usize,
    pub n_bar: usize,
    pub n_prime: usize,
    pub theta_max: f64,
    /// Event severity used for resistance.
    pub severity: f64,
    /// Per critical load, aligned with [`Network::critical_buses`].
    pub per_cl_uptime: Vec<f64>,
    pub per_cl_downtime: Vec<f64>,
    pub paths: PathCount,
    pub params: ParameterVector,
}

impl TrialResult {
    pub fn uptime_by_id<'a>(&self, net: &'a Network) -> Vec<(&'a str, f64)> {
        net.critical_buses()
            .iter()
            .zip(&self.per_cl_uptime)
            .map(|(&b, &t)| (net.buses()[b].id.as_str(), t))
            .collect()
    }
}

/// Fraction of critical-load time spent online.
pub fn availability(trial: &TrialResult) -> Result<f64, EngineError> {
    let up: f64 = trial.per_cl_uptime.iter().sum();
    let down: f64 = trial.per_cl_downtime.iter().sum();
    if up + down <= 0.0 {
        return Err(EngineError::ZeroHorizon);
    }
    Ok(up / (up + down))
}

pub fn robustness(trial: &TrialResult) -> Result<f64, EngineError> {
    if trial.n_critical == 0 {
        return Err(EngineError::NoCriticalLoads);
    }
    Ok(trial.n_bar as f64 / trial.n_critical as f64)
}

/// Disruption relative to damage; zero when nothing was disrupted.
pub fn brittleness(trial: &TrialResult) -> f64 {
    if trial.theta_max <= 0.0 || trial.damage_pct <= 0.0 {
        0.0
    } else {
        100.0 * trial.theta_max / trial.damage_pct
    }
}

/// Event-weighted pre-event uptime relative to outage incidence and the
/// delay before restoration starts. Capped when nothing was disrupted.
pub fn resistance(trial: &TrialResult, severity: f64, tc: &TimelineConfig, cap: f64) -> f64 {
    if trial.theta_max <= 0.0 {
        return cap;
    }
    let pre_event_uptime = tc.t1_up * trial.n_critical as f64;
    severity * pre_event_uptime
        / (trial.theta_max * trial.n_critical as f64 * tc.restoration_start(trial.mode))
}

/// `N_P / ((N_SW + N_S) * N_C)`.
pub fn resourcefulness_ratio(
    n_paths: u64,
    n_switches: usize,
    n_sources: usize,
    n_critical: usize,
) -> Result<f64, EngineError> {
    if n_switches + n_sources == 0 {
        return Err(EngineError::NoResources);
    }
    if n_critical == 0 {
        return Err(EngineError::NoCriticalLoads);
    }
    Ok(n_paths as f64 / ((n_switches + n_sources) * n_critical) as f64)
}

/// Switch and source counts that a mode brings to restoration. Base mode has
/// no remote-controlled ties and only its base sources.
fn mode_resources(net: &Network, mode: Mode) -> (usize, Vec<SourceId>) {
    let switches = match mode {
        Mode::Base => 0,
        Mode::Smart => net.switchable_ties().len(),
    };
    (switches, net.active_sources(mode))
}

/// Simple paths from the mode's sources to every critical load after the
/// event. Tie lines only exist as traversable edges in smart mode.
pub fn post_event_paths(net: &Network, mode: Mode, failed: &LineMask, cap: u64) -> PathCount {
    let (_, sources) = mode_resources(net, mode);
    let blocked = match mode {
        Mode::Base => failed.union(&net.tie_mask()),
        Mode::Smart => failed.clone(),
    };
    let source_buses: Vec<usize> = sources.iter().map(|&s| net.source_bus(s)).collect();
    net.count_simple_paths(&blocked, &source_buses, net.critical_buses(), cap)
}

pub fn resourcefulness(net: &Network, trial: &TrialResult, cap: u64) -> Result<f64, EngineError> {
    let paths = post_event_paths(net, trial.mode, &trial.failed_lines, cap);
    let (switches, sources) = mode_resources(net, trial.mode);
    resourcefulness_ratio(paths.count, switches, sources.len(), trial.n_critical)
}

/// Greedy phase-4 reconfiguration: scan switchable, unfailed ties in id
/// order and close any that joins an unserved island to a served one when
/// the merged island remains capacity-feasible. Repeats until a full pass
/// closes nothing.
pub fn restore_with_ties(net: &Network, failed: &LineMask, active: &[SourceId]) -> LineMask {
    let mut closed = LineMask::empty(net.lines().len());
    let candidates: Vec<usize> = net
        .switchable_ties()
        .into_iter()
        .filter(|&l| !failed.contains(l))
        .collect();
    if candidates.is_empty() {
        return closed;
    }
    let islands = net.islands(failed, &closed);
    let mut groups: Vec<usize> = (0..islands.count()).collect();
    let mut balance = net.island_balance(&islands, active);
    let mut served: Vec<bool> = balance
        .iter()
        .map(|&(cap, dem)| Network::island_served(cap, dem))
        .collect();

    fn root(groups: &mut [usize], mut g: usize) -> usize {
        while groups[g] != g {
            groups[g] = groups[groups[g]];
            g = groups[g];
        }
        g
    }

    loop {
        let mut changed = false;
        for &tie in &candidates {
            if closed.contains(tie) {
                continue;
            }
            let (a, b) = net.line_ends(tie);
            let ga = root(&mut groups, islands.component_of(a));
            let gb = root(&mut groups, islands.component_of(b));
            if ga == gb || served[ga] == served[gb] {
                continue;
            }
            let cap = balance[ga].0 + balance[gb].0;
            let dem = balance[ga].1 + balance[gb].1;
            if !Network::island_served(cap, dem) {
                continue;
            }
            closed.insert(tie);
            groups[gb] = ga;
            balance[ga] = (cap, dem);
            served[ga] = true;
            changed = true;
        }
        if !changed {
            return closed;
        }
    }
}

/// Evaluates one trial for a given failure set.
pub fn evaluate_trial(
    net: &Network,
    failed: LineMask,
    v: f64,
    tc: &TimelineConfig,
    scenarios: &WindScenarioSet,
    settings: &TrialSettings,
) -> Result<TrialResult, EngineError> {
    let mode = net.mode();
    let n_c = net.n_critical();
    if n_c == 0 {
        return Err(EngineError::NoCriticalLoads);
    }
    let n_lines = net.lines().len();
    let none = LineMask::empty(n_lines);

    // Phase 2: the event topology, supplied by base-mode sources only.
    let after_event = net.energized_buses(&failed, &none, &net.active_sources(Mode::Base));
    let online: Vec<bool> = net.critical_buses().iter().map(|&b| after_event[b]).collect();
    let n_bar = online.iter().filter(|&&on| on).count();

    // Phase 4 pickup.
    let restored: Vec<bool> = match mode {
        Mode::Base => online.clone(),
        Mode::Smart => {
            let sources = net.active_sources(Mode::Smart);
            let closed = restore_with_ties(net, &failed, &sources);
            let after = net.energized_buses(&failed, &closed, &sources);
            net.critical_buses()
                .iter()
                .zip(&online)
                .map(|(&b, &was_on)| was_on || after[b])
                .collect()
        }
    };
    let n_prime = restored.iter().filter(|&&on| on).count();

    let outage_if_restored = tc.event_duration + tc.assessment_time(mode);
    let (per_cl_uptime, per_cl_downtime): (Vec<f64>, Vec<f64>) = online
        .iter()
        .zip(&restored)
        .map(|(&on, &back)| {
            let down = if on {
                0.0
            } else if back {
                outage_if_restored
            } else {
                tc.horizon - tc.t1_up
            };
            (tc.horizon - down, down)
        })
        .unzip();

    let paths = post_event_paths(net, mode, &failed, settings.path_cap);
    let damage_pct = if n_lines == 0 {
        0.0
    } else {
        100.0 * failed.count() as f64 / n_lines as f64
    };
    let severity = scenarios.event_severity(v);

    let mut trial = TrialResult {
        mode,
        failed_lines: failed,
        damage_pct,
        n_critical: n_c,
        n_bar,
        n_prime,
        theta_max: (n_c - n_bar) as f64 / n_c as f64,
        severity,
        per_cl_uptime,
        per_cl_downtime,
        paths,
        params: ParameterVector::default(),
    };
    let (switches, sources) = mode_resources(net, mode);
    trial.params = ParameterVector {
        availability: availability(&trial)?,
        robustness: robustness(&trial)?,
        brittleness: brittleness(&trial),
        resistance: resistance(&trial, severity, tc, settings.resistance_cap),
        resourcefulness: resourcefulness_ratio(paths.count, switches, sources.len(), n_c)?,
    };
    Ok(trial)
}

/// Samples failures at wind speed `v` and evaluates the trial.
pub fn run_trial<R: Rng + ?Sized>(
    net: &Network,
    v: f64,
    tc: &TimelineConfig,
    scenarios: &WindScenarioSet,
    rng: &mut R,
    settings: &TrialSettings,
) -> Result<TrialResult, EngineError> {
    let failed = sample_line_failures(net, v, rng);
    evaluate_trial(net, failed, v, tc, scenarios, settings)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub n_trials: usize,
    pub master_seed: u64,
    pub keep_raw: bool,
    pub trial: TrialSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioStats {
    pub speed: f64,
    pub probability: f64,
    pub mean_params: ParameterVector,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_trials: Option<Vec<ParameterVector>>,
}

/// Runs `n_trials` independent trials for one scenario of the set. Trial
/// `t` draws from the stream `(master_seed, index, t)`, and the mean is
/// accumulated in trial order, so the result does not depend on how the
/// trials are scheduled across threads.
pub fn run_scenario(
    net: &Network,
    scenarios: &WindScenarioSet,
    index: usize,
    tc: &TimelineConfig,
    settings: &RunSettings,
) -> Result<ScenarioStats, EngineError> {
    tc.validate()?;
    if settings.n_trials == 0 {
        return Err(EngineError::NoTrials);
    }
    let scenario = *scenarios
        .scenarios()
        .get(index)
        .ok_or(EngineError::ScenarioIndex(index))?;
    let params = (0..settings.n_trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(settings.master_seed, index, t);
            run_trial(net, scenario.speed, tc, scenarios, &mut rng, &settings.trial).map(|r| r.params)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mean_params = ParameterVector::mean(&params).ok_or(EngineError::NoTrials)?;
    Ok(ScenarioStats {
        speed: scenario.speed,
        probability: scenario.probability,
        mean_params,
        raw_trials: settings.keep_raw.then_some(params),
    })
}

/// Every scenario of the set, in order.
pub fn run_scenarios(
    net: &Network,
    scenarios: &WindScenarioSet,
    tc: &TimelineConfig,
    settings: &RunSettings,
) -> Result<Vec<ScenarioStats>, EngineError> {
    (0..scenarios.len())
        .map(|i| run_scenario(net, scenarios, i, tc, settings))
        .collect()
}
