//! Run configuration: one JSON document with explicit units in field names.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gridres_core::engine::{TrialSettings, DEFAULT_RESISTANCE_CAP};
use gridres_core::grid::{Mode, DEFAULT_PATH_CAP};
use gridres_core::mcdm::{reference_weight_cases, FuzzyDensities, WeightCase};
use gridres_core::params::Param;
use gridres_core::risk::DEFAULT_ALPHA;
use gridres_core::{TimelineConfig, WindScenarioSet};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_TRIALS: usize = 1000;

fn default_modes() -> Vec<Mode> {
    vec![Mode::Base, Mode::Smart]
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_path_cap() -> u64 {
    DEFAULT_PATH_CAP
}

fn default_resistance_cap() -> f64 {
    DEFAULT_RESISTANCE_CAP
}

/// A named density case as written in config and weight-case files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightCaseEntry {
    pub name: String,
    pub densities: BTreeMap<String, f64>,
}

impl WeightCaseEntry {
    /// Densities reordered to the canonical parameter order. The case must
    /// name exactly the five parameters.
    pub fn to_case(&self) -> Result<WeightCase, CliError> {
        let mut values = [0.0; 5];
        for p in Param::ALL {
            values[p.index()] = *self.densities.get(p.name()).ok_or_else(|| {
                CliError::Config(format!("weight case {:?} is missing parameter {:?}", self.name, p.name()))
            })?;
        }
        if let Some(extra) = self.densities.keys().find(|k| Param::from_name(k).is_none()) {
            return Err(CliError::Config(format!(
                "weight case {:?} names unknown parameter {extra:?}",
                self.name
            )));
        }
        Ok(WeightCase {
            name: self.name.clone(),
            densities: FuzzyDensities::for_params(values)?,
        })
    }

    pub fn from_case(case: &WeightCase) -> Self {
        WeightCaseEntry {
            name: case.name.clone(),
            densities: case
                .densities
                .names()
                .map(str::to_string)
                .zip(case.densities.values())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub network_path: PathBuf,
    #[serde(default = "default_modes")]
    pub mode_list: Vec<Mode>,
    pub scenario_set: WindScenarioSet,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub timeline: TimelineConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_cases: Option<Vec<WeightCaseEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub emit_raw_trials: bool,
    #[serde(default = "default_path_cap")]
    pub path_cap: u64,
    #[serde(default = "default_resistance_cap")]
    pub resistance_cap: f64,
    #[serde(flatten, skip_serializing)]
    extra: BTreeMap<String, serde_json::Value>,
}

/// Command-line overrides applied on top of a loaded config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub alpha: Option<f64>,
    pub out: Option<PathBuf>,
    pub raw: bool,
}

impl RunConfig {
    /// Parses a config document, or the `config` section of a run manifest.
    /// A relative `network_path` is resolved against `base_dir`.
    pub fn from_json_str(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if value.get("tool").is_some() {
            if let Some(inner) = value.get_mut("config") {
                value = inner.take();
            }
        }
        let mut cfg: RunConfig = serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
        for key in cfg.extra.keys() {
            log::warn!("config: ignoring unknown field {key:?}");
        }
        cfg.extra.clear();
        if cfg.network_path.is_relative() {
            cfg.network_path = base_dir.join(&cfg.network_path);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::from_json_str(&text, base)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.n_trials == 0 {
            return Err(CliError::Config("n_trials must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.mode_list.is_empty() {
            return Err(CliError::Config("mode_list is empty".into()));
        }
        for (i, m) in self.mode_list.iter().enumerate() {
            if self.mode_list[..i].contains(m) {
                return Err(CliError::Config(format!("mode {m} listed twice")));
            }
        }
        if self.path_cap == 0 {
            return Err(CliError::Config("path_cap must be positive".into()));
        }
        if !(self.resistance_cap > 0.0 && self.resistance_cap.is_finite()) {
            return Err(CliError::Config("resistance_cap must be positive".into()));
        }
        self.timeline
            .validate()
            .map_err(|e| CliError::Config(format!("timeline: {e}")))?;
        let cases = self.resolved_weight_cases()?;
        if cases.is_empty() {
            return Err(CliError::Config("weight_cases is empty".into()));
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(seed) = o.seed {
            self.master_seed = seed;
        }
        if let Some(trials) = o.trials {
            self.n_trials = trials;
        }
        if let Some(alpha) = o.alpha {
            self.alpha = alpha;
        }
        if let Some(out) = &o.out {
            self.output_dir = Some(out.clone());
        }
        if o.raw {
            self.emit_raw_trials = true;
        }
        self.validate()
    }

    /// Configured weight cases, or the five bundled reference cases.
    pub fn resolved_weight_cases(&self) -> Result<Vec<WeightCase>, CliError> {
        match &self.weight_cases {
            Some(entries) => entries.iter().map(WeightCaseEntry::to_case).collect(),
            None => Ok(reference_weight_cases()),
        }
    }

    pub fn trial_settings(&self) -> TrialSettings {
        TrialSettings {
            path_cap: self.path_cap,
            resistance_cap: self.resistance_cap,
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("gridres-out"))
    }

    /// Copy suitable for the run manifest: weight cases spelled out, the
    /// network path absolute, and the output location dropped.
    pub fn for_manifest(&self) -> Result<RunConfig, CliError> {
        let mut echo = self.clone();
        echo.weight_cases = Some(
            self.resolved_weight_cases()?
                .iter()
                .map(WeightCaseEntry::from_case)
                .collect(),
        );
        echo.output_dir = None;
        echo.network_path = std::fs::canonicalize(&self.network_path)
            .map_err(|e| CliError::io(&self.network_path, e))?;
        Ok(echo)
    }
}

/// Reads a weight-case file: a JSON array of `{name, densities}`.
pub fn load_weight_cases(path: impl AsRef<Path>) -> Result<Vec<WeightCase>, CliError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let entries: Vec<WeightCaseEntry> =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if entries.is_empty() {
        return Err(CliError::Config(format!("{}: no weight cases", path.display())));
    }
    entries.iter().map(WeightCaseEntry::to_case).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "network_path": "net.json",
        "scenario_set": [{"speed_ms": 20, "probability": 0.5}, {"speed_ms": 40, "probability": 0.5}]
    }"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = RunConfig::from_json_str(MINIMAL, Path::new("/data")).unwrap();
        assert_eq!(cfg.n_trials, 1000);
        assert_eq!(cfg.alpha, 0.95);
        assert_eq!(cfg.mode_list, vec![Mode::Base, Mode::Smart]);
        assert_eq!(cfg.network_path, PathBuf::from("/data/net.json"));
        assert_eq!(cfg.resolved_weight_cases().unwrap().len(), 5);
    }

    #[test]
    fn bad_values_rejected() {
        let bad_alpha = MINIMAL.replace("\"network_path\"", "\"alpha\": 1.5, \"network_path\"");
        assert!(matches!(RunConfig::from_json_str(&bad_alpha, Path::new(".")), Err(CliError::Config(_))));
        let zero = MINIMAL.replace("\"network_path\"", "\"n_trials\": 0, \"network_path\"");
        assert!(RunConfig::from_json_str(&zero, Path::new(".")).is_err());
        let bad_prob = MINIMAL.replace("0.5}]", "0.6}]");
        assert!(RunConfig::from_json_str(&bad_prob, Path::new(".")).is_err());
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = RunConfig::from_json_str(MINIMAL, Path::new(".")).unwrap();
        cfg.apply(&Overrides { seed: Some(5), trials: Some(3), alpha: Some(0.9), out: None, raw: true })
            .unwrap();
        assert_eq!((cfg.master_seed, cfg.n_trials, cfg.alpha, cfg.emit_raw_trials), (5, 3, 0.9, true));
        assert!(cfg.apply(&Overrides { alpha: Some(0.0), ..Default::default() }).is_err());
    }

    #[test]
    fn weight_case_must_cover_all_parameters() {
        let entry = WeightCaseEntry {
            name: "x".into(),
            densities: [("availability".to_string(), 0.5)].into_iter().collect(),
        };
        assert!(entry.to_case().is_err());
        let mut full = WeightCaseEntry::from_case(&reference_weight_cases()[0]);
        assert!(full.to_case().is_ok());
        full.densities.insert("speed".into(), 0.1);
        assert!(full.to_case().is_err());
    }

    #[test]
    fn manifest_document_is_accepted() {
        let manifest = format!(r#"{{"tool": "gridres", "version": "0", "config": {MINIMAL}}}"#);
        let cfg = RunConfig::from_json_str(&manifest, Path::new("/x")).unwrap();
        assert_eq!(cfg.scenario_set.len(), 2);
    }
}
