//! The pipeline stages and the subcommands built from them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gridres_core::engine::{run_scenarios, RunSettings};
use gridres_core::mcdm::{resilience_metric, shapley, LambdaMeasure, WeightCase};
use gridres_core::risk::{cvar_alpha, normalize_minmax, orientation, ParamDistribution};
use gridres_core::{load_network, Param};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::{self, CvarRow, ModeStats, ScoreRow, ShapleyRow};

pub const TOOL_NAME: &str = "gridres";

/// Runs every configured mode over every scenario. All modes share the trial
/// streams, so trial `t` of a scenario sees the same line failures in each.
pub fn simulate(cfg: &RunConfig) -> Result<Vec<ModeStats>, CliError> {
    let net = load_network(&cfg.network_path)?;
    let settings = RunSettings {
        n_trials: cfg.n_trials,
        master_seed: cfg.master_seed,
        keep_raw: cfg.emit_raw_trials,
        trial: cfg.trial_settings(),
    };
    cfg.mode_list
        .iter()
        .map(|&mode| {
            log::info!("simulating {mode} mode: {} scenarios x {} trials", cfg.scenario_set.len(), cfg.n_trials);
            let scenarios = run_scenarios(&net.with_mode(mode), &cfg.scenario_set, &cfg.timeline, &settings)?;
            Ok(ModeStats { mode, scenarios })
        })
        .collect()
}

/// Normalizes each parameter onto `[0, 1]` jointly over all modes and
/// scenarios, then takes the CVaR of every mode's normalized distribution.
/// A mode with fewer than two scenarios has no spread to summarize and gets
/// zeros.
pub fn risk_table(stats: &[ModeStats], alpha: f64) -> Result<Vec<CvarRow>, CliError> {
    if stats.is_empty() {
        return Err(CliError::Config("no scenario statistics to summarize".into()));
    }
    let mut normalized: Vec<Vec<[f64; 5]>> = stats.iter().map(|ms| vec![[0.0; 5]; ms.scenarios.len()]).collect();
    for p in Param::ALL {
        let k = p.index();
        let all: Vec<f64> = stats
            .iter()
            .flat_map(|ms| ms.scenarios.iter().map(move |s| s.mean_params.get(p)))
            .collect();
        let scaled = normalize_minmax(&all)?;
        let mut it = scaled.into_iter();
        for rows in normalized.iter_mut() {
            for row in rows.iter_mut() {
                row[k] = it.next().expect("one value per row");
            }
        }
    }
    stats
        .iter()
        .zip(&normalized)
        .map(|(ms, rows)| {
            if ms.scenarios.len() < 2 {
                log::warn!("{} mode has a single scenario; emitting zero CVaR", ms.mode);
                return Ok(CvarRow {
                    mode: ms.mode,
                    values: Param::ALL.iter().map(|p| (p.name().to_string(), 0.0)).collect(),
                });
            }
            let values = Param::ALL
                .iter()
                .map(|&p| {
                    let points = ms
                        .scenarios
                        .iter()
                        .zip(rows)
                        .map(|(s, r)| (r[p.index()], s.probability))
                        .collect();
                    let dist = ParamDistribution::new(points, orientation(p))?;
                    Ok((p.name().to_string(), cvar_alpha(&dist, alpha)?))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            Ok(CvarRow { mode: ms.mode, values })
        })
        .collect()
}

pub fn shapley_table(cases: &[WeightCase]) -> Result<Vec<ShapleyRow>, CliError> {
    cases
        .iter()
        .map(|case| {
            let measure = LambdaMeasure::from_densities(case.densities.clone())?;
            let eta = shapley(&measure)?;
            Ok(ShapleyRow {
                case: case.name.clone(),
                lambda: measure.lambda,
                eta: eta.values(),
            })
        })
        .collect()
}

pub fn score_table(cvars: &[CvarRow], cases: &[WeightCase]) -> Result<Vec<ScoreRow>, CliError> {
    if cases.is_empty() {
        return Err(CliError::Config("no weight cases to score".into()));
    }
    let mut out = Vec::with_capacity(cvars.len() * cases.len());
    for row in cvars {
        let inputs: BTreeMap<String, f64> = row.values.iter().cloned().collect();
        for case in cases {
            let s = resilience_metric(&inputs, &case.densities, &case.name)?;
            out.push(ScoreRow {
                mode: row.mode,
                case: case.name.clone(),
                score: s.value,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub network_sha256: String,
    pub config: RunConfig,
}

impl Manifest {
    pub fn for_config(cfg: &RunConfig) -> Result<Self, CliError> {
        Ok(Manifest {
            tool: TOOL_NAME.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            network_sha256: file_sha256(&cfg.network_path)?,
            config: cfg.for_manifest()?,
        })
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s.into_bytes()
    }
}

pub fn file_sha256(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Warns when a manifest-sourced run points at a network whose contents
/// changed since the manifest was written.
fn check_manifest_hash(config_path: &Path, cfg: &RunConfig) -> Result<(), CliError> {
    let text = std::fs::read_to_string(config_path).map_err(|e| CliError::io(config_path, e))?;
    let Ok(value) = serde_json::from_str::<serde_json::Value>(&text) else {
        return Ok(());
    };
    if let Some(recorded) = value.get("network_sha256").and_then(|v| v.as_str()) {
        // An unreadable network is reported when the simulation loads it.
        let Ok(actual) = file_sha256(&cfg.network_path) else {
            return Ok(());
        };
        if actual != recorded {
            log::warn!(
                "{}: network hash {actual} differs from the manifest's {recorded}",
                cfg.network_path.display()
            );
        }
    }
    Ok(())
}

/// Loads a config or manifest and checks a manifest's recorded network hash.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let cfg = RunConfig::load(path)?;
    check_manifest_hash(path, &cfg)?;
    Ok(cfg)
}

#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub scenario_stats: Vec<ModeStats>,
    pub cvar_table: Vec<CvarRow>,
    pub shapley_table: Vec<ShapleyRow>,
    pub score_table: Vec<ScoreRow>,
    pub manifest: Manifest,
}

impl ReportBundle {
    /// File name and contents of every file in the bundle.
    pub fn files(&self) -> Vec<(&'static str, Vec<u8>)> {
        let mut files = vec![
            (report::SCENARIO_STATS_FILE, report::scenario_stats_csv(&self.scenario_stats)),
            (report::CVAR_TABLE_FILE, report::cvar_csv(&self.cvar_table)),
            (report::SHAPLEY_TABLE_FILE, report::shapley_csv(&self.shapley_table)),
            (report::SCORE_TABLE_FILE, report::score_csv(&self.score_table)),
            (report::MANIFEST_FILE, self.manifest.to_json()),
        ];
        if let Some(raw) = report::raw_trials_csv(&self.scenario_stats) {
            files.push((report::RAW_TRIALS_FILE, raw));
        }
        files
    }

    pub fn write_to(&self, dir: &Path) -> Result<(), CliError> {
        ensure_dir(dir)?;
        for (name, bytes) in self.files() {
            report::write_file(&dir.join(name), &bytes)?;
        }
        Ok(())
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Runs simulate, risk and score in memory. The first failing stage aborts
/// the run and is named in the error.
pub fn build_bundle(cfg: &RunConfig) -> Result<ReportBundle, CliError> {
    let cases = cfg.resolved_weight_cases()?;
    let scenario_stats = simulate(cfg).map_err(|e| e.in_stage("simulate"))?;
    let manifest = Manifest::for_config(cfg)?;
    let cvar_table = risk_table(&scenario_stats, cfg.alpha).map_err(|e| e.in_stage("risk"))?;
    let shapley_rows = shapley_table(&cases).map_err(|e| e.in_stage("score"))?;
    let score_rows = score_table(&cvar_table, &cases).map_err(|e| e.in_stage("score"))?;
    Ok(ReportBundle {
        scenario_stats,
        cvar_table,
        shapley_table: shapley_rows,
        score_table: score_rows,
        manifest,
    })
}

pub fn cmd_full(cfg: &RunConfig) -> Result<ReportBundle, CliError> {
    let bundle = build_bundle(cfg)?;
    bundle.write_to(&cfg.output_dir())?;
    Ok(bundle)
}

/// Writes the scenario statistics (and raw trials when requested). Returns
/// the stats file path.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let stats = simulate(cfg)?;
    let dir = cfg.output_dir();
    ensure_dir(&dir)?;
    let path = dir.join(report::SCENARIO_STATS_FILE);
    report::write_file(&path, &report::scenario_stats_csv(&stats))?;
    if let Some(raw) = report::raw_trials_csv(&stats) {
        report::write_file(&dir.join(report::RAW_TRIALS_FILE), &raw)?;
    }
    Ok(path)
}

pub fn cmd_risk(stats_path: &Path, alpha: f64, out_dir: &Path) -> Result<PathBuf, CliError> {
    let stats = report::read_scenario_stats(stats_path)?;
    let rows = risk_table(&stats, alpha)?;
    ensure_dir(out_dir)?;
    let path = out_dir.join(report::CVAR_TABLE_FILE);
    report::write_file(&path, &report::cvar_csv(&rows))?;
    Ok(path)
}

pub fn cmd_score(cvar_path: &Path, cases: &[WeightCase], out_dir: &Path) -> Result<PathBuf, CliError> {
    let cvars = report::read_cvar_table(cvar_path)?;
    let shapley_rows = shapley_table(cases)?;
    let score_rows = score_table(&cvars, cases)?;
    ensure_dir(out_dir)?;
    report::write_file(&out_dir.join(report::SHAPLEY_TABLE_FILE), &report::shapley_csv(&shapley_rows))?;
    let path = out_dir.join(report::SCORE_TABLE_FILE);
    report::write_file(&path, &report::score_csv(&score_rows))?;
    Ok(path)
}
