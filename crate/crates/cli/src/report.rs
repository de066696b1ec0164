//! CSV tables of the report bundle. Numbers are written with six significant
//! digits and `.` as the decimal separator.

use std::path::Path;

use gridres_core::engine::ScenarioStats;
use gridres_core::{Mode, Param};

use crate::error::CliError;

pub const SCENARIO_STATS_FILE: &str = "scenario_stats.csv";
pub const RAW_TRIALS_FILE: &str = "raw_trials.csv";
pub const CVAR_TABLE_FILE: &str = "cvar_table.csv";
pub const SHAPLEY_TABLE_FILE: &str = "shapley_table.csv";
pub const SCORE_TABLE_FILE: &str = "score_table.csv";
pub const MANIFEST_FILE: &str = "run_manifest.json";

const SIG_DIGITS: i32 = 6;

/// Six significant digits, plain decimal notation for moderate magnitudes,
/// trailing zeros trimmed.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..=15).contains(&exp) {
        return format!("{:.*e}", (SIG_DIGITS - 1) as usize, x);
    }
    let decimals = (SIG_DIGITS - 1 - exp).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
    if s == "-0" {
        s = "0".to_string();
    }
    s
}

fn param_header() -> impl Iterator<Item = &'static str> {
    Param::ALL.into_iter().map(Param::name)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeStats {
    pub mode: Mode,
    pub scenarios: Vec<ScenarioStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvarRow {
    pub mode: Mode,
    /// `(parameter name, cvar)` in column order.
    pub values: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyRow {
    pub case: String,
    pub lambda: f64,
    /// Indices in canonical parameter order.
    pub eta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub mode: Mode,
    pub case: String,
    pub score: f64,
}

fn to_bytes(header: Vec<String>, rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    // Writing into a Vec cannot fail.
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn scenario_stats_csv(stats: &[ModeStats]) -> Vec<u8> {
    let mut header = vec!["mode".to_string(), "speed_ms".into(), "probability".into()];
    header.extend(param_header().map(str::to_string));
    let rows = stats
        .iter()
        .flat_map(|ms| {
            ms.scenarios.iter().map(move |s| {
                let mut r = vec![ms.mode.to_string(), fmt_num(s.speed), fmt_num(s.probability)];
                r.extend(s.mean_params.to_array().iter().map(|&v| fmt_num(v)));
                r
            })
        })
        .collect();
    to_bytes(header, rows)
}

/// Per-trial values, or `None` when no scenario kept them.
pub fn raw_trials_csv(stats: &[ModeStats]) -> Option<Vec<u8>> {
    let mut header = vec!["mode".to_string(), "speed_ms".into(), "trial".into()];
    header.extend(param_header().map(str::to_string));
    let mut rows = Vec::new();
    for ms in stats {
        for s in &ms.scenarios {
            for (t, pv) in s.raw_trials.as_deref()?.iter().enumerate() {
                let mut r = vec![ms.mode.to_string(), fmt_num(s.speed), t.to_string()];
                r.extend(pv.to_array().iter().map(|&v| fmt_num(v)));
                rows.push(r);
            }
        }
    }
    Some(to_bytes(header, rows))
}

pub fn cvar_csv(rows: &[CvarRow]) -> Vec<u8> {
    let mut header = vec!["mode".to_string()];
    if let Some(first) = rows.first() {
        header.extend(first.values.iter().map(|(n, _)| n.clone()));
    } else {
        header.extend(param_header().map(str::to_string));
    }
    let body = rows
        .iter()
        .map(|r| {
            let mut out = vec![r.mode.to_string()];
            out.extend(r.values.iter().map(|(_, v)| fmt_num(*v)));
            out
        })
        .collect();
    to_bytes(header, body)
}

pub fn shapley_csv(rows: &[ShapleyRow]) -> Vec<u8> {
    let mut header = vec!["case".to_string(), "lambda".into()];
    header.extend(param_header().map(str::to_string));
    let body = rows
        .iter()
        .map(|r| {
            let mut out = vec![r.case.clone(), fmt_num(r.lambda)];
            out.extend(r.eta.iter().map(|&v| fmt_num(v)));
            out
        })
        .collect();
    to_bytes(header, body)
}

pub fn score_csv(rows: &[ScoreRow]) -> Vec<u8> {
    let header = vec!["mode".to_string(), "case".into(), "score".into()];
    let body = rows
        .iter()
        .map(|r| vec![r.mode.to_string(), r.case.clone(), fmt_num(r.score)])
        .collect();
    to_bytes(header, body)
}

fn table_err(path: &Path, reason: impl Into<String>) -> CliError {
    CliError::Table {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

fn read_records(path: &Path) -> Result<(csv::StringRecord, Vec<csv::StringRecord>), CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::csv(path, e))?;
    let header = r.headers().map_err(|e| CliError::csv(path, e))?.clone();
    let rows = r
        .records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::csv(path, e))?;
    Ok((header, rows))
}

fn field<'a>(path: &Path, rec: &'a csv::StringRecord, i: usize, line: usize) -> Result<&'a str, CliError> {
    rec.get(i).ok_or_else(|| table_err(path, format!("row {line}: missing column {i}")))
}

fn number(path: &Path, rec: &csv::StringRecord, i: usize, line: usize, col: &str) -> Result<f64, CliError> {
    let raw = field(path, rec, i, line)?;
    raw.trim()
        .parse::<f64>()
        .map_err(|_| table_err(path, format!("row {line}, column {col:?}: {raw:?} is not a number")))
}

fn mode(path: &Path, raw: &str, line: usize) -> Result<Mode, CliError> {
    raw.trim()
        .parse()
        .map_err(|_| table_err(path, format!("row {line}: unknown mode {raw:?}")))
}

/// Reads a scenario-stats table back, grouping rows by mode in order of
/// first appearance.
pub fn read_scenario_stats(path: &Path) -> Result<Vec<ModeStats>, CliError> {
    let (header, rows) = read_records(path)?;
    let expected: Vec<&str> = ["mode", "speed_ms", "probability"].into_iter().chain(param_header()).collect();
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != expected {
        return Err(table_err(path, format!("expected columns {expected:?}, found {got:?}")));
    }
    let mut out: Vec<ModeStats> = Vec::new();
    for (i, rec) in rows.iter().enumerate() {
        let line = i + 2;
        let m = mode(path, field(path, rec, 0, line)?, line)?;
        let speed = number(path, rec, 1, line, "speed_ms")?;
        let probability = number(path, rec, 2, line, "probability")?;
        let mut params = [0.0; 5];
        for (k, p) in Param::ALL.iter().enumerate() {
            params[k] = number(path, rec, 3 + k, line, p.name())?;
        }
        let stats = ScenarioStats {
            speed,
            probability,
            mean_params: gridres_core::ParameterVector::from_array(params),
            raw_trials: None,
        };
        match out.iter_mut().find(|ms| ms.mode == m) {
            Some(ms) => ms.scenarios.push(stats),
            None => out.push(ModeStats { mode: m, scenarios: vec![stats] }),
        }
    }
    if out.is_empty() {
        return Err(table_err(path, "no rows"));
    }
    Ok(out)
}

/// Reads a CVaR table. Parameter columns are taken from the header as
/// written so that name mismatches surface when scoring.
pub fn read_cvar_table(path: &Path) -> Result<Vec<CvarRow>, CliError> {
    let (header, rows) = read_records(path)?;
    let names: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    if names.first().map(String::as_str) != Some("mode") || names.len() < 2 {
        return Err(table_err(path, "first column must be \"mode\" followed by parameter columns"));
    }
    let mut out: Vec<CvarRow> = Vec::new();
    for (i, rec) in rows.iter().enumerate() {
        let line = i + 2;
        let m = mode(path, field(path, rec, 0, line)?, line)?;
        if out.iter().any(|r| r.mode == m) {
            return Err(table_err(path, format!("row {line}: mode {m} repeated")));
        }
        let values = names[1..]
            .iter()
            .enumerate()
            .map(|(k, n)| Ok((n.clone(), number(path, rec, k + 1, line, n)?)))
            .collect::<Result<Vec<_>, CliError>>()?;
        out.push(CvarRow { mode: m, values });
    }
    if out.is_empty() {
        return Err(table_err(path, "no rows"));
    }
    Ok(out)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}
