//! Published Shapley indices for the five bundled weight cases, used by the
//! `verify` subcommand.

use std::io::Write;

use gridres_core::mcdm::reference_weight_cases;

use crate::commands::shapley_table;
use crate::error::CliError;

/// Published values carry five decimals.
pub const TOLERANCE: f64 = 5e-5;

/// Shapley indices per case, in canonical parameter order.
pub const REFERENCE_SHAPLEY: [(&str, [f64; 5]); 5] = [
    ("Case I", [0.35235, 0.07617, 0.04451, 0.20400, 0.32294]),
    ("Case II", [0.23225, 0.18573, 0.16404, 0.18573, 0.23225]),
    ("Case III", [0.09441, 0.30385, 0.33202, 0.20849, 0.06121]),
    ("Case IV", [0.34422, 0.19903, 0.19903, 0.19903, 0.05869]),
    ("Case V", [0.05869, 0.19903, 0.19903, 0.19903, 0.34422]),
];

#[derive(Debug, Clone, PartialEq)]
pub struct CaseCheck {
    pub case: String,
    pub max_abs_error: f64,
    pub mismatches: usize,
}

/// Recomputes the indices of the bundled cases and compares them entry by
/// entry against the published ones.
pub fn check_reference_shapley() -> Result<Vec<CaseCheck>, CliError> {
    let rows = shapley_table(&reference_weight_cases())?;
    Ok(rows
        .iter()
        .zip(REFERENCE_SHAPLEY.iter())
        .map(|(row, (name, expected))| {
            debug_assert_eq!(row.case, *name);
            let errs: Vec<f64> = row.eta.iter().zip(expected).map(|(a, b)| (a - b).abs()).collect();
            CaseCheck {
                case: row.case.clone(),
                max_abs_error: errs.iter().copied().fold(0.0, f64::max),
                mismatches: errs.iter().filter(|&&e| e > TOLERANCE).count(),
            }
        })
        .collect())
}

/// Prints one line per case and fails with the number of out-of-tolerance
/// entries.
pub fn cmd_verify(out: &mut impl Write) -> Result<(), CliError> {
    let checks = check_reference_shapley()?;
    let mut bad = 0;
    for c in &checks {
        let status = if c.mismatches == 0 { "ok" } else { "FAIL" };
        writeln!(out, "{:<9} max |error| {:.2e}  {status}", c.case, c.max_abs_error)
            .map_err(|e| CliError::io(std::path::Path::new("<stdout>"), e))?;
        bad += c.mismatches;
    }
    if bad > 0 {
        return Err(CliError::Verify(bad));
    }
    Ok(())
}
