//! Tail-risk summaries of a resilience parameter over event intensity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::Param;

/// Confidence level used when none is configured.
pub const DEFAULT_ALPHA: f64 = 0.95;

const PROBABILITY_SUM_TOL: f64 = 1e-9;
const CDF_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiskError {
    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    Alpha(f64),
    #[error("distribution has no points")]
    Empty,
    #[error("point #{index}: probability {probability} outside [0, 1]")]
    Probability { index: usize, probability: f64 },
    #[error("point #{0} has a non-finite value")]
    Value(usize),
    #[error("probabilities sum to {0}, expected 1")]
    ProbabilitySum(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    HigherIsBetter,
    LowerIsBetter,
}

/// Every resilience-driven parameter is oriented so that larger is better.
pub fn orientation(_param: Param) -> Orientation {
    Orientation::HigherIsBetter
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamDistribution {
    points: Vec<(f64, f64)>,
    orientation: Orientation,
}

impl ParamDistribution {
    /// `points` are `(value, probability)` pairs.
    pub fn new(points: Vec<(f64, f64)>, orientation: Orientation) -> Result<Self, RiskError> {
        if points.is_empty() {
            return Err(RiskError::Empty);
        }
        let mut total = 0.0;
        for (i, &(value, probability)) in points.iter().enumerate() {
            if !value.is_finite() {
                return Err(RiskError::Value(i));
            }
            if !(0.0..=1.0).contains(&probability) {
                return Err(RiskError::Probability { index: i, probability });
            }
            total += probability;
        }
        if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(RiskError::ProbabilitySum(total));
        }
        Ok(ParamDistribution { points, orientation })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// Points ordered from the worst value to the best.
    fn worst_first(&self) -> Vec<(f64, f64)> {
        let mut pts = self.points.clone();
        match self.orientation {
            Orientation::HigherIsBetter => pts.sort_by(|a, b| a.0.total_cmp(&b.0)),
            Orientation::LowerIsBetter => pts.sort_by(|a, b| b.0.total_cmp(&a.0)),
        }
        pts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskSummary {
    pub alpha: f64,
    pub var: f64,
    pub cvar: f64,
}

fn check_alpha(alpha: f64) -> Result<(), RiskError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(RiskError::Alpha(alpha))
    }
}

/// Min-max scaling onto `[0, 1]`. A constant input maps to all zeros.
pub fn normalize_minmax(values: &[f64]) -> Result<Vec<f64>, RiskError> {
    if values.is_empty() {
        return Err(RiskError::Empty);
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(RiskError::Value(i));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    if span <= 0.0 {
        return Ok(vec![0.0; values.len()]);
    }
    Ok(values.iter().map(|v| (v - min) / span).collect())
}

/// Smallest support value at which the cumulative probability, walked from
/// the worst value towards the best, reaches `alpha`.
pub fn var_alpha(dist: &ParamDistribution, alpha: f64) -> Result<f64, RiskError> {
    check_alpha(alpha)?;
    let pts = dist.worst_first();
    let mut cum = 0.0;
    for &(value, p) in &pts {
        cum += p;
        if cum >= alpha - CDF_TOL {
            return Ok(value);
        }
    }
    Ok(pts[pts.len() - 1].0)
}

/// Probability-weighted mean over the worst `1 - alpha` of the mass. The
/// atom straddling the tail boundary contributes only the part of its
/// probability that fits inside the tail.
pub fn cvar_alpha(dist: &ParamDistribution, alpha: f64) -> Result<f64, RiskError> {
    check_alpha(alpha)?;
    let tail = 1.0 - alpha;
    let mut remaining = tail;
    let mut weighted = 0.0;
    let mut used = 0.0;
    for (value, p) in dist.worst_first() {
        if remaining <= 0.0 {
            break;
        }
        let w = p.min(remaining);
        weighted += w * value;
        used += w;
        remaining -= w;
    }
    if used <= 0.0 {
        return Err(RiskError::ProbabilitySum(0.0));
    }
    Ok(weighted / used)
}

pub fn summarize(dist: &ParamDistribution, alpha: f64) -> Result<RiskSummary, RiskError> {
    Ok(RiskSummary {
        alpha,
        var: var_alpha(dist, alpha)?,
        cvar: cvar_alpha(dist, alpha)?,
    })
}
