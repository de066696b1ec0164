//! Wind hazard: discretized intensity distribution, line fragility, and
//! per-trial failure sampling.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{LineMask, Network};

/// Lower clamp for event severity.
pub const SEVERITY_FLOOR: f64 = 1e-6;

const PROBABILITY_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HazardError {
    #[error("p_normal must lie in [0, 1], got {0}")]
    NormalRate(f64),
    #[error("need 0 < v_cri < v_col, got v_cri = {v_cri}, v_col = {v_col}")]
    SpeedOrder { v_cri: f64, v_col: f64 },
    #[error("shape_exponent must be positive, got {0}")]
    Shape(f64),
    #[error("wind speed must be a nonnegative number, got {0}")]
    Speed(f64),
    #[error("scenario set is empty")]
    EmptyScenarioSet,
    #[error("scenario #{index}: probability {probability} outside [0, 1]")]
    Probability { index: usize, probability: f64 },
    #[error("scenario probabilities sum to {0}, expected 1")]
    ProbabilitySum(f64),
    #[error("scenario speeds must be strictly increasing (scenario #{0})")]
    SpeedsNotIncreasing(usize),
}

fn unit_exponent() -> f64 {
    1.0
}

/// Piecewise fragility curve: flat at the normal-weather rate below
/// `v_cri`, certain failure at and above `v_col`, power-law ramp between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FragilityCurve {
    pub p_normal: f64,
    pub v_cri: f64,
    pub v_col: f64,
    #[serde(default = "unit_exponent")]
    pub shape_exponent: f64,
}

impl FragilityCurve {
    pub fn new(p_normal: f64, v_cri: f64, v_col: f64, shape_exponent: f64) -> Result<Self, HazardError> {
        let curve = FragilityCurve {
            p_normal,
            v_cri,
            v_col,
            shape_exponent,
        };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<(), HazardError> {
        if !(0.0..=1.0).contains(&self.p_normal) {
            return Err(HazardError::NormalRate(self.p_normal));
        }
        if !(self.v_cri > 0.0 && self.v_cri < self.v_col && self.v_col.is_finite()) {
            return Err(HazardError::SpeedOrder {
                v_cri: self.v_cri,
                v_col: self.v_col,
            });
        }
        if !(self.shape_exponent > 0.0 && self.shape_exponent.is_finite()) {
            return Err(HazardError::Shape(self.shape_exponent));
        }
        Ok(())
    }

    /// Failure probability at wind speed `v` on an already-validated curve.
    #[inline]
    pub fn probability_at(&self, v: f64) -> f64 {
        if v < self.v_cri {
            self.p_normal
        } else if v >= self.v_col {
            1.0
        } else {
            let ramp = ((v - self.v_cri) / (self.v_col - self.v_cri)).powf(self.shape_exponent);
            self.p_normal + ramp * (1.0 - self.p_normal)
        }
    }
}

/// Outage probability of a line with `curve` under uniform wind speed `v`.
pub fn failure_probability(curve: &FragilityCurve, v: f64) -> Result<f64, HazardError> {
    curve.validate()?;
    if !(v >= 0.0 && v.is_finite()) {
        return Err(HazardError::Speed(v));
    }
    Ok(curve.probability_at(v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindScenario {
    #[serde(rename = "speed_ms")]
    pub speed: f64,
    pub probability: f64,
}

/// Discretized wind-intensity distribution, ascending in speed.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct WindScenarioSet {
    scenarios: Vec<WindScenario>,
}

impl WindScenarioSet {
    pub fn new(scenarios: Vec<WindScenario>) -> Result<Self, HazardError> {
        if scenarios.is_empty() {
            return Err(HazardError::EmptyScenarioSet);
        }
        let mut total = 0.0;
        for (i, s) in scenarios.iter().enumerate() {
            if !(s.speed >= 0.0 && s.speed.is_finite()) {
                return Err(HazardError::Speed(s.speed));
            }
            if !(0.0..=1.0).contains(&s.probability) {
                return Err(HazardError::Probability {
                    index: i,
                    probability: s.probability,
                });
            }
            if i > 0 && s.speed <= scenarios[i - 1].speed {
                return Err(HazardError::SpeedsNotIncreasing(i));
            }
            total += s.probability;
        }
        if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(HazardError::ProbabilitySum(total));
        }
        Ok(WindScenarioSet { scenarios })
    }

    pub fn scenarios(&self) -> &[WindScenario] {
        &self.scenarios
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn max_speed(&self) -> f64 {
        self.scenarios[self.scenarios.len() - 1].speed
    }

    /// Normalized intensity `v / v_max`, clamped to `[SEVERITY_FLOOR, 1]`.
    pub fn event_severity(&self, v: f64) -> f64 {
        let vmax = self.max_speed();
        if vmax <= 0.0 {
            return 1.0;
        }
        (v / vmax).clamp(SEVERITY_FLOOR, 1.0)
    }
}

impl<'de> Deserialize<'de> for WindScenarioSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let scenarios = Vec::<WindScenario>::deserialize(d)?;
        WindScenarioSet::new(scenarios).map_err(serde::de::Error::custom)
    }
}

/// Severity of an event of speed `v` relative to `set`.
pub fn event_severity(v: f64, set: &WindScenarioSet) -> Result<f64, HazardError> {
    if set.is_empty() {
        return Err(HazardError::EmptyScenarioSet);
    }
    Ok(set.event_severity(v))
}

/// Independent Bernoulli draw per line, in line order.
pub fn sample_line_failures<R: Rng + ?Sized>(net: &Network, v: f64, rng: &mut R) -> LineMask {
    let bits = net
        .lines()
        .iter()
        .map(|line| {
            let p = line.fragility.probability_at(v);
            rng.random::<f64>() < p
        })
        .collect();
    LineMask::from_bools(bits)
}

/// Random stream owned by one trial: a pure function of the master seed,
/// the scenario index, and the trial index.
pub fn trial_rng(master_seed: u64, scenario: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((scenario as u64) << 32) | (trial as u64 & 0xffff_ffff));
    rng
}
