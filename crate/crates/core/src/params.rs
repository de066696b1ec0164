//! The five resilience-driven parameters and their fixed ordering.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Param {
    Availability,
    Robustness,
    Brittleness,
    Resistance,
    Resourcefulness,
}

impl Param {
    pub const ALL: [Param; 5] = [
        Param::Availability,
        Param::Robustness,
        Param::Brittleness,
        Param::Resistance,
        Param::Resourcefulness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::Availability => "availability",
            Param::Robustness => "robustness",
            Param::Brittleness => "brittleness",
            Param::Resistance => "resistance",
            Param::Resourcefulness => "resourcefulness",
        }
    }

    pub fn from_name(name: &str) -> Option<Param> {
        Param::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ParameterVector {
    pub availability: f64,
    pub robustness: f64,
    pub brittleness: f64,
    pub resistance: f64,
    pub resourcefulness: f64,
}

impl ParameterVector {
    pub fn to_array(&self) -> [f64; 5] {
        [
            self.availability,
            self.robustness,
            self.brittleness,
            self.resistance,
            self.resourcefulness,
        ]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        ParameterVector {
            availability: a[0],
            robustness: a[1],
            brittleness: a[2],
            resistance: a[3],
            resourcefulness: a[4],
        }
    }

    pub fn get(&self, p: Param) -> f64 {
        self.to_array()[p.index()]
    }

    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite() && *x >= 0.0)
            && self.availability <= 1.0
            && self.robustness <= 1.0
    }

    /// Arithmetic mean, accumulated in slice order as deviations from the
    /// first element so that identical inputs reproduce it exactly.
    pub fn mean(items: &[ParameterVector]) -> Option<ParameterVector> {
        let anchor = items.first()?.to_array();
        let mut dev = [0.0; 5];
        for pv in items {
            for ((d, x), a) in dev.iter_mut().zip(pv.to_array()).zip(anchor) {
                *d += x - a;
            }
        }
        let n = items.len() as f64;
        let mut out = anchor;
        for (o, d) in out.iter_mut().zip(dev) {
            *o += d / n;
        }
        Some(ParameterVector::from_array(out))
    }
}
