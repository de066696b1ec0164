//! Sugeno λ-fuzzy measures, Shapley importance indices, and the discrete
//! Choquet integral used to fold per-parameter tail risks into one score.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::Param;

/// Largest criterion count for exact subset enumeration.
pub const MAX_EXACT_CRITERIA: usize = 20;

/// `|Σμ - 1|` below which the measure is treated as additive.
const ADDITIVE_TOL: f64 = 1e-12;
const MAX_ITERATIONS: usize = 200;
const RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McdmError {
    #[error("need at least two criteria, got {0}")]
    TooFewCriteria(usize),
    #[error("density for {name:?} must lie in [0, 1], got {value}")]
    Density { name: String, value: f64 },
    #[error("duplicate criterion {0:?}")]
    DuplicateCriterion(String),
    #[error("no λ root exists for these densities")]
    NoRoot,
    #[error("λ solver did not converge (residual {0:e})")]
    NonConvergence(f64),
    #[error("unknown criterion {0:?}")]
    UnknownCriterion(String),
    #[error("{0} criteria exceed the exact-enumeration limit")]
    TooManyCriteria(usize),
    #[error("criteria mismatch: expected {expected:?}, got {got:?}")]
    Mismatch { expected: Vec<String>, got: Vec<String> },
    #[error("criterion {0:?} has a non-finite value")]
    NonFinite(String),
}

/// Singleton fuzzy densities, in the order the criteria were declared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyDensities {
    entries: Vec<(String, f64)>,
}

impl FuzzyDensities {
    pub fn new<I, S>(entries: I) -> Result<Self, McdmError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let entries: Vec<(String, f64)> = entries.into_iter().map(|(n, v)| (n.into(), v)).collect();
        if entries.len() < 2 {
            return Err(McdmError::TooFewCriteria(entries.len()));
        }
        for (i, (name, value)) in entries.iter().enumerate() {
            if !(0.0..=1.0).contains(value) {
                return Err(McdmError::Density {
                    name: name.clone(),
                    value: *value,
                });
            }
            if entries[..i].iter().any(|(n, _)| n == name) {
                return Err(McdmError::DuplicateCriterion(name.clone()));
            }
        }
        Ok(FuzzyDensities { entries })
    }

    /// Densities keyed by the five resilience parameters, in parameter order.
    pub fn for_params(values: [f64; 5]) -> Result<Self, McdmError> {
        FuzzyDensities::new(Param::ALL.into_iter().map(|p| p.name()).zip(values))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|(_, v)| *v).collect()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    fn position(&self, name: &str) -> Result<usize, McdmError> {
        self.entries
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| McdmError::UnknownCriterion(name.to_string()))
    }
}

fn lambda_residual(lambda: f64, densities: &[f64]) -> f64 {
    densities.iter().map(|m| 1.0 + lambda * m).product::<f64>() - (1.0 + lambda)
}

/// Solves `∏(1 + λ μ_i) = 1 + λ` for the non-trivial root in `(-1, ∞)`.
/// Returns exactly `0.0` in the additive case `Σμ = 1`.
pub fn solve_lambda(d: &FuzzyDensities) -> Result<f64, McdmError> {
    let mu = d.values();
    let sum: f64 = mu.iter().sum();
    if (sum - 1.0).abs() <= ADDITIVE_TOL {
        return Ok(0.0);
    }
    let nonzero = mu.iter().filter(|&&m| m > 0.0).count();
    if nonzero == 0 || (sum < 1.0 && nonzero < 2) {
        return Err(McdmError::NoRoot);
    }

    // g < 0 on the side of zero facing the root, g > 0 beyond the root.
    let (mut lo, mut hi) = if sum > 1.0 {
        (-1.0, 0.0)
    } else {
        let mut upper = 1.0;
        while lambda_residual(upper, &mu) <= 0.0 {
            upper *= 2.0;
            if !upper.is_finite() {
                return Err(McdmError::NoRoot);
            }
        }
        (0.0, upper)
    };
    // Orient so that g(lo) > 0 >= g(hi) in the negative branch and
    // g(lo) <= 0 < g(hi) in the positive branch.
    let positive_branch = sum < 1.0;
    let on_far_side = |g: f64| if positive_branch { g > 0.0 } else { g <= 0.0 };

    let mut lambda = 0.5 * (lo + hi);
    for _ in 0..MAX_ITERATIONS {
        lambda = 0.5 * (lo + hi);
        if lambda == lo || lambda == hi {
            break;
        }
        let g = lambda_residual(lambda, &mu);
        if on_far_side(g) {
            hi = lambda;
        } else {
            lo = lambda;
        }
    }

    // Newton polish inside the bracket.
    for _ in 0..4 {
        let g = lambda_residual(lambda, &mu);
        if g.abs() <= f64::EPSILON {
            break;
        }
        let dg: f64 = (0..mu.len())
            .map(|i| {
                mu[i]
                    * mu.iter()
                        .enumerate()
                        .filter(|&(j, _)| j != i)
                        .map(|(_, m)| 1.0 + lambda * m)
                        .product::<f64>()
            })
            .sum::<f64>()
            - 1.0;
        if dg == 0.0 {
            break;
        }
        let next = lambda - g / dg;
        if next <= lo.min(hi) || next >= lo.max(hi) || lambda_residual(next, &mu).abs() >= g.abs() {
            break;
        }
        lambda = next;
    }

    let residual = lambda_residual(lambda, &mu).abs();
    if residual > RESIDUAL_TOL.max(1e-14 * (1.0 + lambda.abs())) || lambda <= -1.0 {
        return Err(McdmError::NonConvergence(residual));
    }
    Ok(lambda)
}

/// Sugeno λ-measure generated by singleton densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaMeasure {
    pub densities: FuzzyDensities,
    pub lambda: f64,
}

impl LambdaMeasure {
    pub fn from_densities(densities: FuzzyDensities) -> Result<Self, McdmError> {
        let lambda = solve_lambda(&densities)?;
        Ok(LambdaMeasure { densities, lambda })
    }

    /// Additive measure (`λ = 0`) over the given densities.
    pub fn additive(densities: FuzzyDensities) -> Self {
        LambdaMeasure { densities, lambda: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.densities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.densities.is_empty()
    }

    /// Measure of the subset encoded by `mask` (bit `i` = criterion `i`),
    /// built up one singleton at a time with
    /// `μ(P ∪ {i}) = μ(P) + μ_i + λ μ(P) μ_i`.
    pub fn measure_of_mask(&self, mask: u64) -> f64 {
        let mut acc = 0.0;
        for (i, (_, m)) in self.densities.entries.iter().enumerate() {
            if mask & (1 << i) != 0 {
                acc = acc + m + self.lambda * acc * m;
            }
        }
        acc
    }

    pub fn subset_measure<S: AsRef<str>>(&self, subset: &[S]) -> Result<f64, McdmError> {
        let mut mask = 0u64;
        for name in subset {
            mask |= 1 << self.densities.position(name.as_ref())?;
        }
        Ok(self.measure_of_mask(mask))
    }
}

/// Shapley importance indices, in criterion order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyWeights {
    pub eta: Vec<(String, f64)>,
}

impl ShapleyWeights {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.eta.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn values(&self) -> Vec<f64> {
        self.eta.iter().map(|(_, v)| *v).collect()
    }

    pub fn total(&self) -> f64 {
        self.eta.iter().map(|(_, v)| v).sum()
    }

    pub fn as_densities(&self) -> Result<FuzzyDensities, McdmError> {
        FuzzyDensities::new(self.eta.iter().map(|(n, v)| (n.clone(), v.clamp(0.0, 1.0))))
    }
}

/// Exact Shapley values by enumeration of all `2^N` coalitions.
pub fn shapley(m: &LambdaMeasure) -> Result<ShapleyWeights, McdmError> {
    let n = m.len();
    if n > MAX_EXACT_CRITERIA {
        return Err(McdmError::TooManyCriteria(n));
    }
    let mu: Vec<f64> = m.densities.values();
    let full = 1usize << n;

    let mut measure = vec![0.0; full];
    for mask in 1..full {
        let low = mask.trailing_zeros() as usize;
        let rest = measure[mask & (mask - 1)];
        measure[mask] = rest + mu[low] + m.lambda * rest * mu[low];
    }

    // Coalition weight (N - s - 1)! s! / N! = 1 / (N * C(N-1, s)).
    let mut binom = vec![1.0; n];
    for s in 1..n {
        binom[s] = binom[s - 1] * (n - s) as f64 / s as f64;
    }
    let weight: Vec<f64> = binom.iter().map(|c| 1.0 / (n as f64 * c)).collect();

    let eta = m
        .densities
        .entries
        .iter()
        .enumerate()
        .map(|(i, (name, _))| {
            let bit = 1usize << i;
            let value: f64 = (0..full)
                .filter(|s| s & bit == 0)
                .map(|s| weight[s.count_ones() as usize] * (measure[s | bit] - measure[s]))
                .sum();
            (name.clone(), value)
        })
        .collect();
    Ok(ShapleyWeights { eta })
}

fn aligned_values(m: &LambdaMeasure, f: &BTreeMap<String, f64>) -> Result<Vec<f64>, McdmError> {
    let expected: Vec<String> = m.densities.names().map(str::to_string).collect();
    let mut sorted_expected = expected.clone();
    sorted_expected.sort();
    let got: Vec<String> = f.keys().cloned().collect();
    if sorted_expected != got {
        return Err(McdmError::Mismatch { expected, got });
    }
    expected
        .iter()
        .map(|name| {
            let v = f[name];
            if v.is_finite() {
                Ok(v)
            } else {
                Err(McdmError::NonFinite(name.clone()))
            }
        })
        .collect()
}

/// Discrete Choquet integral of values aligned with the measure's criteria:
/// `Σ (f_(i) - f_(i-1)) μ(A_(i))` over ascending values with `f_(0) = 0`,
/// where `A_(i)` holds the criteria ranked `i` and above. Ties are ranked by
/// criterion position.
pub fn choquet_aligned(values: &[f64], m: &LambdaMeasure) -> f64 {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut upper: u64 = (1u64 << values.len()) - 1;
    let mut prev = 0.0;
    let mut total = 0.0;
    for idx in order {
        total += (values[idx] - prev) * m.measure_of_mask(upper);
        prev = values[idx];
        upper &= !(1 << idx);
    }
    total
}

pub fn choquet(f: &BTreeMap<String, f64>, m: &LambdaMeasure) -> Result<f64, McdmError> {
    let values = aligned_values(m, f)?;
    Ok(choquet_aligned(&values, m))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResilienceScore {
    pub value: f64,
    pub inputs: BTreeMap<String, f64>,
    pub weights: ShapleyWeights,
    /// Interaction degree of the original densities.
    pub lambda: f64,
    pub case_label: String,
}

/// Shapley indices of the expert densities become the densities of an
/// additive measure, and the score is the Choquet integral of the CVaRs
/// against it.
pub fn resilience_metric(
    cvars: &BTreeMap<String, f64>,
    d: &FuzzyDensities,
    case_label: &str,
) -> Result<ResilienceScore, McdmError> {
    let measure = LambdaMeasure::from_densities(d.clone())?;
    let weights = shapley(&measure)?;
    let aggregate = LambdaMeasure::additive(weights.as_densities()?);
    let value = choquet(cvars, &aggregate)?;
    Ok(ResilienceScore {
        value,
        inputs: cvars.clone(),
        weights,
        lambda: measure.lambda,
        case_label: case_label.to_string(),
    })
}

/// A named set of expert densities.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightCase {
    pub name: String,
    pub densities: FuzzyDensities,
}

/// The five expert weight cases bundled as defaults, over
/// (availability, robustness, brittleness, resistance, resourcefulness).
pub fn reference_weight_cases() -> Vec<WeightCase> {
    const CASES: [(&str, [f64; 5]); 5] = [
        ("Case I", [0.9, 0.25, 0.15, 0.6, 0.85]),
        ("Case II", [0.6, 0.5, 0.45, 0.5, 0.6]),
        ("Case III", [0.3, 0.8, 0.85, 0.6, 0.2]),
        ("Case IV", [0.9, 0.6, 0.6, 0.6, 0.2]),
        ("Case V", [0.2, 0.6, 0.6, 0.6, 0.9]),
    ];
    CASES
        .iter()
        .map(|(name, values)| WeightCase {
            name: name.to_string(),
            densities: FuzzyDensities::for_params(*values).expect("bundled densities are valid"),
        })
        .collect()
}
