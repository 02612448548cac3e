//! Forward pass of the network: firing strengths, normalized weights, the
//! weighted-average output, rule volumes, and axis-cut fuzzy-set extraction.

use nalgebra::DVector;

use crate::error::{PanfisError, Result};
use crate::linalg;
use crate::model::{FuzzySet, Model, Rule};

/// Raw and normalized firing strengths of every rule at one input.
#[derive(Debug, Clone, PartialEq)]
pub struct Firings {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
}

impl Firings {
    /// Index of the strongest rule (by normalized firing); ties go to the lowest index.
    pub fn winner(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &r) in self.normalized.iter().enumerate() {
            if best.is_none_or(|(_, b)| r > b) {
                best = Some((i, r));
            }
        }
        best.map(|(i, _)| i)
    }
}

/// Quadratic form `(x - c) Σ⁻¹ (x - c)ᵀ`, the negative log firing strength.
pub fn premise_distance(rule: &Rule, x: &[f64]) -> Result<f64> {
    if x.len() != rule.dim() {
        return Err(PanfisError::DimensionMismatch {
            expected: rule.dim(),
            actual: x.len(),
        });
    }
    let v = DVector::from_iterator(x.len(), x.iter().zip(rule.center.iter()).map(|(a, c)| a - c));
    Ok(linalg::quad_form(&rule.inv_cov, &v))
}

/// `exp(-(x - c) Σ⁻¹ (x - c)ᵀ)`.
pub fn firing_strength(rule: &Rule, x: &[f64]) -> Result<f64> {
    premise_distance(rule, x).map(|q| (-q).exp())
}

pub fn normalize_firings(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(PanfisError::EmptyRuleBase);
    }
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(PanfisError::NumericBreakdown(format!(
            "firing strengths sum to {total}"
        )));
    }
    Ok(raw.iter().map(|r| r / total).collect())
}

/// Raw and normalized firings of every rule at `x`.
///
/// Normalization is done on the log scale, so the weights stay a partition
/// of unity even when every raw firing underflows far from all rules.
pub fn firings(model: &Model, x: &[f64]) -> Result<Firings> {
    if model.rules.is_empty() {
        return Err(PanfisError::EmptyRuleBase);
    }
    let distances = model
        .rules
        .iter()
        .map(|rule| premise_distance(rule, x))
        .collect::<Result<Vec<_>>>()?;
    let nearest = distances.iter().copied().fold(f64::INFINITY, f64::min);
    if !nearest.is_finite() {
        return Err(PanfisError::NumericBreakdown("non-finite premise distance".into()));
    }
    let shifted: Vec<f64> = distances.iter().map(|q| (nearest - q).exp()).collect();
    let total: f64 = shifted.iter().sum();
    Ok(Firings {
        raw: distances.iter().map(|q| (-q).exp()).collect(),
        normalized: shifted.iter().map(|s| s / total).collect(),
    })
}

/// Weighted-average output, from precomputed normalized firings.
pub fn output_with(model: &Model, x: &[f64], normalized: &[f64]) -> f64 {
    model
        .rules
        .iter()
        .zip(normalized)
        .map(|(rule, phi)| phi * rule.consequent(x))
        .sum()
}

/// Network output at `x`; the firings are returned for reuse by the learner.
pub fn predict(model: &Model, x: &[f64]) -> Result<(f64, Firings)> {
    model.check_input(x)?;
    let firings = firings(model, x)?;
    let y = output_with(model, x, &firings.normalized);
    Ok((y, firings))
}

/// `ln det(Σ) = -ln det(Σ⁻¹)`.
pub fn log_rule_volume(rule: &Rule) -> f64 {
    // Validated rules always factor; a failed factorization reads as a degenerate, zero-volume rule.
    linalg::log_det_spd(&rule.inv_cov).map_or(f64::NEG_INFINITY, |ld| -ld)
}

/// `det(Σ)`, computed from the stored inverse.
pub fn rule_volume(rule: &Rule) -> f64 {
    log_rule_volume(rule).exp()
}

/// Per-dimension fuzzy sets obtained by cutting the ellipsoid
/// `v Σ⁻¹ vᵀ = r²` along each axis: width `r / sqrt((Σ⁻¹)_jj)`.
pub fn extract_fuzzy_sets(rule: &Rule, r: f64) -> Vec<FuzzySet> {
    (0..rule.dim())
        .map(|j| FuzzySet {
            center: rule.center[j],
            width: r / rule.inv_cov[(j, j)].sqrt(),
        })
        .collect()
}
