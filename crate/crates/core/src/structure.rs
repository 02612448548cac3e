//! Structural learning of the rule base.
//!
//! Growth uses datum significance: the error of the current sample weighted
//! by the volume share a hypothetical rule centred on it would claim.
//! Pruning uses extended rule significance: a rule's total output weight
//! weighted by its own volume share. Volume shares are formed in log space
//! (`V^u / Σ V^u` with `u` the input dimension) so tiny ellipsoids in high
//! dimension do not underflow.

use nalgebra::{DMatrix, DVector};

use crate::error::{PanfisError, Result};
use crate::inference::{self, extract_fuzzy_sets, log_rule_volume};
use crate::linalg;
use crate::model::{FuzzySet, Model, Rule};

/// Outcome of the growth test for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthDecision {
    pub significance: f64,
    pub grew: bool,
    /// Strongest existing rule at the sample, if any.
    pub winner_index: Option<usize>,
}

/// Width used where the neighbour distance is undefined or zero: the first
/// rule, or a coordinate equal to the nearest centre. Scales with the
/// observed input range (1.0 before any spread has been seen).
pub fn floor_width(model: &Model, dim: usize) -> f64 {
    let range = match (model.input_min.get(dim), model.input_max.get(dim)) {
        (Some(lo), Some(hi)) if hi - lo > 0.0 => hi - lo,
        _ => 1.0,
    };
    0.1 * range / completeness_scale(model.config.epsilon)
}

fn completeness_scale(epsilon: f64) -> f64 {
    (1.0 / epsilon).ln().sqrt()
}

fn nearest_center(model: &Model, x: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, rule) in model.rules.iter().enumerate() {
        let d2: f64 = rule
            .center
            .iter()
            .zip(x)
            .map(|(c, v)| (v - c) * (v - c))
            .sum();
        if best.is_none_or(|(_, b)| d2 < b) {
            best = Some((i, d2));
        }
    }
    best.map(|(i, _)| i)
}

/// Premise of the rule that would be created at `x`: centred on `x`, with
/// axis-parallel widths chosen so the nearest existing centre still fires
/// at the ε-completeness level.
pub fn hypothetical_rule(model: &Model, x: &[f64]) -> Rule {
    let u = x.len();
    let scale = completeness_scale(model.config.epsilon);
    let nearest = nearest_center(model, x).map(|i| &model.rules[i].center);
    let diag = DVector::from_iterator(
        u,
        (0..u).map(|j| {
            let dist = nearest.map_or(0.0, |c| (x[j] - c[j]).abs());
            let width = if dist > 0.0 {
                dist / scale
            } else {
                floor_width(model, j)
            };
            1.0 / (width * width)
        }),
    );
    Rule {
        center: DVector::from_row_slice(x),
        inv_cov: DMatrix::from_diagonal(&diag),
        support: 1,
        weights: DVector::zeros(u + 1),
        rls_cov: DMatrix::identity(u + 1, u + 1) * model.config.omega,
    }
}

/// `exp(u·ln V_k - ln Σ_i exp(u·ln V_i))` for every k.
fn volume_shares(log_volumes: &[f64], u: usize) -> Vec<f64> {
    let scaled: Vec<f64> = log_volumes.iter().map(|lv| u as f64 * lv).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return vec![1.0 / scaled.len() as f64; scaled.len()];
    }
    let total: f64 = scaled.iter().map(|s| (s - max).exp()).sum();
    scaled.iter().map(|s| (s - max).exp() / total).collect()
}

/// Growth test against the current rule base.
pub fn datum_significance(model: &Model, x: &[f64], abs_error: f64) -> Result<GrowthDecision> {
    model.check_input(x)?;
    let winner = if model.rules.is_empty() {
        None
    } else {
        inference::firings(model, x)?.winner()
    };
    Ok(growth_decision(model, x, abs_error, winner))
}

pub(crate) fn growth_decision(
    model: &Model,
    x: &[f64],
    abs_error: f64,
    winner_index: Option<usize>,
) -> GrowthDecision {
    let hypothetical = hypothetical_rule(model, x);
    let mut log_volumes: Vec<f64> = model.rules.iter().map(log_rule_volume).collect();
    log_volumes.push(log_rule_volume(&hypothetical));
    let share = *volume_shares(&log_volumes, x.len()).last().unwrap();
    let significance = abs_error.abs() * share;
    GrowthDecision {
        significance,
        grew: model.rules.is_empty() || significance >= model.config.g1,
        winner_index,
    }
}

/// Append the hypothetical rule at `x`. Its consequent is inherited from the
/// winner (zeros for the very first rule) and its RLS covariance is `ω·I`.
/// Returns the new rule's index.
pub fn spawn_rule(model: &mut Model, x: &[f64], decision: &GrowthDecision) -> usize {
    let mut rule = hypothetical_rule(model, x);
    if let Some(w) = decision.winner_index.and_then(|i| model.rules.get(i)) {
        rule.weights = w.weights.clone();
    }
    model.rules.push(rule);
    model.rules.len() - 1
}

/// Incremental mean/covariance update of the winning cluster, applied
/// directly to the inverse covariance by a rank-one downdate.
///
/// With `α = 1/(N+1)` and `v = x - c`, the centre moves to `c + α v` and the covariance follows
/// `Σ ← (1-α)(Σ + α v vᵀ)`, whose inverse is
/// `Σ⁻¹/(1-α) - α/(1-α) · (Σ⁻¹v)(Σ⁻¹v)ᵀ / (1 + α vᵀΣ⁻¹v)`.
/// The rule is left untouched if the result is not SPD.
pub fn adapt_winner(rule: &mut Rule, x: &[f64]) -> Result<()> {
    if x.len() != rule.dim() {
        return Err(PanfisError::DimensionMismatch {
            expected: rule.dim(),
            actual: x.len(),
        });
    }
    let n = rule.support as f64;
    let alpha = 1.0 / (n + 1.0);
    let v = DVector::from_row_slice(x) - &rule.center;
    let center = &rule.center + &v / (n + 1.0);

    let sym = linalg::symmetrize(&rule.inv_cov);
    let sv = &sym * &v;
    let denom = 1.0 + alpha * v.dot(&sv);
    let mut inv_cov = &sym / (1.0 - alpha) - (&sv * sv.transpose()) * (alpha / ((1.0 - alpha) * denom));
    linalg::symmetrize_in_place(&mut inv_cov);

    if !linalg::is_spd(&inv_cov) || center.iter().any(|c| !c.is_finite()) {
        return Err(PanfisError::NumericBreakdown(
            "premise adaptation produced a non-SPD inverse covariance; rolled back".into(),
        ));
    }
    rule.center = center;
    rule.inv_cov = inv_cov;
    rule.support += 1;
    Ok(())
}

/// Extended rule significance of every rule: `|Σ W_i| · V_i^u / Σ_j V_j^u`.
pub fn rule_significances(rules: &[Rule]) -> Vec<f64> {
    let Some(first) = rules.first() else {
        return Vec::new();
    };
    let log_volumes: Vec<f64> = rules.iter().map(log_rule_volume).collect();
    volume_shares(&log_volumes, first.dim())
        .into_iter()
        .zip(rules)
        .map(|(share, rule)| rule.weights.sum().abs() * share)
        .collect()
}

pub fn rule_significance(index: usize, rules: &[Rule]) -> f64 {
    rule_significances(rules)[index]
}

/// Remove every rule whose significance is at most `g2`, returning the
/// removed indices (positions before removal, ascending). The rule base is
/// never emptied: if every rule qualifies, the most significant one stays.
pub fn prune_rules(model: &mut Model) -> Vec<usize> {
    if model.rules.len() < 2 {
        return Vec::new();
    }
    let ers = rule_significances(&model.rules);
    let mut pruned: Vec<usize> = (0..ers.len()).filter(|&i| ers[i] <= model.config.g2).collect();
    if pruned.len() == model.rules.len() {
        let mut keep = 0;
        for (i, &e) in ers.iter().enumerate() {
            if e > ers[keep] {
                keep = i;
            }
        }
        pruned.retain(|&i| i != keep);
    }
    for &i in pruned.iter().rev() {
        model.rules.remove(i);
    }
    pruned
}

/// Kernel similarity `exp(-(|c_a - c_b| + |σ_a - σ_b|))`.
pub fn fuzzy_set_similarity(a: &FuzzySet, b: &FuzzySet) -> f64 {
    (-((a.center - b.center).abs() + (a.width - b.width).abs())).exp()
}

/// Smallest set covering both `c ± σ` intervals.
pub fn merge_fuzzy_sets(a: &FuzzySet, b: &FuzzySet) -> FuzzySet {
    let lo = (a.center - a.width).min(b.center - b.width);
    let hi = (a.center + a.width).max(b.center + b.width);
    FuzzySet {
        center: (hi + lo) / 2.0,
        width: (hi - lo) / 2.0,
    }
}

/// Greedily merge the most similar qualifying pair until none has
/// similarity above `threshold`. Returns the reduced sets and, for each
/// input set, the index of its representative.
pub fn merge_sets(sets: &[FuzzySet], threshold: f64) -> (Vec<FuzzySet>, Vec<usize>) {
    let mut reduced = sets.to_vec();
    let mut assignment: Vec<usize> = (0..sets.len()).collect();
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..reduced.len() {
            for j in (i + 1)..reduced.len() {
                let s = fuzzy_set_similarity(&reduced[i], &reduced[j]);
                if s > threshold && best.is_none_or(|(_, _, b)| s > b) {
                    best = Some((i, j, s));
                }
            }
        }
        let Some((i, j, _)) = best else { break };
        reduced[i] = merge_fuzzy_sets(&reduced[i], &reduced[j]);
        reduced.remove(j);
        for a in assignment.iter_mut() {
            if *a == j {
                *a = i;
            } else if *a > j {
                *a -= 1;
            }
        }
    }
    (reduced, assignment)
}

/// Display-only reduction of the rule base to per-dimension fuzzy sets.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedView {
    /// `sets[d]` are the distinct fuzzy sets of input dimension `d`.
    pub sets: Vec<Vec<FuzzySet>>,
    /// `assignment[rule][d]` indexes into `sets[d]`.
    pub assignment: Vec<Vec<usize>>,
}

impl MergedView {
    pub fn set_counts(&self) -> Vec<usize> {
        self.sets.iter().map(Vec::len).collect()
    }
}

pub fn merged_rule_view(model: &Model) -> Result<MergedView> {
    if model.rules.is_empty() {
        return Err(PanfisError::EmptyRuleBase);
    }
    let r = model.config.mahalanobis_r;
    let per_rule: Vec<Vec<FuzzySet>> = model.rules.iter().map(|rule| extract_fuzzy_sets(rule, r)).collect();
    let u = model.input_dim();
    let mut sets = Vec::with_capacity(u);
    let mut assignment = vec![vec![0; u]; model.rules.len()];
    for d in 0..u {
        let column: Vec<FuzzySet> = per_rule.iter().map(|s| s[d]).collect();
        let (reduced, map) = merge_sets(&column, model.config.merge_threshold);
        for (rule_idx, &set_idx) in map.iter().enumerate() {
            assignment[rule_idx][d] = set_idx;
        }
        sets.push(reduced);
    }
    Ok(MergedView { sets, assignment })
}
