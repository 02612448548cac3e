//! Gated, firing-weighted recursive least squares for the rule consequents.
//!
//! Every rule keeps its own covariance `Q_i` (local learning). Per sample, a
//! tentative RLS step is computed for each active rule with the normalized
//! firing strength as observation weight; the whole batch of tentative steps
//! is committed only if it does not increase the absolute output error at
//! the current sample.

use nalgebra::{DMatrix, DVector};

use crate::error::{PanfisError, Result};
use crate::exec::Strategy;
use crate::inference::{output_with, Firings};
use crate::linalg;
use crate::model::Model;

/// Rules whose normalized firing is below this are skipped.
pub const ACTIVATION_FLOOR: f64 = 1e-12;

/// Fan the per-rule tentative steps out to the pool only above this many rules.
const PARALLEL_MIN_RULES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct ErlsStep {
    pub rule_index: usize,
    /// 1 when the tentative update was committed.
    pub gate: u8,
    /// |target - y| before any consequent change.
    pub error_before: f64,
    /// |target - y| with every tentative update applied.
    pub error_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErlsOutcome {
    pub steps: Vec<ErlsStep>,
    pub committed: bool,
    /// Set when a tentative step went non-finite or lost positive definiteness.
    pub diagnostic: Option<String>,
}

/// One weighted RLS step: gain `L = Q x (1/ψ + xᵀ Q x)⁻¹`,
/// `W' = W + L (t - xᵀ W)`, `Q' = (I - L xᵀ) Q` (Joseph form).
pub fn weighted_rls_step(
    weights: &DVector<f64>,
    cov: &DMatrix<f64>,
    x_e: &DVector<f64>,
    target: f64,
    psi: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let qx = cov * x_e;
    let denom = 1.0 / psi + x_e.dot(&qx);
    let gain = &qx / denom;
    let innovation = target - x_e.dot(weights);
    let new_weights = weights + &gain * innovation;

    let n = x_e.len();
    let a = DMatrix::identity(n, n) - &gain * x_e.transpose();
    let mut new_cov = &a * cov * a.transpose() + (&gain * gain.transpose()) / psi;
    linalg::symmetrize_in_place(&mut new_cov);

    if new_weights.iter().chain(new_cov.iter()).any(|v| !v.is_finite()) {
        return Err(PanfisError::NumericBreakdown("non-finite RLS step".into()));
    }
    if new_cov.clone().cholesky().is_none() {
        return Err(PanfisError::NumericBreakdown(
            "RLS covariance lost positive definiteness".into(),
        ));
    }
    Ok((new_weights, new_cov))
}

pub fn extended_input(x: &[f64]) -> DVector<f64> {
    DVector::from_iterator(x.len() + 1, std::iter::once(1.0).chain(x.iter().copied()))
}

/// Gated consequent update for one sample. `firings` must be evaluated at `x`
/// against the current rule base.
pub fn erls_update(model: &mut Model, x: &[f64], target: f64, firings: &Firings) -> Result<ErlsOutcome> {
    if model.rules.is_empty() {
        return Err(PanfisError::EmptyRuleBase);
    }
    model.check_input(x)?;
    if firings.normalized.len() != model.rules.len() {
        return Err(PanfisError::DimensionMismatch {
            expected: model.rules.len(),
            actual: firings.normalized.len(),
        });
    }
    let x_e = extended_input(x);
    let phi = &firings.normalized;
    let y_before = output_with(model, x, phi);
    let error_before = (target - y_before).abs();

    let active: Vec<usize> = (0..model.rules.len()).filter(|&i| phi[i] >= ACTIVATION_FLOOR).collect();
    let strategy = if active.len() >= PARALLEL_MIN_RULES {
        Strategy::default()
    } else {
        Strategy::Sequential
    };
    let rules = &model.rules;
    let tentative = strategy.map(&active, |&i| {
        weighted_rls_step(&rules[i].weights, &rules[i].rls_cov, &x_e, target, phi[i])
    });

    let mut diagnostic = None;
    let mut updates = Vec::with_capacity(active.len());
    for (&i, t) in active.iter().zip(tentative) {
        match t {
            Ok(update) => updates.push((i, update)),
            Err(e) => {
                diagnostic = Some(format!("rule {i}: {e}"));
                break;
            }
        }
    }

    let mut y_after = y_before;
    if diagnostic.is_none() {
        y_after = rules
            .iter()
            .enumerate()
            .map(|(i, rule)| {
                let w = updates
                    .iter()
                    .find(|(j, _)| *j == i)
                    .map_or(&rule.weights, |(_, (w, _))| w);
                phi[i] * x_e.dot(w)
            })
            .sum();
        if !y_after.is_finite() {
            diagnostic = Some("non-finite tentative output".into());
        }
    }
    let error_after = (target - y_after).abs();
    let committed = diagnostic.is_none() && error_before >= error_after;

    if committed {
        for (i, (w, q)) in updates {
            model.rules[i].weights = w;
            model.rules[i].rls_cov = q;
        }
    }
    let steps = active
        .iter()
        .map(|&rule_index| ErlsStep {
            rule_index,
            gate: committed as u8,
            error_before,
            error_after,
        })
        .collect();
    Ok(ErlsOutcome {
        steps,
        committed,
        diagnostic,
    })
}
