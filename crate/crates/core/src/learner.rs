//! Single-pass training loop and evaluation.
//!
//! Per sample: predict, test for growth, then either spawn a rule or adapt
//! the winner's premise, refresh the firings, run the gated consequent
//! update, and finally prune.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::consequent::{erls_update, ErlsOutcome};
use crate::error::{PanfisError, Result};
use crate::exec::Strategy;
use crate::inference::{self, predict};
use crate::model::Model;
use crate::structure::{adapt_winner, growth_decision, prune_rules, spawn_rule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub target: f64,
}

impl Sample {
    pub fn new(x: Vec<f64>, target: f64) -> Self {
        Sample { x, target }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    FirstRule,
    Grew,
    Adapted,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Event::FirstRule => "first_rule",
            Event::Grew => "grew",
            Event::Adapted => "adapted",
        })
    }
}

/// Trace of one training step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainStep {
    pub n: u64,
    /// One-step-ahead prediction, made before any update.
    pub prediction: f64,
    pub target: f64,
    pub abs_error: f64,
    pub significance: f64,
    pub event: Event,
    /// Indices (before removal) of the rules pruned at this step.
    pub pruned: Vec<usize>,
    pub rule_count_after: usize,
    pub erls: ErlsOutcome,
}

impl TrainStep {
    pub fn grew(&self) -> bool {
        matches!(self.event, Event::FirstRule | Event::Grew)
    }
}

fn update_range(model: &mut Model, x: &[f64]) {
    if model.input_min.is_empty() {
        model.input_min = x.to_vec();
        model.input_max = x.to_vec();
        return;
    }
    for (j, &v) in x.iter().enumerate() {
        model.input_min[j] = model.input_min[j].min(v);
        model.input_max[j] = model.input_max[j].max(v);
    }
}

pub fn train_sample(model: &mut Model, x: &[f64], target: f64) -> Result<TrainStep> {
    model.check_input(x)?;
    if !target.is_finite() {
        return Err(PanfisError::InvalidInput("non-finite target".into()));
    }
    update_range(model, x);

    let (prediction, winner) = if model.rules.is_empty() {
        (0.0, None)
    } else {
        let (y, firings) = predict(model, x)?;
        (y, firings.winner())
    };
    let abs_error = (target - prediction).abs();
    let was_empty = model.rules.is_empty();
    let decision = growth_decision(model, x, abs_error, winner);

    let event = if decision.grew {
        spawn_rule(model, x, &decision);
        if was_empty {
            Event::FirstRule
        } else {
            Event::Grew
        }
    } else {
        let w = decision.winner_index.expect("non-empty rule base has a winner");
        adapt_winner(&mut model.rules[w], x)?;
        Event::Adapted
    };

    let firings = inference::firings(model, x)?;
    let erls = erls_update(model, x, target, &firings)?;
    let pruned = prune_rules(model);
    let n = model.samples_seen;
    model.samples_seen += 1;

    Ok(TrainStep {
        n,
        prediction,
        target,
        abs_error,
        significance: decision.significance,
        event,
        pruned,
        rule_count_after: model.rules.len(),
        erls,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub steps: Vec<TrainStep>,
}

impl FitResult {
    /// One-step-ahead predictions, recorded before each update.
    pub fn predictions(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.prediction).collect()
    }

    /// RMSE of the one-step-ahead predictions.
    pub fn rmse(&self) -> f64 {
        rmse(self.steps.iter().map(|s| s.target - s.prediction))
    }

    pub fn rule_counts(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.rule_count_after).collect()
    }
}

/// Fold [`train_sample`] over a stream, consuming each sample once.
pub fn fit_stream(model: &mut Model, samples: &[Sample]) -> Result<FitResult> {
    if samples.is_empty() {
        return Err(PanfisError::InvalidInput("empty sample stream".into()));
    }
    let steps = samples
        .iter()
        .map(|s| train_sample(model, &s.x, s.target))
        .collect::<Result<Vec<_>>>()?;
    Ok(FitResult { steps })
}

fn rmse(residuals: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = residuals.fold((0.0, 0usize), |(s, c), r| (s + r * r, c + 1));
    (sum / count as f64).sqrt()
}

pub fn predict_batch_with(model: &Model, samples: &[Sample], strategy: Strategy) -> Result<Vec<f64>> {
    strategy
        .map(samples, |s| predict(model, &s.x).map(|(y, _)| y))
        .into_iter()
        .collect()
}

pub fn predict_batch(model: &Model, samples: &[Sample]) -> Result<Vec<f64>> {
    predict_batch_with(model, samples, Strategy::default())
}

/// Root-mean-square error of the frozen model over `samples`.
pub fn evaluate_with(model: &Model, samples: &[Sample], strategy: Strategy) -> Result<f64> {
    if samples.is_empty() {
        return Err(PanfisError::InvalidInput("empty sample set".into()));
    }
    let predictions = predict_batch_with(model, samples, strategy)?;
    Ok(rmse(samples.iter().zip(predictions).map(|(s, y)| s.target - y)))
}

pub fn evaluate(model: &Model, samples: &[Sample]) -> Result<f64> {
    evaluate_with(model, samples, Strategy::default())
}

/// Row-per-step CSV: `n,y,target,abs_error,event,rule_count`.
pub fn write_trace_csv<W: Write>(steps: &[TrainStep], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["n", "y", "target", "abs_error", "event", "rule_count"])?;
    for s in steps {
        w.write_record([
            s.n.to_string(),
            s.prediction.to_string(),
            s.target.to_string(),
            s.abs_error.to_string(),
            s.event.to_string(),
            s.rule_count_after.to_string(),
        ])?;
    }
    w.flush().map_err(|e| PanfisError::io("trace", e))?;
    Ok(())
}
