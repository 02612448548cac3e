//! Experiment drivers behind the CLI: direct-mode and time-series runs,
//! threshold sweeps, readable rule listings, and feature extraction.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{PanfisError, Result};
use crate::exec::Strategy;
use crate::features::{self, Feature, FeatureVector, Normalizer};
use crate::inference::extract_fuzzy_sets;
use crate::learner::{fit_stream, predict_batch, FitResult, Sample};
use crate::model::{Config, FuzzySet, Model};
use crate::structure::{merged_rule_view, MergedView};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Direct,
    Timeseries,
}

/// Summary of one experiment, one row of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: Mode,
    pub target: String,
    #[serde(rename = "RMSE")]
    pub rmse: f64,
    #[serde(rename = "Rule")]
    pub rule_count: usize,
    /// Per-dimension set counts joined with '-', e.g. "2-2".
    #[serde(rename = "Fuzzy Set")]
    pub fuzzy_set: String,
    #[serde(rename = "Time")]
    pub wall_time_seconds: f64,
    pub fuzzy_set_counts: Vec<usize>,
    pub config: Config,
    pub n_train: usize,
    pub n_evaluated: usize,
    pub predictions: Vec<f64>,
    pub targets: Vec<f64>,
    pub trace: Option<String>,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Everything produced by a run; the CLI persists the parts it is asked for.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub model: Model,
    pub fit: FitResult,
}

fn fuzzy_set_cell(counts: &[usize]) -> String {
    counts.iter().map(usize::to_string).collect::<Vec<_>>().join("-")
}

fn normalized_rows(table: &[FeatureVector], fit_rows: usize) -> Result<Vec<Vec<f64>>> {
    let raw: Vec<[f64; 9]> = table.iter().map(FeatureVector::values).collect();
    let normalizer = Normalizer::fit(&raw[..fit_rows])?;
    Ok(raw.iter().map(|r| normalizer.apply(r)).collect())
}

fn train(config: &Config, input_dim: usize, samples: &[Sample]) -> Result<(Model, FitResult, f64)> {
    let mut config = config.clone();
    config.input_dim = input_dim;
    let mut model = Model::new(config)?;
    let start = Instant::now();
    let fit = fit_stream(&mut model, samples)?;
    let elapsed = start.elapsed().as_secs_f64();
    Ok((model, fit, elapsed))
}

/// Train on the first `split` rows, freeze, and score the remainder.
/// Features are min-max scaled with bounds fitted on the training rows.
pub fn run_direct(table: &[FeatureVector], target: Feature, config: &Config, split: usize) -> Result<RunOutput> {
    if split >= table.len() {
        return Err(PanfisError::InvalidInput(format!(
            "empty test split: split {split} leaves no rows of {}",
            table.len()
        )));
    }
    if split < 2 {
        return Err(PanfisError::InvalidInput("training split needs at least 2 rows".into()));
    }
    let rows = normalized_rows(table, split)?;
    let (train_set, test_set) = features::build_direct_dataset(&rows, target, split)?;
    let (model, fit, elapsed) = train(config, Feature::ALL.len() - 1, &train_set)?;
    let predictions = predict_batch(&model, &test_set)?;
    let targets: Vec<f64> = test_set.iter().map(|s| s.target).collect();
    let rmse = (predictions
        .iter()
        .zip(&targets)
        .map(|(y, t)| (t - y) * (t - y))
        .sum::<f64>()
        / targets.len() as f64)
        .sqrt();
    let counts = merged_rule_view(&model)?.set_counts();
    let report = RunReport {
        mode: Mode::Direct,
        target: target.name().to_string(),
        rmse,
        rule_count: model.rules.len(),
        fuzzy_set: fuzzy_set_cell(&counts),
        wall_time_seconds: elapsed,
        fuzzy_set_counts: counts,
        config: model.config.clone(),
        n_train: train_set.len(),
        n_evaluated: test_set.len(),
        predictions,
        targets,
        trace: None,
    };
    Ok(RunOutput { report, model, fit })
}

/// Lag-2 one-step-ahead prediction of one feature over the whole table,
/// scored on the predictions made before each update.
pub fn run_timeseries(table: &[FeatureVector], target: Feature, config: &Config) -> Result<RunOutput> {
    if table.len() < 3 {
        return Err(PanfisError::InvalidInput(format!(
            "series of length {} is too short, need at least 3",
            table.len()
        )));
    }
    let rows = normalized_rows(table, table.len())?;
    let series: Vec<f64> = rows.iter().map(|r| r[target.index()]).collect();
    let samples = features::build_timeseries_dataset(&series)?;
    let (model, fit, elapsed) = train(config, 2, &samples)?;
    let counts = merged_rule_view(&model)?.set_counts();
    let report = RunReport {
        mode: Mode::Timeseries,
        target: target.name().to_string(),
        rmse: fit.rmse(),
        rule_count: model.rules.len(),
        fuzzy_set: fuzzy_set_cell(&counts),
        wall_time_seconds: elapsed,
        fuzzy_set_counts: counts,
        config: model.config.clone(),
        n_train: samples.len(),
        n_evaluated: samples.len(),
        predictions: fit.predictions(),
        targets: samples.iter().map(|s| s.target).collect(),
        trace: None,
    };
    Ok(RunOutput { report, model, fit })
}

/// Outcome of training one configuration in a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub config: Config,
    pub final_rules: usize,
    pub max_rules: usize,
    pub pruned_total: usize,
    pub rmse: f64,
    /// Sample indices at which a rule was added.
    pub grow_steps: Vec<u64>,
}

/// Train a fresh model per configuration on the same stream. Configurations
/// are independent and run concurrently under `strategy`.
pub fn sweep(samples: &[Sample], configs: &[Config], strategy: Strategy) -> Result<Vec<SweepPoint>> {
    strategy
        .map(configs, |config| {
            let mut model = Model::new(config.clone())?;
            let fit = fit_stream(&mut model, samples)?;
            Ok(SweepPoint {
                config: config.clone(),
                final_rules: model.rules.len(),
                max_rules: fit.rule_counts().into_iter().max().unwrap_or(0),
                pruned_total: fit.steps.iter().map(|s| s.pruned.len()).sum(),
                rmse: fit.rmse(),
                grow_steps: fit.steps.iter().filter(|s| s.grew()).map(|s| s.n).collect(),
            })
        })
        .into_iter()
        .collect()
}

/// Apply a flat `key = value` config file (`#` starts a comment).
pub fn apply_config_text(config: &mut Config, text: &str) -> Result<()> {
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| PanfisError::Parse { line: k as u64 + 1, message };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(format!("expected key=value, got '{line}'")))?;
        let key = key.trim().replace('-', "_");
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("'{}' is not a number", value.trim())))?;
        match key.as_str() {
            "g1" => config.g1 = value,
            "g2" => config.g2 = value,
            "epsilon" => config.epsilon = value,
            "merge_threshold" => config.merge_threshold = value,
            "omega" => config.omega = value,
            "r" | "mahalanobis_r" => config.mahalanobis_r = value,
            other => return Err(parse_err(format!("unknown key '{other}'"))),
        }
    }
    Ok(())
}

/// One rule as displayed to an operator.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleListing {
    pub support: u64,
    pub center: Vec<f64>,
    pub inv_cov: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// The rule's own axis-cut fuzzy sets.
    pub extracted: Vec<FuzzySet>,
    /// Index of the shared (merged) set per dimension.
    pub set_index: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Listing {
    pub rules: Vec<RuleListing>,
    pub merged: MergedView,
    pub r: f64,
}

/// Build the readable view of a model with Mahalanobis radius `r`
/// (the model's own radius when `None`). `None` for an empty model.
pub fn describe_rules(model: &Model, r: Option<f64>) -> Result<Option<Listing>> {
    if model.rules.is_empty() {
        return Ok(None);
    }
    let mut view_model = model.clone();
    if let Some(r) = r {
        if !(r > 0.0 && r.is_finite()) {
            return Err(PanfisError::InvalidConfig(format!("r must be positive, got {r}")));
        }
        view_model.config.mahalanobis_r = r;
    }
    let r = view_model.config.mahalanobis_r;
    let merged = merged_rule_view(&view_model)?;
    let rules = view_model
        .rules
        .iter()
        .zip(&merged.assignment)
        .map(|(rule, set_index)| RuleListing {
            support: rule.support,
            center: rule.center.iter().copied().collect(),
            inv_cov: (0..rule.dim())
                .map(|i| rule.inv_cov.row(i).iter().copied().collect())
                .collect(),
            weights: rule.weights.iter().copied().collect(),
            extracted: extract_fuzzy_sets(rule, r),
            set_index: set_index.clone(),
        })
        .collect();
    Ok(Some(Listing { rules, merged, r }))
}

fn polynomial(weights: &[f64]) -> String {
    let mut out = format!("y = {}", weights[0]);
    for (j, w) in weights.iter().enumerate().skip(1) {
        let sign = if w.is_sign_negative() { '-' } else { '+' };
        write!(out, " {sign} {}·x{j}", w.abs()).unwrap();
    }
    out
}

fn vector(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(f64::to_string).collect::<Vec<_>>().join(", "))
}

impl Listing {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, rule) in self.rules.iter().enumerate() {
            let n = i + 1;
            let then = polynomial(&rule.weights);
            let rows: Vec<String> = rule.inv_cov.iter().map(|r| vector(r)).collect();
            writeln!(out, "R{n} (support {}):", rule.support).unwrap();
            writeln!(
                out,
                "  IF x is close to C{n} = {}, inv_cov{n} = [{}] THEN {then}",
                vector(&rule.center),
                rows.join(", ")
            )
            .unwrap();
            let clauses: Vec<String> = rule
                .extracted
                .iter()
                .enumerate()
                .map(|(d, s)| {
                    format!(
                        "x{dim} is close to c{n}{dim} = {}, σ{n}{dim} = {:.4} [A{dim}.{set}]",
                        s.center,
                        s.width,
                        dim = d + 1,
                        set = rule.set_index[d] + 1
                    )
                })
                .collect();
            writeln!(out, "  IF {} THEN {then}", clauses.join(" AND ")).unwrap();
        }
        writeln!(out, "merged fuzzy sets (r = {}):", self.r).unwrap();
        for (d, sets) in self.merged.sets.iter().enumerate() {
            let items: Vec<String> = sets
                .iter()
                .enumerate()
                .map(|(k, s)| format!("A{}.{} (c = {:.4}, σ = {:.4})", d + 1, k + 1, s.center, s.width))
                .collect();
            writeln!(out, "  x{}: {}", d + 1, items.join(", ")).unwrap();
        }
        out
    }
}

pub fn show_rules(model: &Model, r: Option<f64>) -> Result<String> {
    Ok(match describe_rules(model, r)? {
        Some(listing) => listing.render(),
        None => "no rules\n".to_string(),
    })
}

/// Feature rows for every window of every input file.
pub fn extract(paths: &[PathBuf], window_size: Option<usize>, bins: usize, strategy: Strategy) -> Result<Vec<FeatureVector>> {
    let mut windows = Vec::new();
    for path in paths {
        windows.extend(features::read_raw_windows(path, window_size)?);
    }
    if windows.is_empty() {
        return Err(PanfisError::InvalidInput("no windows found".into()));
    }
    features::extract_all(&windows, bins, strategy)
}

pub fn load_table(path: &Path) -> Result<Vec<FeatureVector>> {
    features::read_feature_table(path)
}
