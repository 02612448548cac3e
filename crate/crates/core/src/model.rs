//! Learner state: configuration, rules, and the JSON model document.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PanfisError, Result};
use crate::linalg;

pub const FORMAT_VERSION: u32 = 1;

/// Hyper-parameters of the evolving learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    /// Rule-growing (conflict) threshold on datum significance.
    pub g1: f64,
    /// Rule-pruning threshold on extended rule significance.
    pub g2: f64,
    /// ε-completeness level used to size new rules.
    pub epsilon: f64,
    /// Fuzzy-set similarity above which displayed sets are merged.
    pub merge_threshold: f64,
    /// Initial scale of each rule's RLS covariance.
    pub omega: f64,
    /// Mahalanobis radius for the axis-cut fuzzy-set extraction.
    pub mahalanobis_r: f64,
    pub input_dim: usize,
}

impl Config {
    pub const DEFAULT_G1: f64 = 0.01;
    pub const DEFAULT_G2: f64 = 0.001;

    pub fn new(input_dim: usize) -> Self {
        Config {
            g1: Self::DEFAULT_G1,
            g2: Self::DEFAULT_G2,
            epsilon: 0.6,
            merge_threshold: 0.8,
            omega: 1e5,
            mahalanobis_r: 1.0,
            input_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(PanfisError::InvalidConfig(msg));
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must lie in (0,1), got {}", self.epsilon));
        }
        if !(self.merge_threshold > 0.0 && self.merge_threshold < 1.0) {
            return bad(format!(
                "merge_threshold must lie in (0,1), got {}",
                self.merge_threshold
            ));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return bad(format!("omega must be positive, got {}", self.omega));
        }
        if !(self.mahalanobis_r > 0.0 && self.mahalanobis_r.is_finite()) {
            return bad(format!("mahalanobis_r must be positive, got {}", self.mahalanobis_r));
        }
        if !(self.g1 >= 0.0 && self.g1.is_finite()) {
            return bad(format!("g1 must be non-negative, got {}", self.g1));
        }
        if !(self.g2 >= 0.0 && self.g2.is_finite()) {
            return bad(format!("g2 must be non-negative, got {}", self.g2));
        }
        if self.input_dim == 0 {
            return bad("input_dim must be positive".into());
        }
        Ok(())
    }
}

/// One first-order TSK rule with a multivariate Gaussian premise.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub center: DVector<f64>,
    /// Inverse covariance of the premise; symmetric positive definite.
    pub inv_cov: DMatrix<f64>,
    /// Number of samples absorbed by the cluster.
    pub support: u64,
    /// Consequent weights over the extended input `[1, x]`.
    pub weights: DVector<f64>,
    /// Local RLS covariance, `(u+1) x (u+1)`.
    pub rls_cov: DMatrix<f64>,
}

impl Rule {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn validate(&self, index: usize) -> Result<()> {
        let u = self.dim();
        let shape_err = |what: &str| {
            Err(PanfisError::InvalidModel(format!(
                "rule {index}: {what} has the wrong shape for dimension {u}"
            )))
        };
        if self.inv_cov.shape() != (u, u) {
            return shape_err("inv_cov");
        }
        if self.weights.len() != u + 1 {
            return shape_err("weights");
        }
        if self.rls_cov.shape() != (u + 1, u + 1) {
            return shape_err("rls_cov");
        }
        if self.support < 1 {
            return Err(PanfisError::InvalidModel(format!("rule {index}: support must be >= 1")));
        }
        if self.center.iter().chain(self.weights.iter()).any(|v| !v.is_finite()) {
            return Err(PanfisError::InvalidModel(format!("rule {index}: non-finite entries")));
        }
        linalg::validate_spd(&self.inv_cov, &format!("rule {index} inv_cov"))?;
        linalg::validate_spd(&self.rls_cov, &format!("rule {index} rls_cov"))?;
        Ok(())
    }

    /// Consequent output `[1, x] · W`.
    pub fn consequent(&self, x: &[f64]) -> f64 {
        self.weights[0]
            + x.iter()
                .zip(self.weights.iter().skip(1))
                .map(|(a, w)| a * w)
                .sum::<f64>()
    }
}

/// The evolving learner state.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: Config,
    pub rules: Vec<Rule>,
    pub samples_seen: u64,
    /// Running per-dimension minimum of training inputs (empty before the first sample).
    pub input_min: Vec<f64>,
    /// Running per-dimension maximum of training inputs.
    pub input_max: Vec<f64>,
}

impl Model {
    pub fn new(config: Config) -> Result<Self> {
        config.validate()?;
        Ok(Model {
            config,
            rules: Vec::new(),
            samples_seen: 0,
            input_min: Vec::new(),
            input_max: Vec::new(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if let Some(first) = self.rules.first() {
            for (index, rule) in self.rules.iter().enumerate().skip(1) {
                if rule.dim() != first.dim() {
                    return Err(PanfisError::RuleDimensionMismatch {
                        first: first.dim(),
                        index,
                        other: rule.dim(),
                    });
                }
            }
            if first.dim() != self.config.input_dim {
                return Err(PanfisError::DimensionMismatch {
                    expected: self.config.input_dim,
                    actual: first.dim(),
                });
            }
        }
        for (index, rule) in self.rules.iter().enumerate() {
            rule.validate(index)?;
        }
        let u = self.config.input_dim;
        let range_ok = (self.input_min.is_empty() && self.input_max.is_empty())
            || (self.input_min.len() == u
                && self.input_max.len() == u
                && self
                    .input_min
                    .iter()
                    .zip(&self.input_max)
                    .all(|(lo, hi)| lo.is_finite() && hi.is_finite() && lo <= hi));
        if !range_ok {
            return Err(PanfisError::InvalidModel("input_range is inconsistent".into()));
        }
        Ok(())
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.config.input_dim {
            return Err(PanfisError::DimensionMismatch {
                expected: self.config.input_dim,
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(PanfisError::InvalidInput("non-finite input".into()));
        }
        Ok(())
    }

    /// Serialize to the JSON model document.
    pub fn to_document(&self) -> Result<String> {
        let doc = ModelDocument::from(self);
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Parse and validate a JSON model document.
    pub fn from_document(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        doc.into_model()
    }
}

/// One-dimensional Gaussian fuzzy set used for display.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuzzySet {
    pub center: f64,
    pub width: f64,
}

impl FuzzySet {
    pub fn new(center: f64, width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite() && center.is_finite()) {
            return Err(PanfisError::InvalidInput(format!(
                "fuzzy set needs finite center and positive width, got ({center}, {width})"
            )));
        }
        Ok(FuzzySet { center, width })
    }
}

pub fn save_model(model: &Model, destination: impl AsRef<Path>) -> Result<()> {
    let text = model.to_document()?;
    std::fs::write(destination.as_ref(), text).map_err(|e| PanfisError::io(destination, e))
}

pub fn load_model(source: impl AsRef<Path>) -> Result<Model> {
    let text =
        std::fs::read_to_string(source.as_ref()).map_err(|e| PanfisError::io(source, e))?;
    Model::from_document(&text)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    format_version: u32,
    config: Config,
    samples_seen: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input_range: Option<InputRange>,
    rules: Vec<RuleDocument>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InputRange {
    min: Vec<f64>,
    max: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleDocument {
    center: Vec<f64>,
    inv_cov: Vec<Vec<f64>>,
    support: u64,
    weights: Vec<f64>,
    rls_cov: Vec<Vec<f64>>,
}

impl From<&Model> for ModelDocument {
    fn from(model: &Model) -> Self {
        ModelDocument {
            format_version: FORMAT_VERSION,
            config: model.config.clone(),
            samples_seen: model.samples_seen,
            input_range: (!model.input_min.is_empty()).then(|| InputRange {
                min: model.input_min.clone(),
                max: model.input_max.clone(),
            }),
            rules: model
                .rules
                .iter()
                .map(|r| RuleDocument {
                    center: r.center.iter().copied().collect(),
                    inv_cov: linalg::to_rows(&r.inv_cov),
                    support: r.support,
                    weights: r.weights.iter().copied().collect(),
                    rls_cov: linalg::to_rows(&r.rls_cov),
                })
                .collect(),
        }
    }
}

impl ModelDocument {
    fn into_model(self) -> Result<Model> {
        if self.format_version != FORMAT_VERSION {
            return Err(PanfisError::InvalidModel(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        let rules = self
            .rules
            .into_iter()
            .map(|r| {
                Ok(Rule {
                    center: DVector::from_vec(r.center),
                    inv_cov: linalg::from_rows(&r.inv_cov, "inv_cov")?,
                    support: r.support,
                    weights: DVector::from_vec(r.weights),
                    rls_cov: linalg::from_rows(&r.rls_cov, "rls_cov")?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let (input_min, input_max) = match self.input_range {
            Some(range) => (range.min, range.max),
            None => (Vec::new(), Vec::new()),
        };
        let model = Model {
            config: self.config,
            rules,
            samples_seen: self.samples_seen,
            input_min,
            input_max,
        };
        model.validate()?;
        Ok(model)
    }
}
