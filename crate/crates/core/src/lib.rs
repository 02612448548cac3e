//! Evolving Takagi-Sugeno-Kang fuzzy learner for streaming regression.
//!
//! Rules carry multivariate Gaussian premises (centre plus inverse
//! covariance) and first-order linear consequents. The rule base starts
//! empty and grows, adapts, and prunes itself in a single pass over the
//! data; consequents follow a gated, firing-weighted recursive least
//! squares. A time-domain vibration feature pipeline and an experiment
//! harness sit on top.

pub mod consequent;
pub mod error;
pub mod exec;
pub mod features;
pub mod harness;
pub mod inference;
pub mod learner;
mod linalg;
pub mod model;
pub mod structure;

pub use error::{PanfisError, Result};
pub use exec::Strategy;
pub use inference::{predict, Firings};
pub use learner::{evaluate, fit_stream, train_sample, Event, FitResult, Sample, TrainStep};
pub use model::{load_model, save_model, Config, FuzzySet, Model, Rule};
