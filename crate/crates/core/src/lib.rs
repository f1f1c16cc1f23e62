//! Probabilistic bilevel coreset selection.
//!
//! Per-example inclusion probabilities `s` are optimized so that a learner
//! trained on a Bernoulli-sampled subset does well on an outer set. The outer
//! step is a policy-gradient estimate followed by projection onto
//! `{0 <= s <= 1, sum s <= K}`.

pub mod baselines;
pub mod bernoulli;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod learner;
pub mod optimizer;
pub mod oracle;
pub mod projection;
pub mod scenarios;
pub mod seed;

pub use dataset::{Dataset, LabeledExample, Mask, ProbabilityVector};
pub use error::{Error, Result};
pub use learner::{InnerConfig, LearnerKind, TrainedModel};
pub use optimizer::{run_selection, select_coreset, ExtractionMode, SelectionConfig, SelectionTrace};
