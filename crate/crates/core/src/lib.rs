//! perfloop: a feedback-loop bias simulator for fraud-detection models.
//!
//! The pipeline generates synthetic account-opening data with declared,
//! statistically verified bias conditions, trains scoring models, converts
//! scores to decisions at an FPR cap, and measures what the system's own
//! feedback does to performance (TPR at fixed FPR) and group fairness
//! (FPR-ratio parity) over time:
//!
//! - [`synthdata`] — base generator, bias injectors, verification tests
//! - [`learners`] — logistic regression and gradient-boosted trees
//! - [`decision`] — global and group-wise thresholds at a target FPR
//! - [`fairmetrics`] — confusion-based metrics and log2 group ratios
//! - [`scenarios`] — the adaptive-evasion and selective-label experiments
//! - [`runner`] — CLI, config files, manifests, cross-seed summaries

pub mod decision;
pub mod error;
pub mod fairmetrics;
pub mod io;
pub mod learners;
pub mod runner;
pub mod scenarios;
pub mod stats;
pub mod synthdata;

pub use error::{Error, Result};
