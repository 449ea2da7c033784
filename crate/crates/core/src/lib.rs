//! Leakage-safe risk-prediction study engine for longitudinal laboratory data.
//!
//! The crate covers the full path from a messy laboratory export to a
//! held-out evaluation report:
//!
//! * [`dataio`] parses raw CSV exports, decodes gestational-week suffixes in
//!   feature names and applies leakage exclusions.
//! * [`preprocess`] screens, imputes, standardizes and one-hot encodes, with
//!   every statistic fitted on training rows only.
//! * [`models`] holds five binary classifiers behind one interface.
//! * [`protocol`] runs the stratified split, cross-validated randomized
//!   search, model selection and out-of-fold thresholding.
//! * [`metrics`] evaluates discrimination, calibration and clinical utility
//!   with percentile bootstrap intervals.
//! * [`interpret`] ranks predictors and computes the group-comparison
//!   statistics used in the summary tables.
//! * [`synth`] generates synthetic cohorts with a known ground truth.
//! * [`bundle`] writes and re-reads the self-contained report artifacts.
//!
//! ```
//! use labrisk::metrics::{auroc, ScoredSet};
//!
//! let set = ScoredSet::new(vec![0.1, 0.4, 0.35, 0.8], vec![false, false, true, true]).unwrap();
//! assert_eq!(auroc(&set).unwrap(), 0.75);
//! ```

pub mod bundle;
pub mod config;
pub mod dataio;
pub mod error;
pub mod interpret;
pub mod matrix;
pub mod metrics;
pub mod models;
pub mod preprocess;
pub mod protocol;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::Matrix;
