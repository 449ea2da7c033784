//! Binary classifiers behind one train / predict-probability interface.
//!
//! Five families are available: L2 logistic regression, an RBF-kernel SVM
//! with Platt probabilities, random forest, extra trees and gradient
//! boosting. The three tree ensembles share the CART core in [`tree`] and
//! expose normalized impurity-decrease importances.
//!
//! ```
//! use labrisk::models::{train, Hyperparams, LogRegParams};
//! use labrisk::Matrix;
//!
//! let x = Matrix::from_rows(&[vec![-1.0], vec![1.0]]);
//! let hp = Hyperparams::Logreg(LogRegParams { l2_lambda: 0.1, max_iter: 1000, tol: 1e-10 });
//! let model = train(&x, &[false, true], &hp, 0).unwrap();
//! let p = model.predict_proba(&x).unwrap();
//! assert!((p[0] + p[1] - 1.0).abs() < 1e-6);
//! ```

pub mod forest;
pub mod gbm;
pub mod logreg;
pub mod svm;
pub mod tree;

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use forest::{train_ensemble, Forest, ForestParams};
pub use gbm::{train_gradient_boosting, GbmModel, GbmParams};
pub use logreg::{train_logreg, LogRegModel, LogRegParams};
pub use svm::{train_svm, SvmModel, SvmParams};
pub use tree::{train_cart, Node, SplitMode, Tree};

use crate::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("training data has no rows")]
    EmptyInput,
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("design matrix contains non-finite values")]
    NonFiniteInput,
    #[error("training loss became non-finite; check feature scaling")]
    NonFiniteLoss,
    #[error("model expects {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("internal model error: {0}")]
    Internal(String),
}

/// Candidate families in their fixed tie-breaking order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Logreg,
    SvmRbf,
    RandomForest,
    ExtraTrees,
    GradientBoosting,
}

impl Family {
    pub const ALL: [Family; 5] =
        [Family::Logreg, Family::SvmRbf, Family::RandomForest, Family::ExtraTrees, Family::GradientBoosting];

    pub fn name(self) -> &'static str {
        match self {
            Family::Logreg => "logreg",
            Family::SvmRbf => "svm_rbf",
            Family::RandomForest => "random_forest",
            Family::ExtraTrees => "extra_trees",
            Family::GradientBoosting => "gradient_boosting",
        }
    }

    /// Human-readable name for report tables.
    pub fn label(self) -> &'static str {
        match self {
            Family::Logreg => "Logistic regression",
            Family::SvmRbf => "Support vector machine",
            Family::RandomForest => "Random forest",
            Family::ExtraTrees => "Extra trees",
            Family::GradientBoosting => "Gradient boosting",
        }
    }

    pub fn has_native_importance(self) -> bool {
        matches!(self, Family::RandomForest | Family::ExtraTrees | Family::GradientBoosting)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown model family `{s}`"))
    }
}

/// Number of features examined at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureFraction {
    Sqrt,
    Third,
    All,
    Count(usize),
}

impl FeatureFraction {
    pub fn resolve(self, d: usize) -> usize {
        let k = match self {
            FeatureFraction::Sqrt => (d as f64).sqrt().round() as usize,
            FeatureFraction::Third => d / 3,
            FeatureFraction::All => d,
            FeatureFraction::Count(k) => k,
        };
        k.clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Hyperparams {
    Logreg(LogRegParams),
    SvmRbf(SvmParams),
    RandomForest(ForestParams),
    ExtraTrees(ForestParams),
    GradientBoosting(GbmParams),
}

impl Hyperparams {
    pub fn family(&self) -> Family {
        match self {
            Hyperparams::Logreg(_) => Family::Logreg,
            Hyperparams::SvmRbf(_) => Family::SvmRbf,
            Hyperparams::RandomForest(_) => Family::RandomForest,
            Hyperparams::ExtraTrees(_) => Family::ExtraTrees,
            Hyperparams::GradientBoosting(_) => Family::GradientBoosting,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidHyperparams(msg.to_string()));
        match self {
            Hyperparams::Logreg(p) => {
                if !(p.l2_lambda >= 0.0 && p.l2_lambda.is_finite()) {
                    return bad("l2_lambda must be finite and nonnegative");
                }
                if !(p.tol > 0.0) {
                    return bad("tol must be positive");
                }
            }
            Hyperparams::SvmRbf(p) => {
                if !(p.c > 0.0 && p.c.is_finite()) || !(p.gamma > 0.0 && p.gamma.is_finite()) {
                    return bad("C and gamma must be positive");
                }
                if !(p.tol > 0.0) {
                    return bad("tol must be positive");
                }
            }
            Hyperparams::RandomForest(p) | Hyperparams::ExtraTrees(p) => {
                if p.n_trees == 0 || p.max_depth == 0 || p.min_samples_leaf == 0 {
                    return bad("n_trees, max_depth and min_samples_leaf must be at least 1");
                }
            }
            Hyperparams::GradientBoosting(p) => {
                if p.max_depth == 0 || p.min_samples_leaf == 0 {
                    return bad("max_depth and min_samples_leaf must be at least 1");
                }
                if !(p.learning_rate >= 0.0 && p.learning_rate.is_finite()) {
                    return bad("learning_rate must be finite and nonnegative");
                }
                if !(p.subsample > 0.0 && p.subsample <= 1.0) {
                    return bad("subsample must lie in (0, 1]");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fitted {
    Logreg(LogRegModel),
    Svm(SvmModel),
    Forest(Forest),
    Boosting(GbmModel),
}

/// A fitted classifier; immutable and shareable once trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub hyperparams: Hyperparams,
    pub n_features: usize,
    pub fitted: Fitted,
}

impl TrainedModel {
    pub fn family(&self) -> Family {
        self.hyperparams.family()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let p = match &self.fitted {
            Fitted::Logreg(m) => m.predict_row(row),
            Fitted::Svm(m) => m.predict_row(row),
            Fitted::Forest(m) => m.predict_row(row),
            Fitted::Boosting(m) => m.predict_row(row),
        };
        p.clamp(0.0, 1.0)
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>, ModelError> {
        if x.cols() != self.n_features {
            return Err(ModelError::DimensionMismatch { expected: self.n_features, found: x.cols() });
        }
        Ok((0..x.rows()).into_par_iter().map(|r| self.predict_row(x.row(r))).collect())
    }

    /// Normalized impurity-decrease importance; absent for linear and kernel
    /// models and for ensembles that never split.
    pub fn feature_importance(&self) -> Option<&[f64]> {
        match &self.fitted {
            Fitted::Forest(m) => m.importance.as_deref(),
            Fitted::Boosting(m) => m.importance.as_deref(),
            _ => None,
        }
    }

    /// False when an iterative solver stopped at its iteration cap.
    pub fn converged(&self) -> bool {
        match &self.fitted {
            Fitted::Logreg(m) => m.converged,
            Fitted::Svm(m) => m.converged,
            _ => true,
        }
    }
}

/// Trains one model. `seed` drives every random choice of the tree families
/// and is ignored by the deterministic solvers.
pub fn train(x: &Matrix, y: &[bool], hp: &Hyperparams, seed: u64) -> Result<TrainedModel, ModelError> {
    hp.validate()?;
    if x.rows() == 0 {
        return Err(ModelError::EmptyInput);
    }
    if x.rows() != y.len() {
        return Err(ModelError::LengthMismatch { rows: x.rows(), labels: y.len() });
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFiniteInput);
    }
    let both = y.iter().any(|&v| v) && y.iter().any(|&v| !v);
    let fitted = match hp {
        Hyperparams::Logreg(p) => {
            if !both {
                return Err(ModelError::SingleClass);
            }
            Fitted::Logreg(train_logreg(x, y, p)?)
        }
        Hyperparams::SvmRbf(p) => {
            if !both {
                return Err(ModelError::SingleClass);
            }
            Fitted::Svm(train_svm(x, y, p)?)
        }
        Hyperparams::RandomForest(p) => Fitted::Forest(train_ensemble(x, y, p, true, seed)),
        Hyperparams::ExtraTrees(p) => Fitted::Forest(train_ensemble(x, y, p, false, seed)),
        Hyperparams::GradientBoosting(p) => {
            if !both {
                return Err(ModelError::SingleClass);
            }
            Fitted::Boosting(train_gradient_boosting(x, y, p, seed)?)
        }
    };
    Ok(TrainedModel { hyperparams: hp.clone(), n_features: x.cols(), fitted })
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z)) - y z`, evaluated without overflow.
#[inline]
pub fn logistic_loss(y: f64, z: f64) -> f64 {
    let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
    softplus - y * z
}

pub(crate) fn normalize_importance(mut acc: Vec<f64>) -> Option<Vec<f64>> {
    let total: f64 = acc.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return None;
    }
    for v in &mut acc {
        *v /= total;
    }
    Some(acc)
}
