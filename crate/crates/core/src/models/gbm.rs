//! Gradient boosting on the logistic loss.
//!
//! The score starts at the prevalence log-odds. Each stage fits a
//! least-squares regression tree to the residuals `y - p` and replaces every
//! leaf with one Newton step `sum(r) / sum(p(1-p))`, shrunk by the learning
//! rate. A leaf step that would raise its rows' loss is halved until it does
//! not, which keeps the in-bag loss monotone.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{Criterion, Presorted, SplitMode, Tree, TreeBuilder, TreeParams};
use super::{logistic_loss, normalize_importance, sigmoid, ModelError};
use crate::rng::stream;
use crate::Matrix;

const HESSIAN_FLOOR: f64 = 1e-12;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub n_stages: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub subsample: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub init_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    pub importance: Option<Vec<f64>>,
    /// Set when a stage found every in-bag residual at zero.
    pub early_stopped: bool,
    /// Mean training loss after initialization and after each stage.
    pub loss_trace: Vec<f64>,
}

impl GbmModel {
    pub fn score_row(&self, row: &[f64]) -> f64 {
        self.init_score + self.trees.iter().map(|t| self.learning_rate * t.predict_row(row)).sum::<f64>()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.score_row(row))
    }
}

/// Negative gradient of the logistic loss with respect to the score.
#[inline]
pub fn negative_gradient(y: f64, score: f64) -> f64 {
    y - sigmoid(score)
}

fn mean_loss(targets: &[f64], scores: &[f64], rows: &[usize]) -> f64 {
    rows.iter().map(|&r| logistic_loss(targets[r], scores[r])).sum::<f64>() / rows.len().max(1) as f64
}

pub fn train_gradient_boosting(x: &Matrix, y: &[bool], params: &GbmParams, seed: u64) -> Result<GbmModel, ModelError> {
    let n = x.rows();
    let d = x.cols();
    let targets: Vec<f64> = y.iter().map(|&b| b as u8 as f64).collect();
    let prevalence = targets.iter().sum::<f64>() / n as f64;
    let init_score = (prevalence / (1.0 - prevalence)).ln();
    let mut scores = vec![init_score; n];
    let all_rows: Vec<usize> = (0..n).collect();
    let presorted = Presorted::new(x);
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        features_per_split: None,
        split_mode: SplitMode::Exhaustive,
        criterion: Criterion::SquaredError,
    };
    let in_bag_count = ((params.subsample * n as f64).round() as usize).clamp(1, n);
    let lr = params.learning_rate;

    let mut trees = Vec::with_capacity(params.n_stages);
    let mut loss_trace = vec![mean_loss(&targets, &scores, &all_rows)];
    let mut early_stopped = false;

    for stage in 0..params.n_stages {
        let mut rng = stream(seed, &[stage as u64]);
        let in_bag: Vec<usize> = if in_bag_count == n {
            all_rows.clone()
        } else {
            let mut pool = all_rows.clone();
            for i in 0..in_bag_count {
                let j = rng.random_range(i..n);
                pool.swap(i, j);
            }
            pool.truncate(in_bag_count);
            pool.sort_unstable();
            pool
        };
        let probs: Vec<f64> = scores.iter().map(|&s| sigmoid(s)).collect();
        let residuals: Vec<f64> = (0..n).map(|i| targets[i] - probs[i]).collect();
        if in_bag.iter().all(|&r| residuals[r].abs() < 1e-12) {
            early_stopped = true;
            break;
        }
        let mut weights = vec![0.0; n];
        for &r in &in_bag {
            weights[r] = 1.0;
        }
        let before = mean_loss(&targets, &scores, &in_bag);
        let mut newton_leaf = |rows: &[u32]| -> f64 {
            let (mut g, mut h) = (0.0, 0.0);
            for &r in rows {
                let r = r as usize;
                g += residuals[r];
                h += probs[r] * (1.0 - probs[r]);
            }
            let mut step = g / h.max(HESSIAN_FLOOR);
            let leaf_loss = |delta: f64| -> f64 {
                rows.iter().map(|&r| logistic_loss(targets[r as usize], scores[r as usize] + delta)).sum()
            };
            let base = leaf_loss(0.0);
            let mut halvings = 0;
            while leaf_loss(lr * step) > base && halvings < MAX_HALVINGS {
                step *= 0.5;
                halvings += 1;
            }
            if halvings == MAX_HALVINGS {
                0.0
            } else {
                step
            }
        };
        let tree = TreeBuilder::new(x, &residuals, &weights, &presorted, tree_params).build(&mut rng, &mut newton_leaf);
        for (i, s) in scores.iter_mut().enumerate() {
            *s += lr * tree.predict_row(x.row(i));
        }
        let after = mean_loss(&targets, &scores, &in_bag);
        if !after.is_finite() {
            return Err(ModelError::NonFiniteLoss);
        }
        if lr <= 1.0 && after > before + 1e-12 * before.abs().max(1.0) {
            return Err(ModelError::Internal(format!(
                "boosting stage {stage} raised in-bag loss from {before} to {after}"
            )));
        }
        loss_trace.push(mean_loss(&targets, &scores, &all_rows));
        trees.push(tree);
    }

    let mut acc = vec![0.0; d];
    for t in &trees {
        t.accumulate_importance(&mut acc);
    }
    Ok(GbmModel { init_score, learning_rate: lr, trees, importance: normalize_importance(acc), early_stopped, loss_trace })
}
