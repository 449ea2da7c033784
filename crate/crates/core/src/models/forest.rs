//! Random forest and extra-trees ensembles over the shared CART core.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{class_fraction, Criterion, Presorted, SplitMode, Tree, TreeBuilder, TreeParams};
use super::{normalize_importance, FeatureFraction};
use crate::rng::stream;
use crate::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub features_per_split: FeatureFraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub importance: Option<Vec<f64>>,
}

impl Forest {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        (sum / self.trees.len() as f64).clamp(0.0, 1.0)
    }
}

/// Trains `n_trees` Gini trees, tree `t` seeded from `(seed, t)`.
///
/// With `bootstrap` each tree sees a with-replacement resample (duplicates as
/// weights) and exhaustive thresholds; without it each tree sees every row
/// and draws one random threshold per candidate feature.
pub fn train_ensemble(x: &Matrix, y: &[bool], params: &ForestParams, bootstrap: bool, seed: u64) -> Forest {
    let n = x.rows();
    let d = x.cols();
    let targets: Vec<f64> = y.iter().map(|&b| b as u8 as f64).collect();
    let presorted = Presorted::new(x);
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        features_per_split: Some(params.features_per_split.resolve(d)),
        split_mode: if bootstrap { SplitMode::Exhaustive } else { SplitMode::RandomThreshold },
        criterion: Criterion::Gini,
    };
    let trees: Vec<Tree> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(seed, &[t as u64]);
            let mut weights = vec![0.0; n];
            if bootstrap {
                for _ in 0..n {
                    weights[rng.random_range(0..n)] += 1.0;
                }
            } else {
                weights.fill(1.0);
            }
            let builder = TreeBuilder::new(x, &targets, &weights, &presorted, tree_params);
            let mut leaf = class_fraction(&targets, &weights);
            builder.build(&mut rng, &mut leaf)
        })
        .collect();
    let mut acc = vec![0.0; d];
    for t in &trees {
        t.accumulate_importance(&mut acc);
    }
    Forest { trees, importance: normalize_importance(acc) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tree::train_cart;

    #[test]
    fn single_tree_forest_reduces_to_cart_when_resample_covers_rows() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]);
        let y = [false, true];
        let params = ForestParams { n_trees: 1, max_depth: 3, min_samples_leaf: 1, features_per_split: FeatureFraction::All };
        let cart = train_cart(&x, &y, 3, 1, None, SplitMode::Exhaustive, &mut stream(0, &[]));
        let mut matched = 0;
        for seed in 0..16 {
            let f = train_ensemble(&x, &y, &params, true, seed);
            let t = &f.trees[0];
            if t.leaf_count() > 1 {
                assert_eq!(t, &cart);
                matched += 1;
            }
        }
        assert!(matched > 0);
    }

    #[test]
    fn identical_trees_average_to_one_tree() {
        let x = Matrix::from_rows(&[vec![0.0], vec![0.0], vec![1.0], vec![1.0]]);
        let y = [false, false, true, true];
        let params = ForestParams { n_trees: 5, max_depth: 1, min_samples_leaf: 1, features_per_split: FeatureFraction::All };
        let f = train_ensemble(&x, &y, &params, false, 3);
        // Every threshold drawn inside [0, 1) separates the two values.
        assert!(f.trees.windows(2).all(|w| w[0].predict_row(&[1.0]) == w[1].predict_row(&[1.0])));
        assert_eq!(f.predict_row(&[1.0]), f.trees[0].predict_row(&[1.0]));
    }

    #[test]
    fn unused_feature_permutation_leaves_importance() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, ((i * 13) % 7) as f64]).collect();
        let x = Matrix::from_rows(&rows);
        let y: Vec<bool> = (0..30).map(|i| i >= 15).collect();
        let params = ForestParams { n_trees: 8, max_depth: 3, min_samples_leaf: 1, features_per_split: FeatureFraction::All };
        let a = train_ensemble(&x, &y, &params, true, 1);
        let mut permuted = rows.clone();
        for (i, r) in permuted.iter_mut().enumerate() {
            r[1] = ((i * 11) % 7) as f64;
        }
        let b = train_ensemble(&Matrix::from_rows(&permuted), &y, &params, true, 1);
        assert_eq!(a.importance, Some(vec![1.0, 0.0]));
        assert_eq!(a.importance, b.importance);
    }

    #[test]
    fn predictions_in_unit_interval() {
        let rows: Vec<Vec<f64>> = (0..25).map(|i| vec![(i as f64).sin(), (i as f64 * 0.5).cos()]).collect();
        let x = Matrix::from_rows(&rows);
        let y: Vec<bool> = (0..25).map(|i| i % 3 == 0).collect();
        for bootstrap in [true, false] {
            let params = ForestParams { n_trees: 10, max_depth: 6, min_samples_leaf: 1, features_per_split: FeatureFraction::Sqrt };
            let f = train_ensemble(&x, &y, &params, bootstrap, 2);
            for i in 0..25 {
                assert!((0.0..=1.0).contains(&f.predict_row(x.row(i))));
            }
        }
    }
}
