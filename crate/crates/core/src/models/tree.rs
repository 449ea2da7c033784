//! Shared CART core.
//!
//! Trees are grown depth-first over per-feature presorted row orders: each
//! node owns the same `[lo, hi)` range in every feature's order, and a split
//! stably partitions all of them. Bootstrap duplicates enter as integer row
//! weights, so no per-tree sorting is needed.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::StreamRng;
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Classification on 0/1 targets; leaf value is the class-1 fraction.
    Gini,
    /// Least-squares regression on real targets.
    SquaredError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Every midpoint between consecutive distinct values.
    Exhaustive,
    /// One uniform threshold in the node's observed range per feature.
    RandomThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Number of candidate features drawn per node; `None` uses all.
    pub features_per_split: Option<usize>,
    pub split_mode: SplitMode,
    pub criterion: Criterion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Weighted impurity decrease achieved by this split.
        gain: f64,
    },
}

/// A fitted binary tree; node 0 is the root. Rows with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    /// `(feature, threshold)` of the root, if it splits.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes.first()? {
            Node::Split { feature, threshold, .. } => Some((*feature, *threshold)),
            Node::Leaf { .. } => None,
        }
    }

    /// Adds each split's gain to `acc[feature]`.
    pub fn accumulate_importance(&self, acc: &mut [f64]) {
        for n in &self.nodes {
            if let Node::Split { feature, gain, .. } = n {
                acc[*feature] += gain;
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

/// Rows of a matrix sorted by each feature (ties by row index).
#[derive(Debug, Clone)]
pub struct Presorted {
    order: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(x: &Matrix) -> Self {
        let order = (0..x.cols())
            .map(|f| {
                let mut idx: Vec<u32> = (0..x.rows() as u32).collect();
                idx.sort_by(|&a, &b| x.get(a as usize, f).total_cmp(&x.get(b as usize, f)).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { order }
    }
}

/// Weighted impurity total of a node: `n * gini` for classification.
#[inline]
pub fn gini_total(weight: f64, positive: f64) -> f64 {
    if weight <= 0.0 {
        0.0
    } else {
        2.0 * positive * (weight - positive) / weight
    }
}

#[derive(Clone, Copy, Default)]
struct Stats {
    w: f64,
    s: f64,
}

impl Stats {
    #[inline]
    fn add(&mut self, w: f64, t: f64) {
        self.w += w;
        self.s += w * t;
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
    n_left: usize,
}

/// Grows one tree on the rows with positive weight.
///
/// `leaf_value` receives the rows (and weights) of each leaf and returns its
/// value. For regression the split criterion uses `targets`; the leaf rule
/// may differ from the mean (boosting uses a Newton step).
pub struct TreeBuilder<'a> {
    x: &'a Matrix,
    targets: &'a [f64],
    weights: &'a [f64],
    params: TreeParams,
    order: Vec<Vec<u32>>,
    goes_left: Vec<bool>,
    scratch: Vec<u32>,
    nodes: Vec<Node>,
}

impl<'a> TreeBuilder<'a> {
    pub fn new(x: &'a Matrix, targets: &'a [f64], weights: &'a [f64], presorted: &Presorted, params: TreeParams) -> Self {
        let order = presorted
            .order
            .iter()
            .map(|o| o.iter().copied().filter(|&r| weights[r as usize] > 0.0).collect())
            .collect();
        Self {
            x,
            targets,
            weights,
            params,
            order,
            goes_left: vec![false; x.rows()],
            scratch: Vec::new(),
            nodes: Vec::new(),
        }
    }

    pub fn build(mut self, rng: &mut StreamRng, leaf_value: &mut dyn FnMut(&[u32]) -> f64) -> Tree {
        let m = self.order.first().map_or(0, Vec::len);
        if m == 0 || self.x.cols() == 0 {
            return Tree { nodes: vec![Node::Leaf { value: 0.0 }] };
        }
        self.grow(0, m, 0, rng, leaf_value);
        Tree { nodes: self.nodes }
    }

    fn node_stats(&self, lo: usize, hi: usize) -> Stats {
        let mut st = Stats::default();
        for &r in &self.order[0][lo..hi] {
            let r = r as usize;
            st.add(self.weights[r], self.targets[r]);
        }
        st
    }

    fn is_pure(&self, lo: usize, hi: usize) -> bool {
        let rows = &self.order[0][lo..hi];
        let first = self.targets[rows[0] as usize];
        rows.iter().all(|&r| self.targets[r as usize] == first)
    }

    /// Criterion value of a child (lower is better) and of the parent.
    #[inline]
    fn child_score(&self, l: Stats, r: Stats) -> f64 {
        match self.params.criterion {
            Criterion::Gini => gini_total(l.w, l.s) + gini_total(r.w, r.s),
            // Minimizing SSE equals maximizing sum^2/weight over the children.
            Criterion::SquaredError => -(l.s * l.s / l.w + r.s * r.s / r.w),
        }
    }

    fn parent_score(&self, p: Stats) -> f64 {
        match self.params.criterion {
            Criterion::Gini => gini_total(p.w, p.s),
            Criterion::SquaredError => -(p.s * p.s / p.w),
        }
    }

    fn candidate_features(&self, rng: &mut StreamRng) -> Vec<usize> {
        let d = self.x.cols();
        match self.params.features_per_split {
            Some(k) if k < d => {
                let mut pool: Vec<usize> = (0..d).collect();
                for i in 0..k.max(1) {
                    let j = rng.random_range(i..d);
                    pool.swap(i, j);
                }
                pool.truncate(k.max(1));
                pool.sort_unstable();
                pool
            }
            _ => (0..d).collect(),
        }
    }

    fn best_split(&self, lo: usize, hi: usize, parent: Stats, rng: &mut StreamRng) -> Option<Candidate> {
        let min_leaf = self.params.min_samples_leaf.max(1) as f64;
        let mut best: Option<Candidate> = None;
        let consider = |c: Candidate, best: &mut Option<Candidate>| match best {
            Some(b) if !(c.score < b.score - 1e-12 * b.score.abs().max(1.0)) => {}
            _ => *best = Some(c),
        };
        for f in self.candidate_features(rng) {
            let ord = &self.order[f][lo..hi];
            let val = |i: usize| self.x.get(ord[i] as usize, f);
            match self.params.split_mode {
                SplitMode::Exhaustive => {
                    let mut left = Stats::default();
                    for i in 0..ord.len() - 1 {
                        let r = ord[i] as usize;
                        left.add(self.weights[r], self.targets[r]);
                        let (a, b) = (val(i), val(i + 1));
                        if b <= a {
                            continue;
                        }
                        let right = Stats { w: parent.w - left.w, s: parent.s - left.s };
                        if left.w < min_leaf || right.w < min_leaf {
                            continue;
                        }
                        let mut threshold = a + (b - a) / 2.0;
                        if threshold >= b {
                            threshold = a;
                        }
                        consider(Candidate { feature: f, threshold, score: self.child_score(left, right), n_left: i + 1 }, &mut best);
                    }
                }
                SplitMode::RandomThreshold => {
                    let (min, max) = (val(0), val(ord.len() - 1));
                    if max <= min {
                        continue;
                    }
                    let u: f64 = rng.random();
                    let mut threshold = min + u * (max - min);
                    if threshold >= max {
                        threshold = min;
                    }
                    let mut left = Stats::default();
                    let mut n_left = 0;
                    while n_left < ord.len() && val(n_left) <= threshold {
                        let r = ord[n_left] as usize;
                        left.add(self.weights[r], self.targets[r]);
                        n_left += 1;
                    }
                    let right = Stats { w: parent.w - left.w, s: parent.s - left.s };
                    if left.w < min_leaf || right.w < min_leaf {
                        continue;
                    }
                    consider(Candidate { feature: f, threshold, score: self.child_score(left, right), n_left }, &mut best);
                }
            }
        }
        best
    }

    fn partition(&mut self, lo: usize, hi: usize, split: &Candidate) {
        for &r in &self.order[split.feature][lo..hi] {
            self.goes_left[r as usize] = false;
        }
        for &r in &self.order[split.feature][lo..lo + split.n_left] {
            self.goes_left[r as usize] = true;
        }
        for f in 0..self.order.len() {
            if f == split.feature {
                continue;
            }
            self.scratch.clear();
            let slice = &mut self.order[f][lo..hi];
            let mut w = 0;
            for i in 0..slice.len() {
                let r = slice[i];
                if self.goes_left[r as usize] {
                    slice[w] = r;
                    w += 1;
                } else {
                    self.scratch.push(r);
                }
            }
            slice[w..].copy_from_slice(&self.scratch);
        }
    }

    fn grow(
        &mut self,
        lo: usize,
        hi: usize,
        depth: usize,
        rng: &mut StreamRng,
        leaf_value: &mut dyn FnMut(&[u32]) -> f64,
    ) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });
        let parent = self.node_stats(lo, hi);
        let min_leaf = self.params.min_samples_leaf.max(1) as f64;
        let split = if depth >= self.params.max_depth || parent.w < 2.0 * min_leaf || self.is_pure(lo, hi) {
            None
        } else {
            self.best_split(lo, hi, parent, rng)
        };
        match split {
            None => {
                self.nodes[id] = Node::Leaf { value: leaf_value(&self.order[0][lo..hi]) };
            }
            Some(c) => {
                self.partition(lo, hi, &c);
                let gain = (self.parent_score(parent) - c.score).max(0.0);
                let mid = lo + c.n_left;
                let left = self.grow(lo, mid, depth + 1, rng, leaf_value);
                let right = self.grow(mid, hi, depth + 1, rng, leaf_value);
                self.nodes[id] = Node::Split { feature: c.feature, threshold: c.threshold, left, right, gain };
            }
        }
        id
    }
}

/// Weighted class-1 fraction of a leaf.
pub fn class_fraction<'a>(targets: &'a [f64], weights: &'a [f64]) -> impl FnMut(&[u32]) -> f64 + 'a {
    move |rows: &[u32]| {
        let (mut w, mut s) = (0.0, 0.0);
        for &r in rows {
            w += weights[r as usize];
            s += weights[r as usize] * targets[r as usize];
        }
        if w > 0.0 {
            s / w
        } else {
            0.0
        }
    }
}

/// Single classification tree on unit weights.
pub fn train_cart(
    x: &Matrix,
    y: &[bool],
    max_depth: usize,
    min_samples_leaf: usize,
    features_per_split: Option<usize>,
    split_mode: SplitMode,
    rng: &mut StreamRng,
) -> Tree {
    let targets: Vec<f64> = y.iter().map(|&b| b as u8 as f64).collect();
    let weights = vec![1.0; y.len()];
    let presorted = Presorted::new(x);
    let params = TreeParams { max_depth, min_samples_leaf, features_per_split, split_mode, criterion: Criterion::Gini };
    let mut leaf = class_fraction(&targets, &weights);
    let tree = TreeBuilder::new(x, &targets, &weights, &presorted, params).build(rng, &mut leaf);
    tree
}
