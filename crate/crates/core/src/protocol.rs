//! Study protocol: stratified split, stratified folds, randomized search,
//! selection by cross-validated AUROC, out-of-fold Youden threshold and a
//! single held-out evaluation.
//!
//! Held-out rows enter exactly twice: when the refit model scores them and
//! when the metrics are computed. Nothing computed from them feeds back into
//! preprocessing, search, selection or thresholding.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::Cohort;
use crate::error::{Error, Stage, StageExt};
use crate::metrics::{auroc, evaluate, EvalSettings, Evaluation, ScoredSet};
use crate::models::{train, FeatureFraction, Family, ForestParams, GbmParams, Hyperparams, LogRegParams, SvmParams, TrainedModel};
use crate::preprocess::{self, DesignMatrix, FittedPreprocessor, PreprocessSpec};
use crate::rng::{derive_seed, shuffle, stream, tags};
use crate::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("class {class} has {count} members; at least {required} are needed")]
    ClassTooSmall { class: bool, count: usize, required: usize },
    #[error("test fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
    #[error("fold count {0} must be at least 2")]
    InvalidFolds(usize),
    #[error("n_iter must be at least 1")]
    InvalidIterations,
    #[error("no model families enabled")]
    NoFamilies,
    #[error("search space for {family} is invalid: {message}")]
    InvalidSpace { family: Family, message: String },
    #[error("no candidate results to select from")]
    NoCandidates,
    #[error("every sampled configuration of {0} failed to train")]
    AllConfigurationsFailed(Family),
    #[error("split does not match the cohort: {0}")]
    InvalidSplit(String),
}

/// Disjoint, sorted training and test row indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub seed: u64,
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

fn class_rows(labels: &[bool], rows: impl IntoIterator<Item = usize>, class: bool) -> Vec<usize> {
    rows.into_iter().filter(|&r| labels[r] == class).collect()
}

/// Per class: shuffle, then send `round(count * test_fraction)` rows to test.
/// If the per-class roundings miss `round(n * test_fraction)`, the larger
/// class absorbs the difference.
pub fn stratified_split(labels: &[bool], test_fraction: f64, seed: u64) -> Result<SplitAssignment, ProtocolError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(ProtocolError::InvalidFraction(test_fraction));
    }
    let by_class = [false, true].map(|c| class_rows(labels, 0..labels.len(), c));
    for (c, rows) in [false, true].into_iter().zip(&by_class) {
        if rows.len() < 2 {
            return Err(ProtocolError::ClassTooSmall { class: c, count: rows.len(), required: 2 });
        }
    }
    let mut take = by_class.clone().map(|rows| round_half_up(rows.len() as f64 * test_fraction));
    let target = round_half_up(labels.len() as f64 * test_fraction);
    let major = if by_class[1].len() > by_class[0].len() { 1 } else { 0 };
    let total: usize = take.iter().sum();
    if total != target {
        take[major] = (take[major] + target).saturating_sub(total).min(by_class[major].len() - 1);
    }
    let mut test_rows = Vec::new();
    for (c, mut rows) in by_class.into_iter().enumerate() {
        shuffle(&mut stream(seed, &[tags::SPLIT, c as u64]), &mut rows);
        test_rows.extend_from_slice(&rows[..take[c]]);
    }
    test_rows.sort_unstable();
    let train_rows = (0..labels.len()).filter(|r| test_rows.binary_search(r).is_err()).collect();
    Ok(SplitAssignment { train_rows, test_rows, seed })
}

/// Fold index sets over training rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
}

impl FoldPlan {
    /// Training rows of fold `j`: every row outside it.
    pub fn fit_rows(&self, j: usize) -> Vec<usize> {
        let mut rows: Vec<usize> = self.folds.iter().enumerate().filter(|(i, _)| *i != j).flat_map(|(_, f)| f.iter().copied()).collect();
        rows.sort_unstable();
        rows
    }

    pub fn k(&self) -> usize {
        self.folds.len()
    }
}

/// Per class: shuffle, then deal rows to folds round-robin. Negatives continue
/// the deal where positives stopped, so fold sizes differ by at most one.
pub fn stratified_kfold(labels: &[bool], rows: &[usize], k: usize, seed: u64) -> Result<FoldPlan, ProtocolError> {
    if k < 2 {
        return Err(ProtocolError::InvalidFolds(k));
    }
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class in [true, false] {
        let mut members = class_rows(labels, rows.iter().copied(), class);
        if members.len() < k {
            return Err(ProtocolError::ClassTooSmall { class, count: members.len(), required: k });
        }
        shuffle(&mut stream(seed, &[tags::FOLDS, class as u64]), &mut members);
        for r in members {
            folds[next].push(r);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldPlan { folds, seed })
}

fn log_uniform(rng: &mut impl Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        return lo;
    }
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

fn uniform(rng: &mut impl Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        return lo;
    }
    lo + rng.random::<f64>() * (hi - lo)
}

fn int_range(rng: &mut impl Rng, [lo, hi]: [usize; 2]) -> usize {
    rng.random_range(lo..=hi)
}

fn check_range<T: PartialOrd + Copy + std::fmt::Debug>(family: Family, name: &str, r: [T; 2], positive: T) -> Result<(), ProtocolError> {
    if r[0] > r[1] || r[0] < positive {
        return Err(ProtocolError::InvalidSpace { family, message: format!("{name} range {r:?} is empty or out of bounds") });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegSpace {
    /// Log-uniform.
    pub l2_lambda: [f64; 2],
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogRegSpace {
    fn default() -> Self {
        Self { l2_lambda: [1e-4, 10.0], max_iter: 1000, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmSpace {
    /// Log-uniform.
    pub c: [f64; 2],
    /// Log-uniform.
    pub gamma: [f64; 2],
    pub tol: f64,
}

impl Default for SvmSpace {
    fn default() -> Self {
        Self { c: [0.1, 100.0], gamma: [1e-3, 1.0], tol: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSpace {
    pub n_trees: [usize; 2],
    pub max_depth: [usize; 2],
    pub min_samples_leaf: [usize; 2],
    pub features_per_split: Vec<FeatureFraction>,
}

impl Default for ForestSpace {
    fn default() -> Self {
        Self {
            n_trees: [100, 400],
            max_depth: [3, 12],
            min_samples_leaf: [1, 1],
            features_per_split: vec![FeatureFraction::Sqrt, FeatureFraction::Third, FeatureFraction::All],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbmSpace {
    pub n_stages: [usize; 2],
    /// Log-uniform.
    pub learning_rate: [f64; 2],
    pub max_depth: [usize; 2],
    pub min_samples_leaf: [usize; 2],
    /// Uniform.
    pub subsample: [f64; 2],
}

impl Default for GbmSpace {
    fn default() -> Self {
        Self {
            n_stages: [50, 400],
            learning_rate: [0.01, 0.3],
            max_depth: [2, 5],
            min_samples_leaf: [1, 1],
            subsample: [0.6, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpaces {
    pub logreg: LogRegSpace,
    pub svm_rbf: SvmSpace,
    pub random_forest: ForestSpace,
    pub extra_trees: ForestSpace,
    pub gradient_boosting: GbmSpace,
}

impl SearchSpaces {
    pub fn validate(&self, family: Family) -> Result<(), ProtocolError> {
        let bad = |message: &str| Err(ProtocolError::InvalidSpace { family, message: message.to_string() });
        match family {
            Family::Logreg => {
                let s = &self.logreg;
                check_range(family, "l2_lambda", s.l2_lambda, f64::MIN_POSITIVE)?;
                if s.max_iter == 0 || !(s.tol > 0.0) {
                    return bad("max_iter and tol must be positive");
                }
            }
            Family::SvmRbf => {
                let s = &self.svm_rbf;
                check_range(family, "c", s.c, f64::MIN_POSITIVE)?;
                check_range(family, "gamma", s.gamma, f64::MIN_POSITIVE)?;
                if !(s.tol > 0.0) {
                    return bad("tol must be positive");
                }
            }
            Family::RandomForest | Family::ExtraTrees => {
                let s = if family == Family::RandomForest { &self.random_forest } else { &self.extra_trees };
                check_range(family, "n_trees", s.n_trees, 1)?;
                check_range(family, "max_depth", s.max_depth, 1)?;
                check_range(family, "min_samples_leaf", s.min_samples_leaf, 1)?;
                if s.features_per_split.is_empty() {
                    return bad("features_per_split has no choices");
                }
            }
            Family::GradientBoosting => {
                let s = &self.gradient_boosting;
                check_range(family, "n_stages", s.n_stages, 0)?;
                check_range(family, "learning_rate", s.learning_rate, f64::MIN_POSITIVE)?;
                check_range(family, "max_depth", s.max_depth, 1)?;
                check_range(family, "min_samples_leaf", s.min_samples_leaf, 1)?;
                check_range(family, "subsample", s.subsample, f64::MIN_POSITIVE)?;
                if s.subsample[1] > 1.0 {
                    return bad("subsample must not exceed 1");
                }
            }
        }
        Ok(())
    }

    /// Draws one configuration.
    pub fn sample(&self, family: Family, rng: &mut impl Rng) -> Hyperparams {
        fn forest(s: &ForestSpace, rng: &mut impl Rng) -> ForestParams {
            ForestParams {
                n_trees: int_range(rng, s.n_trees),
                max_depth: int_range(rng, s.max_depth),
                min_samples_leaf: int_range(rng, s.min_samples_leaf),
                features_per_split: s.features_per_split[rng.random_range(0..s.features_per_split.len())],
            }
        }
        match family {
            Family::Logreg => Hyperparams::Logreg(LogRegParams {
                l2_lambda: log_uniform(rng, self.logreg.l2_lambda),
                max_iter: self.logreg.max_iter,
                tol: self.logreg.tol,
            }),
            Family::SvmRbf => Hyperparams::SvmRbf(SvmParams {
                c: log_uniform(rng, self.svm_rbf.c),
                gamma: log_uniform(rng, self.svm_rbf.gamma),
                tol: self.svm_rbf.tol,
            }),
            Family::RandomForest => Hyperparams::RandomForest(forest(&self.random_forest, rng)),
            Family::ExtraTrees => Hyperparams::ExtraTrees(forest(&self.extra_trees, rng)),
            Family::GradientBoosting => {
                let s = &self.gradient_boosting;
                Hyperparams::GradientBoosting(GbmParams {
                    n_stages: int_range(rng, s.n_stages),
                    learning_rate: log_uniform(rng, s.learning_rate),
                    max_depth: int_range(rng, s.max_depth),
                    min_samples_leaf: int_range(rng, s.min_samples_leaf),
                    subsample: uniform(rng, s.subsample),
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSettings {
    pub seed: u64,
    pub test_fraction: f64,
    pub folds: usize,
    pub n_iter: usize,
    pub families: Vec<Family>,
    pub spaces: SearchSpaces,
}

impl Default for ProtocolSettings {
    fn default() -> Self {
        Self { seed: 0, test_fraction: 0.2, folds: 5, n_iter: 25, families: Family::ALL.to_vec(), spaces: SearchSpaces::default() }
    }
}

impl ProtocolSettings {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(ProtocolError::InvalidFraction(self.test_fraction));
        }
        if self.folds < 2 {
            return Err(ProtocolError::InvalidFolds(self.folds));
        }
        if self.n_iter == 0 {
            return Err(ProtocolError::InvalidIterations);
        }
        if self.families.is_empty() {
            return Err(ProtocolError::NoFamilies);
        }
        for &f in &self.families {
            self.spaces.validate(f)?;
        }
        Ok(())
    }

    /// Enabled families, deduplicated, in the fixed family order.
    pub fn ordered_families(&self) -> Vec<Family> {
        let mut f = self.families.clone();
        f.sort();
        f.dedup();
        f
    }
}

/// Fold-local design matrices: preprocessor fitted on the fold's training
/// rows, applied to those rows and to the held-out fold.
pub struct FoldData {
    pub fit_rows: Vec<usize>,
    pub held_rows: Vec<usize>,
    pub train: DesignMatrix,
    pub held: DesignMatrix,
}

pub fn prepare_folds(cohort: &Cohort, plan: &FoldPlan, spec: &PreprocessSpec) -> Result<Vec<FoldData>, Error> {
    (0..plan.k())
        .into_par_iter()
        .map(|j| {
            let fit_rows = plan.fit_rows(j);
            let held_rows = plan.folds[j].clone();
            let pre = preprocess::fit(cohort, spec, &fit_rows)?;
            Ok(FoldData { train: pre.transform(cohort, &fit_rows)?, held: pre.transform(cohort, &held_rows)?, fit_rows, held_rows })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigScore {
    pub iteration: usize,
    pub hyperparams: Hyperparams,
    pub fold_aurocs: Vec<f64>,
    pub mean_auroc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub family: Family,
    pub best_iteration: usize,
    pub best: Hyperparams,
    pub fold_aurocs: Vec<f64>,
    pub mean_auroc: f64,
    /// Out-of-fold probability per training row, aligned with `train_rows`.
    pub oof: Vec<f64>,
    /// Fold whose held-out model produced each `oof` entry.
    pub oof_fold: Vec<usize>,
    pub evaluated: Vec<ConfigScore>,
}

fn labels_of(cohort: &Cohort, rows: &[usize]) -> Vec<bool> {
    rows.iter().map(|&r| cohort.labels()[r]).collect()
}

/// Seed of the model trained for `(family, iteration, fold)` during search.
pub fn search_model_seed(seed: u64, family: Family, iteration: usize, fold: usize) -> u64 {
    derive_seed(seed, &[tags::SEARCH, family as u64, iteration as u64, fold as u64])
}

fn fit_and_score(data: &FoldData, y: &[bool], held_y: &[bool], hp: &Hyperparams, seed: u64) -> Result<(f64, Vec<f64>), String> {
    let model = train(&data.train.x, y, hp, seed).map_err(|e| e.to_string())?;
    let probs = model.predict_proba(&data.held.x).map_err(|e| e.to_string())?;
    let set = ScoredSet::new(probs.clone(), held_y.to_vec()).map_err(|e| e.to_string())?;
    let a = auroc(&set).map_err(|e| e.to_string())?;
    Ok((a, probs))
}

/// Randomized search for one family over prepared folds.
///
/// Configurations are drawn in order from the family's search stream. A
/// configuration failing in any fold scores 0 and keeps its error message.
/// The best mean AUROC wins, ties going to the earlier draw; its fold
/// predictions form the out-of-fold vector.
pub fn random_search(
    family: Family,
    spaces: &SearchSpaces,
    n_iter: usize,
    cohort: &Cohort,
    train_rows: &[usize],
    folds: &[FoldData],
    seed: u64,
) -> Result<CandidateResult, ProtocolError> {
    spaces.validate(family)?;
    if n_iter == 0 {
        return Err(ProtocolError::InvalidIterations);
    }
    let mut rng = stream(seed, &[tags::SEARCH, family as u64]);
    let configs: Vec<Hyperparams> = (0..n_iter).map(|_| spaces.sample(family, &mut rng)).collect();
    let k = folds.len();
    let fold_labels: Vec<(Vec<bool>, Vec<bool>)> =
        folds.iter().map(|f| (labels_of(cohort, &f.fit_rows), labels_of(cohort, &f.held_rows))).collect();
    let tasks: Vec<(usize, usize)> = (0..n_iter).flat_map(|i| (0..k).map(move |j| (i, j))).collect();
    let results: Vec<Result<(f64, Vec<f64>), String>> = tasks
        .par_iter()
        .map(|&(i, j)| fit_and_score(&folds[j], &fold_labels[j].0, &fold_labels[j].1, &configs[i], search_model_seed(seed, family, i, j)))
        .collect();

    let mut evaluated: Vec<ConfigScore> = Vec::with_capacity(n_iter);
    let mut best: Option<usize> = None;
    for (i, hp) in configs.into_iter().enumerate() {
        let chunk = &results[i * k..(i + 1) * k];
        let error = chunk.iter().find_map(|r| r.as_ref().err().cloned());
        let (fold_aurocs, mean_auroc) = match error {
            Some(_) => (Vec::new(), 0.0),
            None => {
                let a: Vec<f64> = chunk.iter().map(|r| r.as_ref().unwrap().0).collect();
                let m = a.iter().sum::<f64>() / k as f64;
                (a, m)
            }
        };
        if error.is_none() && best.is_none_or(|b: usize| mean_auroc > evaluated[b].mean_auroc) {
            best = Some(i);
        }
        evaluated.push(ConfigScore { iteration: i, hyperparams: hp, fold_aurocs, mean_auroc, error });
    }
    let b = best.ok_or(ProtocolError::AllConfigurationsFailed(family))?;

    let mut oof = vec![f64::NAN; train_rows.len()];
    let mut oof_fold = vec![usize::MAX; train_rows.len()];
    for (j, fold) in folds.iter().enumerate() {
        let probs = &results[b * k + j].as_ref().unwrap().1;
        for (&row, &p) in fold.held_rows.iter().zip(probs) {
            let pos = train_rows.binary_search(&row).expect("fold rows are training rows");
            oof[pos] = p;
            oof_fold[pos] = j;
        }
    }
    let best_score = &evaluated[b];
    Ok(CandidateResult {
        family,
        best_iteration: b,
        best: best_score.hyperparams.clone(),
        fold_aurocs: best_score.fold_aurocs.clone(),
        mean_auroc: best_score.mean_auroc,
        oof,
        oof_fold,
        evaluated,
    })
}

/// Highest mean CV AUROC; exact ties go to the earlier family in the fixed order.
pub fn select_model(candidates: &[CandidateResult]) -> Result<Family, ProtocolError> {
    candidates
        .iter()
        .min_by(|a, b| b.mean_auroc.total_cmp(&a.mean_auroc).then(a.family.cmp(&b.family)))
        .map(|c| c.family)
        .ok_or(ProtocolError::NoCandidates)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub threshold: f64,
    pub youden_j: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

/// Threshold maximizing sensitivity + specificity - 1 over the unique
/// probabilities, calling `p >= t` positive; ties go to the smallest `t`.
pub fn youden_threshold(probs: &[f64], labels: &[bool]) -> Result<ThresholdReport, ProtocolError> {
    let pos = labels.iter().filter(|&&y| y).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(ProtocolError::ClassTooSmall { class: pos == 0, count: 0, required: 1 });
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]));
    // Ascending sweep: rows strictly below the current threshold are negative calls.
    let (mut fn_, mut tn) = (0usize, 0usize);
    let mut best: Option<(i128, f64, usize, usize)> = None;
    let mut i = 0;
    while i < order.len() {
        let t = probs[order[i]];
        let tp = pos - fn_;
        // J * pos * neg, exact in integers.
        let score = tp as i128 * neg as i128 + tn as i128 * pos as i128 - (pos * neg) as i128;
        if best.is_none_or(|b| score > b.0) {
            best = Some((score, t, tp, tn));
        }
        while i < order.len() && probs[order[i]] == t {
            if labels[order[i]] {
                fn_ += 1;
            } else {
                tn += 1;
            }
            i += 1;
        }
    }
    let (_, threshold, tp, tn) = best.expect("nonempty input");
    let sensitivity = tp as f64 / pos as f64;
    let specificity = tn as f64 / neg as f64;
    Ok(ThresholdReport { threshold, youden_j: sensitivity + specificity - 1.0, sensitivity, specificity })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySettings {
    pub protocol: ProtocolSettings,
    pub preprocess: PreprocessSpec,
    pub eval: EvalSettings,
}

/// Held-out evaluation of one candidate refit on the full training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateTest {
    pub family: Family,
    pub hyperparams: Hyperparams,
    pub cv_auroc: f64,
    pub threshold: ThresholdReport,
    pub evaluation: Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub split: SplitAssignment,
    pub folds: FoldPlan,
    pub candidates: Vec<CandidateResult>,
    pub selected: Family,
    pub preprocessor: FittedPreprocessor,
    pub model: TrainedModel,
    pub threshold: ThresholdReport,
    pub test_probs: Vec<f64>,
    pub evaluation: Evaluation,
    pub candidate_tests: Vec<CandidateTest>,
    pub warnings: Vec<String>,
}

impl StudyResult {
    pub fn candidate(&self, family: Family) -> Option<&CandidateResult> {
        self.candidates.iter().find(|c| c.family == family)
    }
}

/// Seed of the full-training refit for a family.
pub fn refit_seed(seed: u64, family: Family) -> u64 {
    derive_seed(seed, &[tags::REFIT, family as u64])
}

fn check_split(cohort: &Cohort, split: &SplitAssignment) -> Result<(), ProtocolError> {
    let n = cohort.n();
    let mut seen = vec![false; n];
    for &r in split.train_rows.iter().chain(&split.test_rows) {
        if r >= n || seen[r] {
            return Err(ProtocolError::InvalidSplit(format!("row {r} is out of range or assigned twice")));
        }
        seen[r] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(ProtocolError::InvalidSplit("some rows are in neither partition".into()));
    }
    if !split.train_rows.is_sorted() || !split.test_rows.is_sorted() {
        return Err(ProtocolError::InvalidSplit("row indices must be sorted".into()));
    }
    Ok(())
}

/// Runs the whole protocol, drawing the split from the configured seed.
pub fn run_study(cohort: &Cohort, settings: &StudySettings) -> Result<StudyResult, Error> {
    let p = &settings.protocol;
    p.validate().stage(Stage::Split)?;
    let split = stratified_split(cohort.labels(), p.test_fraction, p.seed).stage(Stage::Split)?;
    run_study_with_split(cohort, settings, split)
}

/// Runs the protocol on a fixed split.
pub fn run_study_with_split(cohort: &Cohort, settings: &StudySettings, split: SplitAssignment) -> Result<StudyResult, Error> {
    let p = &settings.protocol;
    p.validate().stage(Stage::Split)?;
    check_split(cohort, &split).stage(Stage::Split)?;
    let seed = p.seed;
    let train_rows = &split.train_rows;
    let folds = stratified_kfold(cohort.labels(), train_rows, p.folds, seed).stage(Stage::Split)?;
    let fold_data = prepare_folds(cohort, &folds, &settings.preprocess).stage(Stage::Search)?;

    let families = p.ordered_families();
    let candidates: Vec<CandidateResult> = families
        .iter()
        .map(|&f| random_search(f, &p.spaces, p.n_iter, cohort, train_rows, &fold_data, seed))
        .collect::<Result<_, _>>()
        .stage(Stage::Search)?;
    drop(fold_data);
    let selected = select_model(&candidates).stage(Stage::Selection)?;

    let train_y = labels_of(cohort, train_rows);
    let pre = preprocess::fit(cohort, &settings.preprocess, train_rows).stage(Stage::Refit)?;
    let x_train = pre.transform(cohort, train_rows).stage(Stage::Refit)?;

    // Every candidate is refit so the held-out comparison table exists; only
    // the selected one is reported as the study model.
    let refits: Vec<TrainedModel> = candidates
        .par_iter()
        .map(|c| train(&x_train.x, &train_y, &c.best, refit_seed(seed, c.family)))
        .collect::<Result<_, _>>()
        .stage(Stage::Refit)?;
    let thresholds: Vec<ThresholdReport> =
        candidates.iter().map(|c| youden_threshold(&c.oof, &train_y)).collect::<Result<_, _>>().stage(Stage::Threshold)?;

    let sel = candidates.iter().position(|c| c.family == selected).expect("selected family is a candidate");
    let model = refits[sel].clone();
    let threshold = thresholds[sel];

    let mut warnings = Vec::new();
    for (c, m) in candidates.iter().zip(&refits) {
        let failed = c.evaluated.iter().filter(|e| e.error.is_some()).count();
        if failed > 0 {
            warnings.push(format!("{}: {failed} of {} configurations failed to train", c.family, c.evaluated.len()));
        }
        if !m.converged() {
            warnings.push(format!("{}: refit solver stopped at its iteration cap", c.family));
        }
    }

    // Held-out rows are touched only from here on.
    let x_test = pre.transform(cohort, &split.test_rows).stage(Stage::Evaluation)?;
    let test_y = labels_of(cohort, &split.test_rows);
    let eval_for = |m: &TrainedModel, t: f64| -> Result<(Vec<f64>, Evaluation), Error> {
        let probs = m.predict_proba(&x_test.x)?;
        let set = ScoredSet::new(probs.clone(), test_y.clone())?;
        Ok((probs, evaluate(&set, t, &settings.eval)?))
    };
    let evaluated: Vec<(Vec<f64>, Evaluation)> = refits
        .par_iter()
        .zip(&thresholds)
        .map(|(m, t)| eval_for(m, t.threshold))
        .collect::<Result<_, _>>()
        .stage(Stage::Evaluation)?;
    let candidate_tests: Vec<CandidateTest> = candidates
        .iter()
        .zip(&thresholds)
        .zip(&evaluated)
        .map(|((c, t), (_, e))| CandidateTest {
            family: c.family,
            hyperparams: c.best.clone(),
            cv_auroc: c.mean_auroc,
            threshold: *t,
            evaluation: e.clone(),
        })
        .collect();
    let (test_probs, evaluation) = evaluated[sel].clone();

    Ok(StudyResult {
        split,
        folds,
        candidates,
        selected,
        preprocessor: pre,
        model,
        threshold,
        test_probs,
        evaluation,
        candidate_tests,
        warnings,
    })
}

/// Held-out probabilities of a stored model on the recorded test rows.
pub fn score_rows(cohort: &Cohort, pre: &FittedPreprocessor, model: &TrainedModel, rows: &[usize]) -> Result<Vec<f64>, Error> {
    let x = pre.transform(cohort, rows)?;
    Ok(model.predict_proba(&x.x)?)
}

/// Design matrix helper for callers holding only a preprocessor.
pub fn design(cohort: &Cohort, pre: &FittedPreprocessor, rows: &[usize]) -> Result<Matrix, Error> {
    Ok(pre.transform(cohort, rows)?.x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(pos: usize, n: usize) -> Vec<bool> {
        (0..n).map(|i| i < pos).collect()
    }

    #[test]
    fn split_reproduces_cohort_arithmetic() {
        let y = labels(142, 300);
        let s = stratified_split(&y, 0.2, 7).unwrap();
        assert_eq!((s.train_rows.len(), s.test_rows.len()), (240, 60));
        assert_eq!(s.train_rows.iter().filter(|&&r| y[r]).count(), 114);
        assert_eq!(s.test_rows.iter().filter(|&&r| y[r]).count(), 28);
        assert_eq!(s, stratified_split(&y, 0.2, 7).unwrap());
        assert_ne!(s, stratified_split(&y, 0.2, 8).unwrap());
    }

    #[test]
    fn small_split() {
        let y = labels(5, 10);
        let s = stratified_split(&y, 0.2, 1).unwrap();
        assert_eq!((s.train_rows.len(), s.test_rows.len()), (8, 2));
        assert_eq!(s.test_rows.iter().filter(|&&r| y[r]).count(), 1);
        assert_eq!(stratified_split(&labels(1, 10), 0.2, 1), Err(ProtocolError::ClassTooSmall { class: true, count: 1, required: 2 }));
    }

    #[test]
    fn folds_balance_classes() {
        let y = labels(10, 20);
        let rows: Vec<usize> = (0..20).collect();
        let plan = stratified_kfold(&y, &rows, 5, 3).unwrap();
        for f in &plan.folds {
            assert_eq!(f.iter().filter(|&&r| y[r]).count(), 2);
            assert_eq!(f.len(), 4);
        }
        let y = labels(11, 24);
        let rows: Vec<usize> = (0..24).collect();
        let plan = stratified_kfold(&y, &rows, 5, 3).unwrap();
        let counts: Vec<usize> = plan.folds.iter().map(|f| f.iter().filter(|&&r| y[r]).count()).collect();
        assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        let mut all: Vec<usize> = plan.folds.concat();
        all.sort_unstable();
        assert_eq!(all, rows);
        let sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn youden_examples() {
        let r = youden_threshold(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap();
        assert_eq!((r.threshold, r.youden_j), (0.35, 0.5));
        let r = youden_threshold(&[0.1, 0.2, 0.7, 0.9], &[false, false, true, true]).unwrap();
        assert_eq!((r.threshold, r.youden_j), (0.7, 1.0));
        let r = youden_threshold(&[0.3; 4], &[false, true, false, true]).unwrap();
        assert_eq!((r.threshold, r.youden_j, r.sensitivity, r.specificity), (0.3, 0.0, 1.0, 0.0));
    }

    fn candidate(family: Family, mean: f64) -> CandidateResult {
        CandidateResult {
            family,
            best_iteration: 0,
            best: SearchSpaces::default().sample(family, &mut stream(0, &[])),
            fold_aurocs: vec![mean],
            mean_auroc: mean,
            oof: vec![],
            oof_fold: vec![],
            evaluated: vec![],
        }
    }

    #[test]
    fn selection_argmax_and_ties() {
        let c = [candidate(Family::Logreg, 0.80), candidate(Family::SvmRbf, 0.85), candidate(Family::RandomForest, 0.83)];
        assert_eq!(select_model(&c).unwrap(), Family::SvmRbf);
        let tie = [candidate(Family::GradientBoosting, 0.9), candidate(Family::ExtraTrees, 0.9)];
        assert_eq!(select_model(&tie).unwrap(), Family::ExtraTrees);
        assert_eq!(select_model(&[]), Err(ProtocolError::NoCandidates));
        let mut more = c.to_vec();
        more.push(candidate(Family::GradientBoosting, 0.86));
        assert_eq!(select_model(&more).unwrap(), Family::GradientBoosting);
    }

    #[test]
    fn sampled_configs_respect_bounds() {
        let spaces = SearchSpaces::default();
        let mut rng = stream(5, &[]);
        for _ in 0..200 {
            for f in Family::ALL {
                let hp = spaces.sample(f, &mut rng);
                hp.validate().unwrap();
                match hp {
                    Hyperparams::Logreg(p) => assert!((1e-4..=10.0).contains(&p.l2_lambda)),
                    Hyperparams::SvmRbf(p) => assert!((0.1..=100.0).contains(&p.c) && (1e-3..=1.0).contains(&p.gamma)),
                    Hyperparams::RandomForest(p) | Hyperparams::ExtraTrees(p) => {
                        assert!((100..=400).contains(&p.n_trees) && (3..=12).contains(&p.max_depth))
                    }
                    Hyperparams::GradientBoosting(p) => {
                        assert!((50..=400).contains(&p.n_stages) && (0.01..=0.3).contains(&p.learning_rate));
                        assert!((2..=5).contains(&p.max_depth) && (0.6..=1.0).contains(&p.subsample));
                    }
                }
            }
        }
    }

    #[test]
    fn invalid_space_rejected() {
        let mut s = SearchSpaces::default();
        s.svm_rbf.c = [10.0, 1.0];
        assert!(matches!(s.validate(Family::SvmRbf), Err(ProtocolError::InvalidSpace { .. })));
        s.random_forest.features_per_split.clear();
        assert!(s.validate(Family::RandomForest).is_err());
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn split_partitions_and_stratifies(pos in 2usize..60, neg in 2usize..60, f in 0.1f64..0.5, seed in any::<u64>()) {
            let y: Vec<bool> = (0..pos + neg).map(|i| i < pos).collect();
            let n = y.len();
            let Ok(s) = stratified_split(&y, f, seed) else { return Ok(()) };
            let mut all: Vec<usize> = s.train_rows.iter().chain(&s.test_rows).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(s.test_rows.len(), (n as f64 * f + 0.5).floor() as usize);
            let p = y.iter().filter(|&&v| v).count();
            let test_pos = s.test_rows.iter().filter(|&&r| y[r]).count() as f64;
            prop_assert!((test_pos - p as f64 * f).abs() <= 1.5);
        }

        #[test]
        fn folds_partition_and_balance(n in 10usize..80, k in 2usize..6, seed in any::<u64>()) {
            let y: Vec<bool> = (0..n).map(|i| i % 3 == 0).collect();
            let rows: Vec<usize> = (0..n).collect();
            let Ok(plan) = stratified_kfold(&y, &rows, k, seed) else { return Ok(()) };
            let mut all: Vec<usize> = plan.folds.concat();
            all.sort_unstable();
            prop_assert_eq!(all, rows);
            let sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
            let cases: Vec<usize> = plan.folds.iter().map(|f| f.iter().filter(|&&r| y[r]).count()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            prop_assert!(cases.iter().max().unwrap() - cases.iter().min().unwrap() <= 1);
        }

        #[test]
        fn youden_is_maximal(data in proptest::collection::vec((0u8..20, any::<bool>()), 2..60)) {
            let probs: Vec<f64> = data.iter().map(|d| d.0 as f64 / 20.0).collect();
            let y: Vec<bool> = data.iter().map(|d| d.1).collect();
            let Ok(t) = youden_threshold(&probs, &y) else { return Ok(()) };
            prop_assert!(probs.contains(&t.threshold));
            let j = |thr: f64| {
                let pos = y.iter().filter(|&&v| v).count() as f64;
                let tp = (0..y.len()).filter(|&i| y[i] && probs[i] >= thr).count() as f64;
                let tn = (0..y.len()).filter(|&i| !y[i] && probs[i] < thr).count() as f64;
                tp / pos + tn / (y.len() as f64 - pos) - 1.0
            };
            for &p in &probs {
                prop_assert!(j(p) <= j(t.threshold) + 1e-12);
            }
        }
    }
}
