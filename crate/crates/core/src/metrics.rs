//! Discrimination, calibration and clinical-utility metrics.
//!
//! Every threshold rule in this module calls a row positive when `p >= t`.
//! Ratios whose denominator is zero are reported as `None` rather than 0.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use rand::Rng;

use crate::rng::{stream, tags};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("{probs} probabilities but {labels} labels")]
    LengthMismatch { probs: usize, labels: usize },
    #[error("probability {value} at row {index} is outside [0, 1]")]
    InvalidProbability { index: usize, value: f64 },
    #[error("metric requires both classes")]
    SingleClass,
    #[error("metric requires at least one positive")]
    NoPositives,
    #[error("calibration needs at least one bin")]
    InvalidBins,
    #[error("decision-curve threshold {0} is outside (0, 1)")]
    InvalidGrid(f64),
    #[error("bootstrap needs at least 2 resamples and a level in (0, 1)")]
    InvalidBootstrap,
    #[error("metric is undefined on the full sample")]
    UndefinedEstimate,
    #[error("all {0} bootstrap resamples were degenerate")]
    AllResamplesDegenerate(usize),
}

/// Predicted probabilities paired with binary outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSet {
    probs: Vec<f64>,
    labels: Vec<bool>,
}

impl ScoredSet {
    pub fn new(probs: Vec<f64>, labels: Vec<bool>) -> Result<Self, MetricError> {
        if probs.len() != labels.len() {
            return Err(MetricError::LengthMismatch { probs: probs.len(), labels: labels.len() });
        }
        if let Some((index, &value)) = probs.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
            return Err(MetricError::InvalidProbability { index, value });
        }
        Ok(Self { probs, labels })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y).count()
    }

    pub fn negatives(&self) -> usize {
        self.len() - self.positives()
    }

    pub fn prevalence(&self) -> Option<f64> {
        (!self.is_empty()).then(|| self.positives() as f64 / self.len() as f64)
    }

    /// Rows drawn by index, duplicates allowed.
    pub fn resample(&self, rows: &[usize]) -> ScoredSet {
        ScoredSet {
            probs: rows.iter().map(|&r| self.probs[r]).collect(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
        }
    }

    /// Cumulative (threshold, TP, FP) after each tie block, highest score first.
    fn descending_blocks(&self) -> Vec<(f64, u64, u64)> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.probs[b].total_cmp(&self.probs[a]));
        let mut out = Vec::new();
        let (mut tp, mut fp) = (0u64, 0u64);
        let mut i = 0;
        while i < order.len() {
            let t = self.probs[order[i]];
            while i < order.len() && self.probs[order[i]] == t {
                if self.labels[order[i]] {
                    tp += 1;
                } else {
                    fp += 1;
                }
                i += 1;
            }
            out.push((t, tp, fp));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Threshold reaching this point; infinite for the origin (JSON `null`).
    #[serde(deserialize_with = "null_as_infinity")]
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

fn null_as_infinity<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

pub fn roc_curve(s: &ScoredSet) -> Result<Vec<RocPoint>, MetricError> {
    let (p, n) = (s.positives(), s.negatives());
    if p == 0 || n == 0 {
        return Err(MetricError::SingleClass);
    }
    let mut pts = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    for (t, tp, fp) in s.descending_blocks() {
        pts.push(RocPoint { threshold: t, fpr: fp as f64 / n as f64, tpr: tp as f64 / p as f64 });
    }
    Ok(pts)
}

/// Trapezoidal area under the ROC staircase, accumulated in integer counts so
/// that it equals the concordant-pair fraction (ties counted half) exactly.
pub fn auroc(s: &ScoredSet) -> Result<f64, MetricError> {
    let (p, n) = (s.positives() as u64, s.negatives() as u64);
    if p == 0 || n == 0 {
        return Err(MetricError::SingleClass);
    }
    let (mut prev_tp, mut prev_fp) = (0u64, 0u64);
    let mut twice_area: u128 = 0;
    for (_, tp, fp) in s.descending_blocks() {
        twice_area += u128::from(fp - prev_fp) * u128::from(tp + prev_tp);
        prev_tp = tp;
        prev_fp = fp;
    }
    Ok(twice_area as f64 / (2.0 * p as f64 * n as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

pub fn pr_curve(s: &ScoredSet) -> Result<Vec<PrPoint>, MetricError> {
    let p = s.positives();
    if p == 0 {
        return Err(MetricError::NoPositives);
    }
    Ok(s.descending_blocks()
        .into_iter()
        .map(|(t, tp, fp)| PrPoint { threshold: t, recall: tp as f64 / p as f64, precision: tp as f64 / (tp + fp) as f64 })
        .collect())
}

/// Average precision: recall increments weighted by the precision of each
/// tie block.
pub fn auprc(s: &ScoredSet) -> Result<f64, MetricError> {
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    for pt in pr_curve(s)? {
        area += (pt.recall - prev_recall) * pt.precision;
        prev_recall = pt.recall;
    }
    Ok(area)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn sensitivity(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fp)
    }

    pub fn ppv(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn npv(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fn_)
    }

    pub fn f1(&self) -> Option<f64> {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    /// Rows normalized by true class: `[[TN, FP], [FN, TP]]` as fractions.
    pub fn row_normalized(&self) -> [[Option<f64>; 2]; 2] {
        let neg = self.tn + self.fp;
        let pos = self.tp + self.fn_;
        [[ratio(self.tn, neg), ratio(self.fp, neg)], [ratio(self.fn_, pos), ratio(self.tp, pos)]]
    }
}

pub fn confusion_at(s: &ScoredSet, threshold: f64) -> ConfusionCounts {
    let mut c = ConfusionCounts { tp: 0, fp: 0, fn_: 0, tn: 0 };
    for (&p, &y) in s.probs.iter().zip(&s.labels) {
        match (p >= threshold, y) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    c
}

pub fn brier(s: &ScoredSet) -> Option<f64> {
    if s.is_empty() {
        return None;
    }
    let sum: f64 = s.probs.iter().zip(&s.labels).map(|(&p, &y)| (p - y as u8 as f64).powi(2)).sum();
    Some(sum / s.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub mean_prob: Option<f64>,
    pub event_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub bins: Vec<CalibrationBin>,
    pub ece: f64,
}

/// Equal-width bins `[i/b, (i+1)/b)`, the last one closed at 1.
pub fn calibration(s: &ScoredSet, bins: usize) -> Result<Calibration, MetricError> {
    if bins == 0 {
        return Err(MetricError::InvalidBins);
    }
    let mut sum_p = vec![0.0; bins];
    let mut sum_y = vec![0usize; bins];
    let mut count = vec![0usize; bins];
    for (&p, &y) in s.probs.iter().zip(&s.labels) {
        let b = ((p * bins as f64).floor() as usize).min(bins - 1);
        sum_p[b] += p;
        sum_y[b] += y as usize;
        count[b] += 1;
    }
    let n = s.len();
    let mut ece = 0.0;
    let bins_out = (0..bins)
        .map(|b| {
            let mean_prob = (count[b] > 0).then(|| sum_p[b] / count[b] as f64);
            let event_rate = ratio(sum_y[b], count[b]);
            if let (Some(m), Some(r)) = (mean_prob, event_rate) {
                ece += count[b] as f64 / n as f64 * (m - r).abs();
            }
            CalibrationBin {
                lower: b as f64 / bins as f64,
                upper: (b + 1) as f64 / bins as f64,
                count: count[b],
                mean_prob,
                event_rate,
            }
        })
        .collect();
    Ok(Calibration { bins: bins_out, ece })
}

pub fn ece(s: &ScoredSet, bins: usize) -> Result<f64, MetricError> {
    calibration(s, bins).map(|c| c.ece)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionPoint {
    pub threshold: f64,
    pub model: f64,
    pub treat_all: f64,
    pub treat_none: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionCurve {
    pub points: Vec<DecisionPoint>,
}

/// Threshold probabilities 0.01, 0.02, ..., 0.99.
pub fn default_dca_grid() -> Vec<f64> {
    (1..100).map(|i| i as f64 / 100.0).collect()
}

pub fn net_benefit(counts: &ConfusionCounts, threshold: f64) -> f64 {
    let n = counts.total() as f64;
    counts.tp as f64 / n - counts.fp as f64 / n * threshold / (1.0 - threshold)
}

pub fn decision_curve(s: &ScoredSet, grid: &[f64]) -> Result<DecisionCurve, MetricError> {
    if let Some(&bad) = grid.iter().find(|&&t| !(t > 0.0 && t < 1.0)) {
        return Err(MetricError::InvalidGrid(bad));
    }
    let prevalence = s.prevalence().ok_or(MetricError::SingleClass)?;
    let points = grid
        .iter()
        .map(|&t| DecisionPoint {
            threshold: t,
            model: net_benefit(&confusion_at(s, t), t),
            treat_all: prevalence - (1.0 - prevalence) * t / (1.0 - t),
            treat_none: 0.0,
        })
        .collect();
    Ok(DecisionCurve { points })
}

/// Percentile bootstrap interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub resamples: usize,
    pub degenerate: usize,
}

/// Linear interpolation at position `(m - 1) q` of an ascending slice.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Row indices of resample `b`; the same `(seed, b)` always draws the same rows.
pub fn resample_rows(n: usize, seed: u64, b: usize) -> Vec<usize> {
    let mut rng = stream(seed, &[tags::BOOTSTRAP, b as u64]);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Metric values per resample in resample order, `None` where undefined.
pub fn bootstrap_values<F>(metric: F, s: &ScoredSet, resamples: usize, seed: u64) -> Vec<Option<f64>>
where
    F: Fn(&ScoredSet) -> Option<f64> + Sync,
{
    (0..resamples)
        .into_par_iter()
        .map(|b| metric(&s.resample(&resample_rows(s.len(), seed, b))).filter(|v| v.is_finite()))
        .collect()
}

pub fn bootstrap_ci<F>(metric: F, s: &ScoredSet, resamples: usize, seed: u64, level: f64) -> Result<IntervalEstimate, MetricError>
where
    F: Fn(&ScoredSet) -> Option<f64> + Sync,
{
    if resamples < 2 || !(level > 0.0 && level < 1.0) {
        return Err(MetricError::InvalidBootstrap);
    }
    let estimate = metric(s).ok_or(MetricError::UndefinedEstimate)?;
    let values = bootstrap_values(&metric, s, resamples, seed);
    let mut valid: Vec<f64> = values.iter().flatten().copied().collect();
    let degenerate = resamples - valid.len();
    if valid.is_empty() {
        return Err(MetricError::AllResamplesDegenerate(resamples));
    }
    valid.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok(IntervalEstimate {
        estimate,
        lower: percentile(&valid, alpha),
        upper: percentile(&valid, 1.0 - alpha),
        resamples,
        degenerate,
    })
}

/// Rows of the held-out metric table, in display order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Auroc,
    Auprc,
    Accuracy,
    Sensitivity,
    Specificity,
    Ppv,
    Npv,
    F1,
    Brier,
    Ece,
}

impl MetricKind {
    pub const ALL: [MetricKind; 10] = [
        MetricKind::Auroc,
        MetricKind::Auprc,
        MetricKind::Accuracy,
        MetricKind::Sensitivity,
        MetricKind::Specificity,
        MetricKind::Ppv,
        MetricKind::Npv,
        MetricKind::F1,
        MetricKind::Brier,
        MetricKind::Ece,
    ];

    pub fn label(self) -> &'static str {
        match self {
            MetricKind::Auroc => "AUROC",
            MetricKind::Auprc => "AUPRC",
            MetricKind::Accuracy => "Accuracy",
            MetricKind::Sensitivity => "Sensitivity",
            MetricKind::Specificity => "Specificity",
            MetricKind::Ppv => "PPV",
            MetricKind::Npv => "NPV",
            MetricKind::F1 => "F1 score",
            MetricKind::Brier => "Brier score",
            MetricKind::Ece => "ECE",
        }
    }

    /// Value on `s`, `None` when undefined there.
    pub fn compute(self, s: &ScoredSet, threshold: f64, bins: usize) -> Option<f64> {
        let counts = || confusion_at(s, threshold);
        match self {
            MetricKind::Auroc => auroc(s).ok(),
            MetricKind::Auprc => auprc(s).ok(),
            MetricKind::Accuracy => counts().accuracy(),
            MetricKind::Sensitivity => counts().sensitivity(),
            MetricKind::Specificity => counts().specificity(),
            MetricKind::Ppv => counts().ppv(),
            MetricKind::Npv => counts().npv(),
            MetricKind::F1 => counts().f1(),
            MetricKind::Brier => brier(s),
            MetricKind::Ece => (!s.is_empty()).then(|| ece(s, bins).ok()).flatten(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: MetricKind,
    pub name: String,
    pub estimate: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub degenerate_resamples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub calibration_bins: usize,
    pub bootstrap_iterations: usize,
    pub confidence_level: f64,
    pub dca_grid: Vec<f64>,
    pub seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            calibration_bins: 10,
            bootstrap_iterations: 1000,
            confidence_level: 0.95,
            dca_grid: default_dca_grid(),
            seed: 0,
        }
    }
}

pub fn metric_table(s: &ScoredSet, threshold: f64, settings: &EvalSettings) -> Result<Vec<MetricRow>, MetricError> {
    MetricKind::ALL
        .iter()
        .map(|&kind| {
            let metric = |set: &ScoredSet| kind.compute(set, threshold, settings.calibration_bins);
            let estimate = metric(s);
            let ci = match estimate {
                Some(_) => match bootstrap_ci(metric, s, settings.bootstrap_iterations, settings.seed, settings.confidence_level) {
                    Ok(ci) => Some(ci),
                    Err(MetricError::AllResamplesDegenerate(_)) => None,
                    Err(e) => return Err(e),
                },
                None => None,
            };
            Ok(MetricRow {
                metric: kind,
                name: kind.label().to_string(),
                estimate,
                ci_lower: ci.map(|c| c.lower),
                ci_upper: ci.map(|c| c.upper),
                degenerate_resamples: ci.map_or(settings.bootstrap_iterations, |c| c.degenerate),
            })
        })
        .collect()
}

/// Complete held-out evaluation of one scored set at a fixed threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub n: usize,
    pub positives: usize,
    pub threshold: f64,
    pub confusion: ConfusionCounts,
    pub table: Vec<MetricRow>,
    pub roc: Vec<RocPoint>,
    pub pr: Vec<PrPoint>,
    pub calibration: Calibration,
    pub decision_curve: DecisionCurve,
}

impl Evaluation {
    pub fn value(&self, kind: MetricKind) -> Option<f64> {
        self.table.iter().find(|r| r.metric == kind).and_then(|r| r.estimate)
    }

    pub fn row(&self, kind: MetricKind) -> Option<&MetricRow> {
        self.table.iter().find(|r| r.metric == kind)
    }
}

pub fn evaluate(s: &ScoredSet, threshold: f64, settings: &EvalSettings) -> Result<Evaluation, MetricError> {
    Ok(Evaluation {
        n: s.len(),
        positives: s.positives(),
        threshold,
        confusion: confusion_at(s, threshold),
        table: metric_table(s, threshold, settings)?,
        roc: roc_curve(s)?,
        pr: pr_curve(s)?,
        calibration: calibration(s, settings.calibration_bins)?,
        decision_curve: decision_curve(s, &settings.dca_grid)?,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn roc_csv(points: &[RocPoint]) -> String {
    let mut out = String::from("threshold,fpr,tpr\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.threshold, p.fpr, p.tpr));
    }
    out
}

pub fn pr_csv(points: &[PrPoint]) -> String {
    let mut out = String::from("threshold,recall,precision\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.threshold, p.recall, p.precision));
    }
    out
}

pub fn calibration_csv(cal: &Calibration) -> String {
    let mut out = String::from("bin_lower,bin_upper,count,mean_prob,event_rate\n");
    for b in &cal.bins {
        out.push_str(&format!("{},{},{},{},{}\n", b.lower, b.upper, b.count, opt(b.mean_prob), opt(b.event_rate)));
    }
    out
}

pub fn decision_curve_csv(curve: &DecisionCurve) -> String {
    let mut out = String::from("threshold,model,treat_all,treat_none\n");
    for p in &curve.points {
        out.push_str(&format!("{},{},{},{}\n", p.threshold, p.model, p.treat_all, p.treat_none));
    }
    out
}

/// Fixed-width text rendering of a metric table with three-decimal values.
pub fn format_table(rows: &[MetricRow], confidence_level: f64) -> String {
    let f = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.3}"));
    let mut out = format!("{:<12} {:>9}  {:.0}% CI\n", "Metric", "Estimate", confidence_level * 100.0);
    for r in rows {
        let ci = match (r.ci_lower, r.ci_upper) {
            (Some(l), Some(u)) => format!("{l:.3}-{u:.3}"),
            _ => "undefined".to_string(),
        };
        out.push_str(&format!("{:<12} {:>9}  {}\n", r.name, f(r.estimate), ci));
    }
    out
}
