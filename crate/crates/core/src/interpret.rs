//! Group-comparison statistics and the predictor / baseline summary tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::dataio::{decode_timepoint, Cohort, ColumnKind};
use crate::metrics::percentile;
use crate::preprocess::{ColumnTransform, FittedPreprocessor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("group comparison needs at least one value in each group")]
    EmptyGroup,
    #[error("contingency table has a zero row or column total")]
    ZeroMarginal,
    #[error("contingency table must have 2 rows and at least 2 columns")]
    InvalidTable,
    #[error("characteristic `{0}` is not a column of the cohort")]
    UnknownCharacteristic(String),
    #[error("importance has {found} entries for {expected} features")]
    ImportanceLength { expected: usize, found: usize },
    #[error("analyte map line {line}: {message}")]
    AnalyteMap { line: usize, message: String },
}

/// Mann-Whitney comparison of a case group against a control group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSize {
    /// Case-over-control wins, ties counted one half.
    pub u: f64,
    /// Rank-biserial correlation `2U / (n_case n_control) - 1`.
    pub r: f64,
    pub p_value: f64,
    pub n_case: usize,
    pub n_control: usize,
}

/// Midranks (1-based) of `values`, ties sharing the average rank, plus the
/// tie-correction sum `sum(t^3 - t)`.
fn midranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    (ranks, ties)
}

/// Two-sided Mann-Whitney test by normal approximation with tie-corrected
/// variance and continuity correction.
pub fn mann_whitney(case: &[f64], control: &[f64]) -> Result<EffectSize, StatsError> {
    if case.is_empty() || control.is_empty() {
        return Err(StatsError::EmptyGroup);
    }
    let (n1, n2) = (case.len() as f64, control.len() as f64);
    let pooled: Vec<f64> = case.iter().chain(control).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let rank_sum: f64 = ranks[..case.len()].iter().sum();
    let u = rank_sum - n1 * (n1 + 1.0) / 2.0;
    let n = n1 + n2;
    let mean = n1 * n2 / 2.0;
    let var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    let p_value = if var > 0.0 {
        let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
        erfc(z / std::f64::consts::SQRT_2).min(1.0)
    } else {
        1.0
    };
    Ok(EffectSize {
        u,
        r: (2.0 * u - n1 * n2) / (n1 * n2),
        p_value,
        n_case: case.len(),
        n_control: control.len(),
    })
}

/// Median and interquartile range of a reference sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustReference {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl RobustReference {
    /// `None` for an empty sample.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self { median: percentile(&v, 0.5), q1: percentile(&v, 0.25), q3: percentile(&v, 0.75) })
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustZ {
    pub values: Vec<f64>,
    /// Set when the reference IQR is zero; all values are then 0.
    pub degenerate_spread: bool,
}

pub fn robust_z(values: &[f64], median: f64, iqr: f64) -> RobustZ {
    if iqr == 0.0 {
        return RobustZ { values: vec![0.0; values.len()], degenerate_spread: true };
    }
    RobustZ { values: values.iter().map(|x| (x - median) / iqr).collect(), degenerate_spread: false }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoricalTestKind {
    ChiSquare,
    FisherExact,
}

impl CategoricalTestKind {
    pub fn label(self) -> &'static str {
        match self {
            CategoricalTestKind::ChiSquare => "Chi-square",
            CategoricalTestKind::FisherExact => "Fisher exact",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalTest {
    pub test: CategoricalTestKind,
    /// Chi-square statistic; absent for the exact test.
    pub statistic: Option<f64>,
    pub p_value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

fn binomial_exact(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step.
        acc = acc.checked_mul(u128::from(n - i))? / u128::from(i + 1);
    }
    Some(acc)
}

fn ln_binomial(n: u64, k: u64) -> f64 {
    statrs::function::factorial::ln_binomial(n, k)
}

/// Two-sided Fisher exact p for `[[a, b], [c, d]]`: total probability of all
/// tables with the observed margins that are no more likely than the observed.
pub fn fisher_exact(table: [[u64; 2]; 2]) -> f64 {
    let [[a, b], [c, d]] = table;
    let (r1, r2, c1) = (a + b, c + d, a + c);
    let n = r1 + r2;
    let lo = c1.saturating_sub(r2);
    let hi = r1.min(c1);
    // Weight of a table is C(r1, x) C(r2, c1 - x); the common divisor C(n, c1) cancels.
    let exact: Option<Vec<u128>> = (lo..=hi)
        .map(|x| binomial_exact(r1, x)?.checked_mul(binomial_exact(r2, c1 - x)?))
        .collect();
    if let (Some(weights), Some(total)) = (exact, binomial_exact(n, c1)) {
        let observed = weights[(a - lo) as usize];
        let tail: u128 = weights.iter().filter(|&&w| w <= observed).sum();
        return (tail as f64 / total as f64).min(1.0);
    }
    let ln_total = ln_binomial(n, c1);
    let lp = |x: u64| ln_binomial(r1, x) + ln_binomial(r2, c1 - x) - ln_total;
    let observed = lp(a);
    (lo..=hi).map(lp).filter(|&v| v <= observed + 1e-7 * observed.abs().max(1.0)).map(f64::exp).sum::<f64>().min(1.0)
}

/// Association test for a 2 x c table of counts (rows are groups).
///
/// Chi-square without continuity correction when every expected count is at
/// least 5; otherwise Fisher's exact test for 2 x 2 tables and chi-square
/// with a warning for wider tables.
pub fn categorical_test(table: &[Vec<u64>]) -> Result<CategoricalTest, StatsError> {
    if table.len() != 2 || table[0].len() < 2 || table[1].len() != table[0].len() {
        return Err(StatsError::InvalidTable);
    }
    let cols = table[0].len();
    let row_tot: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let col_tot: Vec<u64> = (0..cols).map(|j| table[0][j] + table[1][j]).collect();
    if row_tot.contains(&0) || col_tot.contains(&0) {
        return Err(StatsError::ZeroMarginal);
    }
    let n = (row_tot[0] + row_tot[1]) as f64;
    let mut statistic = 0.0;
    let mut small = false;
    for (i, row) in table.iter().enumerate() {
        for (j, &o) in row.iter().enumerate() {
            let e = row_tot[i] as f64 * col_tot[j] as f64 / n;
            small |= e < 5.0;
            statistic += (o as f64 - e).powi(2) / e;
        }
    }
    if small && cols == 2 {
        return Ok(CategoricalTest {
            test: CategoricalTestKind::FisherExact,
            statistic: None,
            p_value: fisher_exact([[table[0][0], table[0][1]], [table[1][0], table[1][1]]]),
            warning: None,
        });
    }
    let dist = ChiSquared::new((cols - 1) as f64).expect("positive degrees of freedom");
    Ok(CategoricalTest {
        test: CategoricalTestKind::ChiSquare,
        statistic: Some(statistic),
        p_value: dist.sf(statistic).clamp(0.0, 1.0),
        warning: small.then(|| "expected counts below 5; chi-square approximation may be poor".to_string()),
    })
}

/// Clinical alias and domain per analyte code.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnalyteMap {
    entries: BTreeMap<String, (String, String)>,
}

const DEFAULT_ANALYTES: &str = include_str!("../data/analytes.csv");

impl AnalyteMap {
    /// Parses `analyte,alias,domain` lines after a header row.
    pub fn parse(text: &str) -> Result<Self, StatsError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut entries = BTreeMap::new();
        for (i, rec) in reader.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| StatsError::AnalyteMap { line, message: e.to_string() })?;
            if rec.len() != 3 {
                return Err(StatsError::AnalyteMap { line, message: "expected analyte,alias,domain".into() });
            }
            entries.insert(rec[0].to_string(), (rec[1].to_string(), rec[2].to_string()));
        }
        Ok(Self { entries })
    }

    /// The bundled map for the default synthetic panel.
    pub fn bundled() -> Self {
        Self::parse(DEFAULT_ANALYTES).expect("bundled analyte map parses")
    }

    /// Alias such as "Cystatin C at week 6"; unknown analytes keep their code.
    pub fn alias(&self, feature: &str) -> String {
        if let Some((column, level)) = feature.split_once('=') {
            return format!("{}: {level}", self.alias(column));
        }
        let (analyte, week) = decode_timepoint(feature);
        match (self.entries.get(&analyte), week) {
            (Some((alias, _)), Some(w)) => format!("{alias} at week {w}"),
            (Some((alias, _)), None) => alias.clone(),
            (None, _) => feature.to_string(),
        }
    }

    pub fn domain(&self, feature: &str) -> String {
        let column = feature.split_once('=').map_or(feature, |(c, _)| c);
        let (analyte, _) = decode_timepoint(column);
        self.entries.get(&analyte).map_or_else(|| "Other".to_string(), |(_, d)| d.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    HigherInCase,
    LowerInCase,
    Limited,
}

impl Trend {
    /// Direction from the sign of `r`; `|r| < cutoff` is limited separation.
    pub fn from_effect(r: f64, cutoff: f64) -> Self {
        if r.abs() < cutoff {
            Trend::Limited
        } else if r > 0.0 {
            Trend::HigherInCase
        } else {
            Trend::LowerInCase
        }
    }

    pub fn describe(self, case_label: &str) -> String {
        match self {
            Trend::HigherInCase => format!("Higher in {case_label}"),
            Trend::LowerInCase => format!("Lower in {case_label}"),
            Trend::Limited => "Limited separation".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingBasis {
    ModelImportance,
    EffectSize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureReportRow {
    pub rank: usize,
    pub feature: String,
    pub alias: String,
    pub importance: Option<f64>,
    pub domain: String,
    pub p_value: Option<f64>,
    pub effect: Option<f64>,
    pub trend: Trend,
    /// Group medians of the robust z-scores (full-cohort reference).
    pub median_z_case: Option<f64>,
    pub median_z_control: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    pub basis: RankingBasis,
    pub case_label: String,
    pub rows: Vec<FeatureReportRow>,
    pub notices: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSettings {
    pub top_k: usize,
    pub trend_cutoff: f64,
    pub case_label: String,
    pub control_label: String,
}

impl Default for ReportSettings {
    fn default() -> Self {
        Self { top_k: 10, trend_cutoff: 0.1, case_label: "case".into(), control_label: "control".into() }
    }
}

pub const CAUSALITY_NOTICE: &str = "The group trend summarizes the direction of the distributional pattern and does not imply causality.";

/// Per-row values of one design feature on the original scale: the raw value
/// for continuous columns, a 0/1 indicator for one-hot slots.
fn feature_values(pre: &FittedPreprocessor, cohort: &Cohort, slot: usize) -> Vec<Option<f64>> {
    for (c, col) in pre.columns.iter().enumerate() {
        match &col.transform {
            Some(ColumnTransform::Continuous { slot: s, .. }) if *s == slot => {
                return (0..cohort.n()).map(|r| cohort.value(r, c)).collect();
            }
            Some(ColumnTransform::Categorical { vocabulary, first_slot, .. })
                if (*first_slot..=first_slot + vocabulary.len()).contains(&slot) =>
            {
                let levels = &cohort.columns()[c].levels;
                let target = vocabulary.get(slot - first_slot);
                return (0..cohort.n())
                    .map(|r| {
                        cohort.value(r, c).map(|v| {
                            let level = &levels[v as usize];
                            let hit = match target {
                                Some(t) => level == t,
                                None => !vocabulary.contains(level),
                            };
                            hit as u8 as f64
                        })
                    })
                    .collect();
            }
            _ => {}
        }
    }
    vec![None; cohort.n()]
}

fn group_median(values: &[f64]) -> Option<f64> {
    RobustReference::from_values(values).map(|r| r.median)
}

/// Top-k predictors with group statistics on the full cohort.
///
/// With model importance the ranking follows it; without (linear and kernel
/// models) the ranking falls back to `|r|` and a notice says so.
pub fn feature_report(
    importance: Option<&[f64]>,
    pre: &FittedPreprocessor,
    cohort: &Cohort,
    map: &AnalyteMap,
    settings: &ReportSettings,
) -> Result<FeatureReport, StatsError> {
    let d = pre.n_features();
    if let Some(imp) = importance {
        if imp.len() != d {
            return Err(StatsError::ImportanceLength { expected: d, found: imp.len() });
        }
    }
    let labels = cohort.labels();
    let stats: Vec<(Option<EffectSize>, Option<f64>, Option<f64>)> = (0..d)
        .map(|j| {
            let vals = feature_values(pre, cohort, j);
            let (mut case, mut control) = (Vec::new(), Vec::new());
            for (v, &y) in vals.iter().zip(labels) {
                if let Some(v) = v {
                    if y { case.push(*v) } else { control.push(*v) }
                }
            }
            let effect = mann_whitney(&case, &control).ok();
            let all: Vec<f64> = vals.iter().flatten().copied().collect();
            let (zc, zn) = match RobustReference::from_values(&all) {
                Some(rf) => (
                    group_median(&robust_z(&case, rf.median, rf.iqr()).values),
                    group_median(&robust_z(&control, rf.median, rf.iqr()).values),
                ),
                None => (None, None),
            };
            (effect, zc, zn)
        })
        .collect();

    let mut order: Vec<usize> = (0..d).collect();
    let mut notices = Vec::new();
    let basis = match importance {
        Some(imp) => {
            order.sort_by(|&a, &b| imp[b].total_cmp(&imp[a]).then(a.cmp(&b)));
            RankingBasis::ModelImportance
        }
        None => {
            let key = |j: usize| stats[j].0.map_or(0.0, |e| e.r.abs());
            order.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
            notices.push(
                "The selected model has no native feature importance; predictors are ranked by absolute rank-biserial effect size instead."
                    .to_string(),
            );
            RankingBasis::EffectSize
        }
    };
    notices.push(CAUSALITY_NOTICE.to_string());

    let rows = order
        .into_iter()
        .take(settings.top_k)
        .enumerate()
        .map(|(i, j)| {
            let name = &pre.feature_names[j];
            let (effect, zc, zn) = stats[j];
            FeatureReportRow {
                rank: i + 1,
                feature: name.clone(),
                alias: map.alias(name),
                importance: importance.map(|imp| imp[j]),
                domain: map.domain(name),
                p_value: effect.map(|e| e.p_value),
                effect: effect.map(|e| e.r),
                trend: effect.map_or(Trend::Limited, |e| Trend::from_effect(e.r, settings.trend_cutoff)),
                median_z_case: zc,
                median_z_control: zn,
            }
        })
        .collect();
    Ok(FeatureReport { basis, case_label: settings.case_label.clone(), rows, notices })
}

/// `"< 0.001"` below one in a thousand, otherwise three decimals.
pub fn format_p(p: f64) -> String {
    if p < 0.001 {
        "< 0.001".to_string()
    } else {
        format!("{p:.3}")
    }
}

/// At most two decimals, trailing zeros trimmed.
pub fn format_number(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(header.to_vec(), &mut out);
    line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect(), &mut out);
    for r in rows {
        line(r.iter().map(String::as_str).collect(), &mut out);
    }
    out
}

pub const FEATURE_REPORT_COLUMNS: [&str; 7] =
    ["Rank", "Feature code", "Clinical alias", "Importance", "Domain", "P value", "Group trend"];

pub fn format_feature_report(report: &FeatureReport) -> String {
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.rank.to_string(),
                r.feature.clone(),
                r.alias.clone(),
                r.importance.map_or_else(|| "-".to_string(), |v| format!("{v:.3}")),
                r.domain.clone(),
                r.p_value.map_or_else(|| "-".to_string(), format_p),
                r.trend.describe(&report.case_label),
            ]
        })
        .collect();
    let mut out = render_table(&FEATURE_REPORT_COLUMNS, &rows);
    for n in &report.notices {
        let _ = writeln!(out, "\n{n}");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub characteristic: String,
    pub overall: String,
    pub control: String,
    pub case: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineTable {
    pub n_overall: usize,
    pub n_control: usize,
    pub n_case: usize,
    pub case_label: String,
    pub control_label: String,
    pub rows: Vec<BaselineRow>,
}

fn median_iqr(values: &[f64]) -> String {
    match RobustReference::from_values(values) {
        Some(r) => format!("{} [{}, {}]", format_number(r.median), format_number(r.q1), format_number(r.q3)),
        None => "NA".to_string(),
    }
}

fn count_pct(k: usize, n: usize) -> String {
    if n == 0 {
        return "NA".to_string();
    }
    format!("{k} ({:.1}%)", 100.0 * k as f64 / n as f64)
}

/// Summary rows for each characteristic: continuous columns as
/// median [Q1, Q3] with a Mann-Whitney p, categorical ones as n (%) per level
/// with a chi-square or Fisher p. Percentages use non-missing rows.
pub fn baseline_table(cohort: &Cohort, characteristics: &[String], settings: &ReportSettings) -> Result<BaselineTable, StatsError> {
    let labels = cohort.labels();
    let n_case = labels.iter().filter(|&&y| y).count();
    let mut rows = Vec::new();
    for name in characteristics {
        let c = cohort.column_index(name).ok_or_else(|| StatsError::UnknownCharacteristic(name.clone()))?;
        let meta = &cohort.columns()[c];
        let (mut case, mut control) = (Vec::new(), Vec::new());
        for (r, &y) in labels.iter().enumerate() {
            if let Some(v) = cohort.value(r, c) {
                if y { case.push(v) } else { control.push(v) }
            }
        }
        let all: Vec<f64> = case.iter().chain(&control).copied().collect();
        match meta.kind {
            ColumnKind::Categorical => {
                let k = meta.levels.len();
                let mut counts = vec![vec![0u64; k]; 2];
                for &v in &control {
                    counts[0][v as usize] += 1;
                }
                for &v in &case {
                    counts[1][v as usize] += 1;
                }
                let observed: Vec<usize> = (0..k).filter(|&j| counts[0][j] + counts[1][j] > 0).collect();
                let table: Vec<Vec<u64>> = counts.iter().map(|r| observed.iter().map(|&j| r[j]).collect()).collect();
                let test = categorical_test(&table).ok();
                rows.push(BaselineRow {
                    characteristic: name.clone(),
                    overall: String::new(),
                    control: String::new(),
                    case: String::new(),
                    test: test.as_ref().map(|t| t.test.label().to_string()),
                    p_value: test.as_ref().map(|t| t.p_value),
                    warning: test.and_then(|t| t.warning),
                });
                for &j in &observed {
                    let (a, b) = (counts[0][j] as usize, counts[1][j] as usize);
                    rows.push(BaselineRow {
                        characteristic: format!("  {}", meta.levels[j]),
                        overall: count_pct(a + b, all.len()),
                        control: count_pct(a, control.len()),
                        case: count_pct(b, case.len()),
                        test: None,
                        p_value: None,
                        warning: None,
                    });
                }
            }
            _ => {
                let effect = mann_whitney(&case, &control).ok();
                rows.push(BaselineRow {
                    characteristic: name.clone(),
                    overall: median_iqr(&all),
                    control: median_iqr(&control),
                    case: median_iqr(&case),
                    test: effect.map(|_| "Mann-Whitney U".to_string()),
                    p_value: effect.map(|e| e.p_value),
                    warning: None,
                });
            }
        }
    }
    Ok(BaselineTable {
        n_overall: cohort.n(),
        n_control: cohort.n() - n_case,
        n_case,
        case_label: settings.case_label.clone(),
        control_label: settings.control_label.clone(),
        rows,
    })
}

pub fn format_baseline_table(table: &BaselineTable) -> String {
    let h = [
        "Characteristic".to_string(),
        format!("Overall (n={})", table.n_overall),
        format!("{} (n={})", table.control_label, table.n_control),
        format!("{} (n={})", table.case_label, table.n_case),
        "P value".to_string(),
    ];
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                r.characteristic.clone(),
                r.overall.clone(),
                r.control.clone(),
                r.case.clone(),
                r.p_value.map(format_p).unwrap_or_default(),
            ]
        })
        .collect();
    let mut out = render_table(&h.iter().map(String::as_str).collect::<Vec<_>>(), &rows);
    out.push_str("\nContinuous variables are reported as median [interquartile range]; categorical variables as n (%).\n");
    out
}
