//! Ingestion of raw laboratory exports into a typed [`Cohort`].
//!
//! The path is `parse_csv` → [`apply_exclusions`] → [`build_cohort`]. Cells
//! go through [`parse_clinical_value`], which recovers numbers from entries
//! carrying units, comparators or date annotations. Feature names carry
//! their sampling week as a Roman-numeral suffix ([`decode_timepoint`]).

mod clean;
mod exclusions;
mod ingest;
mod table;
mod timepoint;
mod value;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Matrix;

pub use clean::{read_clean_csv, write_clean_csv, CohortSchema};
pub use ingest::{ingest, Ingested};
pub use exclusions::{apply_exclusions, ExclusionClass, ExclusionEntry, ExclusionOutcome, ExclusionRules, PatternRule};
pub use table::{parse_csv, CellSource, RawTable};
pub use timepoint::{decode_timepoint, week_code, TIMEPOINT_CODES, WEEKS};
pub use value::{
    is_missing_token, parse_clinical_value, parse_clinical_value_with, Censor, GradeMap, ParsedValue, Unparseable,
};

/// Value stored at masked cells.
pub const MISSING_SENTINEL: f64 = 0.0;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("empty input")]
    EmptyInput,
    #[error("zero data rows")]
    NoDataRows,
    #[error("duplicate header name {0:?}")]
    DuplicateHeader(String),
    #[error("input is not valid UTF-8 (line {line:?})")]
    Encoding { line: Option<u64> },
    #[error("CSV syntax error (line {line:?}): {message}")]
    Csv { line: Option<u64>, message: String },
    #[error("label column {0:?} not found")]
    MissingLabelColumn(String),
    #[error("label column {column:?} is not binary: {detail}")]
    LabelNotBinary { column: String, detail: String },
    #[error("invalid exclusion pattern {0}")]
    BadPattern(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Categorical,
    /// Present in the data but never usable as a predictor (pure date fields).
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub analyte: String,
    pub week: Option<u8>,
    pub kind: ColumnKind,
    pub missing_fraction: f64,
    /// Non-missing cells that could not be read and were masked.
    pub unparseable: usize,
    /// Cells read from a detection-limit entry such as `<0.10`.
    pub censored: usize,
    /// Category labels of a categorical column; values store the level index.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<String>,
}

/// Predictor matrix with missingness mask and binary outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    values: Matrix,
    missing: Vec<bool>,
    labels: Vec<bool>,
    columns: Vec<ColumnMeta>,
    row_ids: Vec<String>,
}

impl Cohort {
    /// Assembles a cohort from per-column optional values.
    pub fn from_columns(
        columns: Vec<ColumnMeta>,
        data: Vec<Vec<Option<f64>>>,
        labels: Vec<bool>,
        row_ids: Vec<String>,
    ) -> Result<Self, DataError> {
        let n = labels.len();
        if columns.len() != data.len() {
            return Err(DataError::SchemaMismatch("column metadata and data differ in length".into()));
        }
        if row_ids.len() != n || data.iter().any(|c| c.len() != n) {
            return Err(DataError::SchemaMismatch("row count differs across columns".into()));
        }
        let positives = labels.iter().filter(|&&y| y).count();
        if positives == 0 || positives == n {
            return Err(DataError::LabelNotBinary {
                column: "<label>".into(),
                detail: "only one class present".into(),
            });
        }
        let p = columns.len();
        let mut values = Matrix::zeros(n, p);
        let mut missing = vec![true; n * p];
        for (c, col) in data.iter().enumerate() {
            for (r, v) in col.iter().enumerate() {
                match v {
                    Some(x) => {
                        values.set(r, c, *x);
                        missing[r * p + c] = false;
                    }
                    None => values.set(r, c, MISSING_SENTINEL),
                }
            }
        }
        Ok(Self { values, missing, labels, columns, row_ids })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn columns(&self) -> &[ColumnMeta] {
        &self.columns
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    #[inline]
    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.missing[row * self.p() + col]
    }

    #[inline]
    pub fn value(&self, row: usize, col: usize) -> Option<f64> {
        (!self.is_missing(row, col)).then(|| self.values.get(row, col))
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Non-missing values of a column over the given rows.
    pub fn present(&self, col: usize, rows: impl IntoIterator<Item = usize>) -> Vec<f64> {
        rows.into_iter().filter_map(|r| self.value(r, col)).collect()
    }

    /// Overwrites a row's predictors and label. Used to probe leakage.
    pub fn set_row(&mut self, row: usize, values: &[Option<f64>], label: bool) {
        assert_eq!(values.len(), self.p());
        let p = self.p();
        for (c, v) in values.iter().enumerate() {
            self.missing[row * p + c] = v.is_none();
            self.values.set(row, c, v.unwrap_or(MISSING_SENTINEL));
        }
        self.labels[row] = label;
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y).count()
    }
}

/// Which column holds the outcome and which of its values marks a case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSpec {
    pub column: String,
    /// Raw label value denoting a case. Inferred from common pairs when absent.
    #[serde(default)]
    pub positive: Option<String>,
}

const KNOWN_PAIRS: [(&str, &str); 6] = [
    ("1", "0"),
    ("true", "false"),
    ("yes", "no"),
    ("case", "control"),
    ("positive", "negative"),
    ("p-tma", "control"),
];

fn read_labels<S: CellSource>(src: &S, col: usize, spec: &LabelSpec) -> Result<Vec<bool>, DataError> {
    let raw: Vec<String> = (0..src.n_rows()).map(|r| src.cell(r, col).trim().to_string()).collect();
    let not_binary = |detail: String| DataError::LabelNotBinary { column: spec.column.clone(), detail };
    if let Some(r) = raw.iter().position(|v| is_missing_token(v)) {
        return Err(not_binary(format!("missing label in data row {}", r + 1)));
    }
    let distinct: BTreeSet<&str> = raw.iter().map(String::as_str).collect();
    if distinct.len() != 2 {
        return Err(not_binary(format!("{} distinct values", distinct.len())));
    }
    let positive = match &spec.positive {
        Some(p) => {
            if !distinct.contains(p.trim()) {
                return Err(not_binary(format!("positive value {p:?} not present")));
            }
            p.trim().to_string()
        }
        None => {
            let lower: BTreeSet<String> = distinct.iter().map(|s| s.to_lowercase()).collect();
            let (pos, _) = KNOWN_PAIRS
                .iter()
                .find(|(a, b)| lower.contains(*a) && lower.contains(*b))
                .ok_or_else(|| not_binary("cannot infer which value marks a case; set the positive label".into()))?;
            distinct.iter().find(|s| s.to_lowercase() == *pos).unwrap().to_string()
        }
    };
    Ok(raw.iter().map(|v| *v == positive).collect())
}

struct ParsedColumn {
    meta: ColumnMeta,
    values: Vec<Option<f64>>,
}

/// Parses one predictor column and decides its kind.
///
/// A column whose every non-missing cell is a date is a date field. A column
/// dominated by free text is categorical (levels are the trimmed cell texts).
/// Otherwise it is continuous and non-numeric cells are masked.
fn parse_predictor<S: CellSource>(src: &S, col: usize, grades: &GradeMap) -> ParsedColumn {
    let n = src.n_rows();
    let name = src.header()[col].clone();
    let (analyte, week) = decode_timepoint(&name);
    let parsed: Vec<ParsedValue> = (0..n).map(|r| parse_clinical_value_with(src.cell(r, col), grades)).collect();

    let (mut numeric, mut dates, mut text) = (0usize, 0usize, 0usize);
    for v in &parsed {
        match v {
            ParsedValue::Numeric { .. } | ParsedValue::Qualitative(_) => numeric += 1,
            ParsedValue::Unparseable(Unparseable::Date) => dates += 1,
            ParsedValue::Unparseable(Unparseable::Text(_)) => text += 1,
            ParsedValue::Missing => {}
        }
    }

    let mut meta = ColumnMeta {
        name,
        analyte,
        week,
        kind: ColumnKind::Continuous,
        missing_fraction: 0.0,
        unparseable: 0,
        censored: 0,
        levels: Vec::new(),
    };

    let values: Vec<Option<f64>> = if numeric == 0 && text == 0 && dates > 0 {
        meta.kind = ColumnKind::Excluded;
        meta.unparseable = dates;
        vec![None; n]
    } else if text > numeric {
        meta.kind = ColumnKind::Categorical;
        meta.unparseable = dates;
        let cells: Vec<Option<String>> = parsed
            .iter()
            .zip(0..n)
            .map(|(v, r)| match v {
                ParsedValue::Missing | ParsedValue::Unparseable(Unparseable::Date) => None,
                _ => Some(src.cell(r, col).trim().to_string()),
            })
            .collect();
        let levels: BTreeSet<&String> = cells.iter().flatten().collect();
        meta.levels = levels.into_iter().cloned().collect();
        let index: BTreeMap<&str, usize> = meta.levels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        cells.iter().map(|c| c.as_deref().map(|s| index[s] as f64)).collect()
    } else {
        meta.unparseable = dates + text;
        meta.censored = parsed
            .iter()
            .filter(|v| matches!(v, ParsedValue::Numeric { censored: Some(_), .. }))
            .count();
        parsed.iter().map(ParsedValue::as_f64).collect()
    };
    meta.missing_fraction = values.iter().filter(|v| v.is_none()).count() as f64 / n as f64;
    ParsedColumn { meta, values }
}

/// Builds the pre-screening cohort.
///
/// The label column is read once for the outcome vector and never during
/// predictor parsing. `row_ids` defaults to 1-based row numbers.
pub fn build_cohort<S: CellSource>(
    src: &S,
    label: &LabelSpec,
    grades: &GradeMap,
    row_ids: Option<Vec<String>>,
) -> Result<Cohort, DataError> {
    let label_col = src
        .header()
        .iter()
        .position(|h| h == label.column.trim())
        .ok_or_else(|| DataError::MissingLabelColumn(label.column.clone()))?;
    let labels = read_labels(src, label_col, label)?;
    let predictor_cols: Vec<usize> = (0..src.header().len()).filter(|&c| c != label_col).collect();
    let parsed: Vec<ParsedColumn> =
        predictor_cols.par_iter().map(|&c| parse_predictor(src, c, grades)).collect();
    let row_ids = row_ids.unwrap_or_else(|| (1..=src.n_rows()).map(|i| i.to_string()).collect());
    let (metas, data): (Vec<_>, Vec<_>) = parsed.into_iter().map(|p| (p.meta, p.values)).unzip();
    Cohort::from_columns(metas, data, labels, row_ids).map_err(|e| match e {
        DataError::LabelNotBinary { detail, .. } => DataError::LabelNotBinary { column: label.column.clone(), detail },
        e => e,
    })
}
