use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// Comparator attached to a detection-limit entry such as `"<0.10"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Censor {
    Below,
    Above,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Unparseable {
    Date,
    Text(String),
}

/// Outcome of parsing one raw laboratory cell.
#[derive(Debug, Clone, PartialEq)]
pub enum ParsedValue {
    Numeric { value: f64, censored: Option<Censor> },
    Missing,
    Qualitative(f64),
    Unparseable(Unparseable),
}

impl ParsedValue {
    pub fn numeric(value: f64) -> Self {
        ParsedValue::Numeric { value, censored: None }
    }

    /// Numeric reading of the cell, qualitative grades included.
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ParsedValue::Numeric { value, .. } | ParsedValue::Qualitative(value) => Some(value),
            _ => None,
        }
    }
}

/// Dictionary of qualitative urinalysis grades (keys matched case-insensitively).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GradeMap(BTreeMap<String, f64>);

impl Default for GradeMap {
    fn default() -> Self {
        Self::from_pairs([("negative", 0.0), ("trace", 0.5), ("+", 1.0), ("++", 2.0), ("+++", 3.0)])
    }
}

impl GradeMap {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        Self(pairs.into_iter().map(|(k, v)| (k.trim().to_lowercase(), v)).collect())
    }

    pub fn lookup(&self, token: &str) -> Option<f64> {
        self.0.get(&token.trim().to_lowercase()).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Normalizes keys after deserialization from user config.
    pub fn normalized(self) -> Self {
        Self(self.0.into_iter().map(|(k, v)| (k.trim().to_lowercase(), v)).collect())
    }
}

const MISSING_TOKENS: [&str; 5] = ["", "na", "n/a", "-", "."];

static WHOLE_DATE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^(?:\d{4}[-/.]\d{1,2}[-/.]\d{1,2}|\d{1,2}/\d{1,2}/\d{2,4})(?:[ T]\d{1,2}:\d{2}(?::\d{2})?)?$",
    )
    .unwrap()
});

static EMBEDDED_DATE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"\(?\b(?:\d{4}[-/.]\d{1,2}[-/.]\d{1,2}|\d{1,2}/\d{1,2}/\d{2,4})(?:[ T]\d{1,2}:\d{2}(?::\d{2})?)?\b\)?",
    )
    .unwrap()
});

static LEADING_NUMBER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(<=|>=|≤|≥|<|>)?\s*([-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?)").unwrap()
});

pub fn is_missing_token(cell: &str) -> bool {
    let t = cell.trim();
    MISSING_TOKENS.iter().any(|m| t.eq_ignore_ascii_case(m))
}

/// Parses a cell with the default grade dictionary.
pub fn parse_clinical_value(cell: &str) -> ParsedValue {
    static DEFAULT: LazyLock<GradeMap> = LazyLock::new(GradeMap::default);
    parse_clinical_value_with(cell, &DEFAULT)
}

/// Total parser for raw laboratory cells.
///
/// Order of precedence: missing sentinel, qualitative grade, whole-cell date,
/// leading numeric token (after removing embedded date annotations and an
/// optional comparator), otherwise unparseable text.
pub fn parse_clinical_value_with(cell: &str, grades: &GradeMap) -> ParsedValue {
    let t = cell.trim();
    if is_missing_token(t) {
        return ParsedValue::Missing;
    }
    if let Some(g) = grades.lookup(t) {
        return ParsedValue::Qualitative(g);
    }
    if WHOLE_DATE.is_match(t) {
        return ParsedValue::Unparseable(Unparseable::Date);
    }
    let stripped = EMBEDDED_DATE.replace_all(t, " ");
    let stripped = stripped.trim().trim_start_matches([':', ';', ',', '@']).trim_start();
    if let Some(caps) = LEADING_NUMBER.captures(stripped) {
        if let Ok(value) = caps[2].parse::<f64>() {
            if value.is_finite() {
                let censored = caps.get(1).map(|c| match c.as_str() {
                    "<" | "<=" | "≤" => Censor::Below,
                    _ => Censor::Above,
                });
                return ParsedValue::Numeric { value, censored };
            }
        }
    }
    ParsedValue::Unparseable(Unparseable::Text(t.to_string()))
}
