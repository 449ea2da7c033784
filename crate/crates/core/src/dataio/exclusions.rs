use std::collections::{BTreeSet, HashSet};

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{DataError, RawTable};

/// Why a column was removed from the predictor set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionClass {
    Identifier,
    Outcome,
    PostEvent,
    NonPredictor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternRule {
    pub class: ExclusionClass,
    /// Regular expression matched against the trimmed column name.
    pub regex: String,
}

/// Columns that must never reach the predictor matrix.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExclusionRules {
    pub identifiers: Vec<String>,
    pub outcome: Vec<String>,
    pub post_event: Vec<String>,
    pub non_predictor: Vec<String>,
    pub patterns: Vec<PatternRule>,
}

impl ExclusionRules {
    pub fn is_empty(&self) -> bool {
        self.identifiers.is_empty()
            && self.outcome.is_empty()
            && self.post_event.is_empty()
            && self.non_predictor.is_empty()
            && self.patterns.is_empty()
    }

    fn named(&self) -> impl Iterator<Item = (ExclusionClass, &str)> {
        let ids = self.identifiers.iter().map(|s| (ExclusionClass::Identifier, s.as_str()));
        let out = self.outcome.iter().map(|s| (ExclusionClass::Outcome, s.as_str()));
        let post = self.post_event.iter().map(|s| (ExclusionClass::PostEvent, s.as_str()));
        let non = self.non_predictor.iter().map(|s| (ExclusionClass::NonPredictor, s.as_str()));
        ids.chain(out).chain(post).chain(non)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionEntry {
    pub column: String,
    pub class: ExclusionClass,
    /// The rule that fired: a column name or a pattern.
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExclusionOutcome {
    /// Table with excluded columns removed.
    pub table: RawTable,
    /// The removed columns, kept for descriptive summaries.
    pub removed: RawTable,
    pub log: Vec<ExclusionEntry>,
    pub warnings: Vec<String>,
}

/// Removes identifier, outcome, post-event and other non-predictor columns.
///
/// A named rule that matches no column produces a warning rather than an
/// error. The first rule matching a column determines its logged class.
pub fn apply_exclusions(table: &RawTable, rules: &ExclusionRules) -> Result<ExclusionOutcome, DataError> {
    let patterns = rules
        .patterns
        .iter()
        .map(|p| {
            Regex::new(&p.regex)
                .map(|re| (p.class, p.regex.as_str(), re))
                .map_err(|e| DataError::BadPattern(format!("{}: {e}", p.regex)))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut log = Vec::new();
    let mut warnings = Vec::new();
    let mut removed: BTreeSet<usize> = BTreeSet::new();

    for (class, name) in rules.named() {
        match table.column_index(name.trim()) {
            Some(idx) => {
                if removed.insert(idx) {
                    log.push(ExclusionEntry { column: table.header[idx].clone(), class, rule: name.to_string() });
                }
            }
            None => warnings.push(format!("exclusion rule {name:?} matches no column")),
        }
    }
    for (class, src, re) in &patterns {
        let mut hit = false;
        for (idx, h) in table.header.iter().enumerate() {
            if re.is_match(h) {
                hit = true;
                if removed.insert(idx) {
                    log.push(ExclusionEntry { column: h.clone(), class: *class, rule: format!("/{src}/") });
                }
            }
        }
        if !hit {
            warnings.push(format!("exclusion pattern /{src}/ matches no column"));
        }
    }

    let set: HashSet<usize> = removed.into_iter().collect();
    let (kept, dropped) = table.partition_columns(&set);
    Ok(ExclusionOutcome { table: kept, removed: dropped, log, warnings })
}
