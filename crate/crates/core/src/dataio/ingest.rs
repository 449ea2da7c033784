use std::collections::HashSet;

use super::{apply_exclusions, build_cohort, parse_csv, Cohort, CohortSchema, DataError, ExclusionClass, ExclusionRules, GradeMap, LabelSpec, RawTable};

/// A raw export turned into a predictor cohort plus a descriptive cohort of
/// the excluded non-identifier columns (for baseline summaries only).
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub cohort: Cohort,
    pub descriptive: Option<Cohort>,
    pub schema: CohortSchema,
}

/// Row identifiers from `id_column`, or from the first identifier exclusion
/// when unset. Falls back to 1-based row numbers.
fn row_ids(table: &RawTable, id_column: Option<&str>, rules: &ExclusionRules) -> Result<Option<Vec<String>>, DataError> {
    let name = match id_column {
        Some(c) => Some(c),
        None => rules.identifiers.iter().map(String::as_str).find(|c| table.column_index(c.trim()).is_some()),
    };
    let Some(name) = name else { return Ok(None) };
    let idx = table
        .column_index(name.trim())
        .ok_or_else(|| DataError::SchemaMismatch(format!("id column {name:?} not found")))?;
    Ok(Some(table.column(idx).map(|s| s.trim().to_string()).collect()))
}

pub fn ingest(
    bytes: &[u8],
    label: &LabelSpec,
    id_column: Option<&str>,
    rules: &ExclusionRules,
    grades: &GradeMap,
) -> Result<Ingested, DataError> {
    let table = parse_csv(bytes)?;
    if table.column_index(label.column.trim()).is_none() {
        return Err(DataError::MissingLabelColumn(label.column.clone()));
    }
    let ids = row_ids(&table, id_column, rules)?;
    let outcome = apply_exclusions(&table, rules)?;
    if outcome.log.iter().any(|e| e.column == label.column.trim()) {
        return Err(DataError::SchemaMismatch(format!("label column {:?} is listed in an exclusion rule", label.column)));
    }
    let cohort = build_cohort(&outcome.table, label, grades, ids.clone())?;

    let described: Vec<&str> = outcome
        .log
        .iter()
        .filter(|e| e.class != ExclusionClass::Identifier)
        .map(|e| e.column.as_str())
        .collect();
    let descriptive = if described.is_empty() {
        None
    } else {
        let label_idx = table.column_index(label.column.trim()).expect("checked above");
        let keep: HashSet<usize> = std::iter::once(label_idx)
            .chain(described.iter().filter_map(|c| table.column_index(c)))
            .collect();
        let drop: HashSet<usize> = (0..table.n_cols()).filter(|c| !keep.contains(c)).collect();
        let (sub, _) = table.partition_columns(&drop);
        Some(build_cohort(&sub, label, grades, ids)?)
    };

    let schema = CohortSchema {
        label_column: label.column.trim().to_string(),
        columns: cohort.columns().to_vec(),
        exclusions: outcome.log,
        warnings: outcome.warnings,
        rejected_rows: table.rejected_rows,
    };
    Ok(Ingested { cohort, descriptive, schema })
}
