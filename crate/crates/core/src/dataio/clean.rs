use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{parse_csv, Cohort, ColumnKind, ColumnMeta, DataError, ExclusionEntry};

/// Sidecar describing a cleaned cohort CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSchema {
    pub label_column: String,
    pub columns: Vec<ColumnMeta>,
    #[serde(default)]
    pub exclusions: Vec<ExclusionEntry>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub rejected_rows: usize,
}

const ROW_ID: &str = "row_id";

/// Writes a cohort as clean CSV: `row_id`, the label as `1`/`0`, then one
/// column per predictor. Continuous values use the shortest round-trip
/// decimal form, categoricals their level text, and missing cells are empty.
pub fn write_clean_csv(cohort: &Cohort, label_column: &str) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![ROW_ID.to_string(), label_column.to_string()];
    header.extend(cohort.columns().iter().map(|c| c.name.clone()));
    w.write_record(&header).expect("in-memory write");
    for r in 0..cohort.n() {
        let mut rec = vec![cohort.row_ids()[r].clone(), if cohort.labels()[r] { "1" } else { "0" }.to_string()];
        for (c, meta) in cohort.columns().iter().enumerate() {
            rec.push(match cohort.value(r, c) {
                None => String::new(),
                Some(v) if meta.kind == ColumnKind::Categorical => meta.levels[v as usize].clone(),
                Some(v) => format!("{v}"),
            });
        }
        w.write_record(&rec).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Reads a clean CSV written by [`write_clean_csv`] back into a cohort,
/// taking column metadata from the schema.
pub fn read_clean_csv(bytes: &[u8], schema: &CohortSchema) -> Result<Cohort, DataError> {
    let table = parse_csv(bytes)?;
    let mismatch = |m: String| DataError::SchemaMismatch(m);
    let mut expected = vec![ROW_ID.to_string(), schema.label_column.clone()];
    expected.extend(schema.columns.iter().map(|c| c.name.clone()));
    if table.header != expected {
        return Err(mismatch("clean CSV header does not match schema".into()));
    }
    if table.rejected_rows > 0 {
        return Err(mismatch(format!("{} ragged rows in clean CSV", table.rejected_rows)));
    }
    let n = table.n_rows();
    let labels = table
        .column(1)
        .enumerate()
        .map(|(r, v)| match v {
            "1" => Ok(true),
            "0" => Ok(false),
            other => Err(mismatch(format!("row {}: label {other:?} is not 0/1", r + 1))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let row_ids: Vec<String> = table.column(0).map(str::to_string).collect();
    let mut data = Vec::with_capacity(schema.columns.len());
    for (c, meta) in schema.columns.iter().enumerate() {
        let levels: HashMap<&str, usize> = meta.levels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let col = table
            .column(c + 2)
            .enumerate()
            .map(|(r, cell)| {
                if cell.is_empty() {
                    return Ok(None);
                }
                let bad = || mismatch(format!("column {:?} row {}: {cell:?}", meta.name, r + 1));
                match meta.kind {
                    ColumnKind::Categorical => levels.get(cell).map(|&i| Some(i as f64)).ok_or_else(bad),
                    _ => cell.parse::<f64>().ok().filter(|v| v.is_finite()).map(Some).ok_or_else(bad),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let missing = col.iter().filter(|v| v.is_none()).count() as f64 / n as f64;
        if missing != meta.missing_fraction {
            return Err(mismatch(format!("column {:?}: missing fraction differs from schema", meta.name)));
        }
        data.push(col);
    }
    Cohort::from_columns(schema.columns.clone(), data, labels, row_ids)
}
