use std::collections::HashSet;

use super::DataError;

/// A header plus rectangular string rows, straight from a CSV export.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Rows dropped because their cell count differed from the header.
    pub rejected_rows: usize,
}

impl RawTable {
    /// Builds a table, enforcing unique trimmed header names and rejecting
    /// ragged rows.
    pub fn new(header: Vec<String>, rows: Vec<Vec<String>>) -> Result<Self, DataError> {
        let header: Vec<String> = header.into_iter().map(|h| h.trim().to_string()).collect();
        let mut seen = HashSet::new();
        for h in &header {
            if !seen.insert(h.as_str()) {
                return Err(DataError::DuplicateHeader(h.clone()));
            }
        }
        let width = header.len();
        let before = rows.len();
        let rows: Vec<Vec<String>> = rows.into_iter().filter(|r| r.len() == width).collect();
        let rejected_rows = before - rows.len();
        if rows.is_empty() {
            return Err(DataError::NoDataRows);
        }
        Ok(Self { header, rows, rejected_rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.header.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn column(&self, idx: usize) -> impl Iterator<Item = &str> + '_ {
        self.rows.iter().map(move |r| r[idx].as_str())
    }

    /// Splits off the listed columns, returning `(kept, removed)`.
    pub fn partition_columns(&self, remove: &HashSet<usize>) -> (RawTable, RawTable) {
        let pick = |keep: bool| -> RawTable {
            let cols: Vec<usize> =
                (0..self.n_cols()).filter(|c| remove.contains(c) != keep).collect();
            RawTable {
                header: cols.iter().map(|&c| self.header[c].clone()).collect(),
                rows: self
                    .rows
                    .iter()
                    .map(|r| cols.iter().map(|&c| r[c].clone()).collect())
                    .collect(),
                rejected_rows: self.rejected_rows,
            }
        };
        (pick(true), pick(false))
    }
}

/// Read access to table cells.
///
/// Cohort construction goes through this trait so that tests can observe
/// exactly which cells are touched.
pub trait CellSource: Sync {
    fn n_rows(&self) -> usize;
    fn header(&self) -> &[String];
    fn cell(&self, row: usize, col: usize) -> &str;
}

impl CellSource for RawTable {
    fn n_rows(&self) -> usize {
        self.rows.len()
    }

    fn header(&self) -> &[String] {
        &self.header
    }

    fn cell(&self, row: usize, col: usize) -> &str {
        &self.rows[row][col]
    }
}

/// Parses UTF-8 CSV bytes (RFC 4180 quoting, mandatory header row).
pub fn parse_csv(bytes: &[u8]) -> Result<RawTable, DataError> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Err(DataError::EmptyInput);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(csv_error)?.iter().map(str::to_string).collect::<Vec<_>>(),
        None => return Err(DataError::EmptyInput),
    };
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(csv_error)?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    RawTable::new(header, rows)
}

fn csv_error(e: csv::Error) -> DataError {
    let line = e.position().map(|p| p.line());
    match e.kind() {
        csv::ErrorKind::Utf8 { .. } => DataError::Encoding { line },
        _ => DataError::Csv { line, message: e.to_string() },
    }
}
