//! Numeric table ingestion.
//!
//! Row and column positions in errors are 1-based and count every line of
//! the file, header included.

use std::fs;
use std::path::Path;

use clap::ValueEnum;
use dvs_core::design::RegressionDataset;
use dvs_core::{DMatrix, DVector, DesignMatrix, DvsError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Tsv,
    Whitespace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// Each line is one sample; samples become the columns of `A`.
    SamplesAsRows,
    /// The table is `A` itself.
    ColumnsAsGiven,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("row {row} has {found} cells, expected {expected}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("non-numeric cell {cell:?} at row {row}, column {col}")]
    NonNumeric { row: usize, col: usize, cell: String },
    #[error("malformed input at row {row}: {message}")]
    Malformed { row: usize, message: String },
    #[error("input contains no data rows")]
    Empty,
    #[error("response column {0:?} not found")]
    MissingResponse(String),
    #[error(transparent)]
    Matrix(#[from] DvsError),
}

impl LoadError {
    /// `(row, col)` of the offending cell, when known.
    pub fn location(&self) -> (Option<usize>, Option<usize>) {
        match self {
            LoadError::Ragged { row, .. } | LoadError::Malformed { row, .. } => (Some(*row), None),
            LoadError::NonNumeric { row, col, .. } => (Some(*row), Some(*col)),
            _ => (None, None),
        }
    }
}

/// A rectangular numeric table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.nrows(), self.ncols(), |i, j| self.rows[i][j])
    }
}

/// SHA-256 of the raw input bytes, hex encoded.
pub fn fingerprint(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn parse_cells<'a, I>(cells: I, line: usize, expected: &mut Option<usize>) -> Result<Vec<f64>, LoadError>
where
    I: Iterator<Item = &'a str>,
{
    let mut values = Vec::new();
    for (col, cell) in cells.enumerate() {
        let cell = cell.trim();
        let value: f64 = cell.parse().map_err(|_| LoadError::NonNumeric {
            row: line,
            col: col + 1,
            cell: cell.to_string(),
        })?;
        if !value.is_finite() {
            return Err(LoadError::NonNumeric { row: line, col: col + 1, cell: cell.to_string() });
        }
        values.push(value);
    }
    match *expected {
        Some(width) if width != values.len() => {
            Err(LoadError::Ragged { row: line, expected: width, found: values.len() })
        }
        _ => {
            *expected = Some(values.len());
            Ok(values)
        }
    }
}

/// Parses delimited text into a table.
pub fn parse_table(text: &str, format: Format, has_header: bool) -> Result<Table, LoadError> {
    let mut header = None;
    let mut rows = Vec::new();
    let mut width = None;
    match format {
        Format::Csv | Format::Tsv => {
            let mut reader = csv::ReaderBuilder::new()
                .delimiter(if format == Format::Csv { b',' } else { b'\t' })
                .has_headers(false)
                .flexible(true)
                .comment(Some(b'#'))
                .from_reader(text.as_bytes());
            for record in reader.records() {
                let record = record.map_err(|e| LoadError::Malformed {
                    row: e.position().map_or(0, |p| p.line() as usize),
                    message: e.to_string(),
                })?;
                let line = record.position().map_or(0, |p| p.line() as usize);
                if has_header && header.is_none() {
                    header = Some(record.iter().map(|c| c.trim().to_string()).collect());
                    continue;
                }
                rows.push(parse_cells(record.iter(), line, &mut width)?);
            }
        }
        Format::Whitespace => {
            for (i, raw) in text.lines().enumerate() {
                let content = raw.trim();
                if content.is_empty() || content.starts_with('#') {
                    continue;
                }
                if has_header && header.is_none() {
                    header = Some(content.split_whitespace().map(str::to_string).collect());
                    continue;
                }
                rows.push(parse_cells(content.split_whitespace(), i + 1, &mut width)?);
            }
        }
    }
    if rows.is_empty() || width == Some(0) {
        return Err(LoadError::Empty);
    }
    Ok(Table { header, rows })
}

/// File contents with their fingerprint.
pub fn read_source(path: &Path) -> Result<(String, String), LoadError> {
    let bytes = fs::read(path).map_err(|e| LoadError::Io { path: path.display().to_string(), message: e.to_string() })?;
    let hash = fingerprint(&bytes);
    let text = String::from_utf8(bytes).map_err(|e| LoadError::Malformed { row: 0, message: e.to_string() })?;
    Ok((text, hash))
}

/// `A` from a table under the given orientation.
pub fn table_to_design(table: &Table, orientation: Orientation, rank_tol: f64) -> Result<DesignMatrix, LoadError> {
    let entries = match orientation {
        Orientation::ColumnsAsGiven => table.to_matrix(),
        Orientation::SamplesAsRows => table.to_matrix().transpose(),
    };
    Ok(DesignMatrix::with_rank_tol(entries, rank_tol)?)
}

#[derive(Debug, Clone)]
pub struct LoadedMatrix {
    pub design: DesignMatrix,
    pub fingerprint: String,
}

pub fn load_matrix(
    path: &Path,
    format: Format,
    has_header: bool,
    orientation: Orientation,
    rank_tol: f64,
) -> Result<LoadedMatrix, LoadError> {
    let (text, fingerprint) = read_source(path)?;
    let table = parse_table(&text, format, has_header)?;
    Ok(LoadedMatrix { design: table_to_design(&table, orientation, rank_tol)?, fingerprint })
}

/// Locates the response column: a 1-based position, `last`, or a header
/// name.
pub fn response_index(table: &Table, response: &str) -> Result<usize, LoadError> {
    let width = table.ncols();
    if response == "last" {
        return Ok(width - 1);
    }
    if let Ok(position) = response.parse::<usize>() {
        return if (1..=width).contains(&position) {
            Ok(position - 1)
        } else {
            Err(LoadError::MissingResponse(response.to_string()))
        };
    }
    table
        .header
        .as_ref()
        .and_then(|h| h.iter().position(|name| name == response))
        .ok_or_else(|| LoadError::MissingResponse(response.to_string()))
}

/// Splits a samples-as-rows table into features and response.
pub fn table_to_regression(table: &Table, response: &str) -> Result<RegressionDataset, LoadError> {
    let target = response_index(table, response)?;
    if table.ncols() < 2 {
        return Err(LoadError::MissingResponse(response.to_string()));
    }
    let features: Vec<usize> = (0..table.ncols()).filter(|&c| c != target).collect();
    let x = DMatrix::from_fn(table.nrows(), features.len(), |i, j| table.rows[i][features[j]]);
    let y = DVector::from_iterator(table.nrows(), table.rows.iter().map(|r| r[target]));
    Ok(RegressionDataset::new(x, y)?)
}

#[derive(Debug, Clone)]
pub struct LoadedRegression {
    pub data: RegressionDataset,
    pub fingerprint: String,
}

pub fn load_regression(
    path: &Path,
    format: Format,
    has_header: bool,
    response: &str,
    standardize: bool,
) -> Result<LoadedRegression, LoadError> {
    let (text, fingerprint) = read_source(path)?;
    let table = parse_table(&text, format, has_header)?;
    let data = table_to_regression(&table, response)?;
    let data = if standardize { data.standardized() } else { data };
    Ok(LoadedRegression { data, fingerprint })
}
