//! CSV ingestion and output.
//!
//! Input files need a header row. One column is the response; every other
//! column becomes a predictor, and its position among the remaining columns
//! (0-based, file order) is the variable index used in every report.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use fbis_core::Dataset;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// `row` counts data rows from 1 (the header is row 0), `column` counts from 1.
    #[error("row {row}, column {column}: {detail}")]
    Parse {
        row: usize,
        column: usize,
        detail: String,
    },
    #[error("no column matches response selector {0:?}")]
    MissingColumn(String),
    #[error("row {row}, column {column}: non-finite value {value:?}")]
    NonNumericCell {
        row: usize,
        column: usize,
        value: String,
    },
    #[error("need at least 2 data rows, found {0}")]
    TooFewRows(usize),
    #[error("need at least one predictor column")]
    NoPredictors,
    #[error(transparent)]
    Core(#[from] fbis_core::Error),
}

impl IoError {
    pub fn code(&self) -> &'static str {
        match self {
            IoError::Io { .. } => "IoError",
            IoError::Parse { .. } => "ParseError",
            IoError::MissingColumn(_) => "MissingColumn",
            IoError::NonNumericCell { .. } => "NonNumericCell",
            IoError::TooFewRows(_) => "TooFewRows",
            IoError::NoPredictors => "NoPredictors",
            IoError::Core(e) => e.code(),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> IoError {
    let row = e.position().map_or(0, |p| p.record() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => IoError::Io {
            path: path.to_path_buf(),
            source,
        },
        kind => IoError::Parse {
            row,
            column: 0,
            detail: format!("{kind:?}"),
        },
    }
}

/// Resolves a response selector: a header name, or else a 0-based column index.
fn response_column(headers: &[String], selector: &str) -> Result<usize, IoError> {
    if let Some(k) = headers.iter().position(|h| h == selector) {
        return Ok(k);
    }
    match selector.parse::<usize>() {
        Ok(k) if k < headers.len() => Ok(k),
        _ => Err(IoError::MissingColumn(selector.to_string())),
    }
}

/// Reads a dataset from CSV text.
pub fn parse_dataset<R: std::io::Read>(reader: R, selector: &str, origin: &Path) -> Result<Dataset, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_err(origin, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let response = response_column(&headers, selector)?;
    if headers.len() < 2 {
        return Err(IoError::NoPredictors);
    }
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_err(origin, e))?;
        let row = r + 1;
        for (c, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| IoError::Parse {
                row,
                column: c + 1,
                detail: format!("cannot parse {cell:?} as a number"),
            })?;
            if !value.is_finite() {
                return Err(IoError::NonNumericCell {
                    row,
                    column: c + 1,
                    value: cell.to_string(),
                });
            }
            columns[c].push(value);
        }
    }
    let n = columns[0].len();
    if n < 2 {
        return Err(IoError::TooFewRows(n));
    }
    let y = columns.remove(response);
    let mut names = headers;
    names.remove(response);
    Ok(Dataset::from_columns(y, columns)?.with_names(names)?)
}

pub fn read_dataset(path: &Path, selector: &str) -> Result<Dataset, IoError> {
    let file = File::open(path).map_err(io_err(path))?;
    parse_dataset(file, selector, path)
}

/// Fixed-format float with 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `y` followed by the predictors. Unnamed predictors become `x0, x1, …`.
pub fn write_dataset<W: Write>(data: &Dataset, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["y".to_string()];
    match data.names() {
        Some(names) => header.extend(names.iter().cloned()),
        None => header.extend((0..data.p()).map(|j| format!("x{j}"))),
    }
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(data.p() + 1);
    for i in 0..data.n() {
        record.clear();
        record.push(format_float(data.y()[i]));
        record.extend((0..data.p()).map(|j| format_float(data.column(j)[i])));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset_file(data: &Dataset, path: &Path) -> Result<(), IoError> {
    let file = File::create(path).map_err(io_err(path))?;
    write_dataset(data, std::io::BufWriter::new(file)).map_err(|e| csv_err(path, e))
}
