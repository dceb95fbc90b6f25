//! JSON report envelope shared by every command.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use fbis_core::screening::ScreeningReport;

use crate::io::IoError;

pub const REPORT_VERSION: &str = "fbis-report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<C, R> {
    pub version: String,
    pub config: C,
    pub result: R,
    pub timings: Timings,
}

impl<C, R> Envelope<C, R> {
    pub fn new(config: C, result: R, total_seconds: f64) -> Self {
        Envelope {
            version: REPORT_VERSION.to_string(),
            config,
            result,
            timings: Timings { total_seconds },
        }
    }
}

/// Result of the `screen` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenResult {
    pub report: ScreeningReport,
    /// Predictor names in index order, when the input had a header.
    pub names: Option<Vec<String>>,
    pub top_k: Option<Vec<usize>>,
    /// `{j : IC_j(h*) < IC_j(∞)}`, present with `--hard`.
    pub hard_set: Option<Vec<usize>>,
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), IoError> {
    let file = File::create(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::to_writer_pretty(BufWriter::new(file), value).map_err(|e| IoError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let file = File::open(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| IoError::Parse {
        row: e.line(),
        column: e.column(),
        detail: e.to_string(),
    })
}
