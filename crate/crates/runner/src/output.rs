//! CSV tables, summaries and atomic file output.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::error::RunError;

/// Bumped whenever a CSV header or summary field changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

/// Shortest decimal that round-trips; empty for NaN (an undefined cell).
pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, RunError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let to_io = |e: csv::Error| RunError::Io(std::io::Error::other(e));
        w.write_record(&self.header).map_err(to_io)?;
        for r in &self.rows {
            w.write_record(r).map_err(to_io)?;
        }
        w.into_inner().map_err(|e| RunError::Io(e.into_error()))
    }
}

/// Writes via a temporary file in the same directory and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| RunError::Io(e.error))?;
    Ok(())
}

/// The files of one run: named CSV tables and a JSON summary.
#[derive(Debug, Clone, Default)]
pub struct Record {
    pub tables: Vec<(String, Table)>,
    pub summary: Map<String, Value>,
}

impl Record {
    /// Writes `<stem>_<table>.csv` and `<stem>_summary.json` into `dir`; returns the paths.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>, RunError> {
        let mut paths = Vec::new();
        for (name, t) in &self.tables {
            let p = dir.join(format!("{stem}_{name}.csv"));
            write_atomic(&p, &t.to_csv()?)?;
            paths.push(p);
        }
        let p = dir.join(format!("{stem}_summary.json"));
        let mut text = serde_json::to_string_pretty(&self.summary)
            .map_err(|e| RunError::Invariant(format!("summary serialization: {e}")))?;
        text.push('\n');
        write_atomic(&p, text.as_bytes())?;
        paths.push(p);
        Ok(paths)
    }
}
