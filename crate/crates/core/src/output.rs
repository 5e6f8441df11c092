//! CSV tables with a one-line JSON metadata header, written atomically.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunConfig;
use crate::ensemble::Sample;

pub const VERSION: &str = env!("EE_LAB_VERSION");

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("CSV encoding failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path} has no metadata line")]
    MissingMetadata { path: PathBuf },
    #[error("metadata in {path} is malformed: {source}")]
    BadMetadata { path: PathBuf, source: serde_json::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub version: String,
    pub master_seed: u64,
    pub config: RunConfig,
}

impl Metadata {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            version: VERSION.to_string(),
            master_seed: config.master_seed,
            config: config.clone(),
        }
    }
}

/// Header plus rows of already formatted cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip decimal form.
pub fn cell<T: std::fmt::Display>(x: T) -> String {
    x.to_string()
}

pub fn render(meta: &Metadata, table: &Table) -> Result<Vec<u8>, OutputError> {
    let mut buf = Vec::new();
    buf.push(b'#');
    buf.push(b' ');
    buf.extend(serde_json::to_vec(meta).expect("metadata serializes"));
    buf.push(b'\n');
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(&table.columns)?;
        for row in &table.rows {
            w.write_record(row)?;
        }
        w.flush().map_err(csv::Error::from)?;
    }
    Ok(buf)
}

/// Writes via a temporary file in the target directory and an atomic rename,
/// so a failed run never leaves a partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), OutputError> {
    let io = |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn write_table(path: &Path, meta: &Metadata, table: &Table) -> Result<(), OutputError> {
    write_atomic(path, &render(meta, table)?)
}

pub fn samples_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".samples.csv");
    PathBuf::from(name)
}

pub fn samples_table(samples: &[Sample]) -> Table {
    let mut t = Table::new(&["realization_index", "seed", "entropy"]);
    for s in samples {
        t.push(vec![cell(s.index), cell(s.seed), cell(s.entropy)]);
    }
    t
}

/// Metadata from the first line of a file written by [`write_table`].
pub fn read_metadata(path: &Path) -> Result<Metadata, OutputError> {
    let text = std::fs::read_to_string(path).map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let line = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix('#'))
        .ok_or_else(|| OutputError::MissingMetadata {
            path: path.to_path_buf(),
        })?;
    serde_json::from_str(line.trim()).map_err(|source| OutputError::BadMetadata {
        path: path.to_path_buf(),
        source,
    })
}
