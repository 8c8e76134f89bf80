//! Versioned delimiter-separated tables and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

fn header_line(kind: &str) -> String {
    format!("# diffest-{kind} v{FORMAT_VERSION}")
}

/// Writes `# diffest-<kind> v1[; units]`, a column header, and the rows.
pub fn write_table(
    path: &Path,
    kind: &str,
    units: &str,
    columns: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> CliResult<()> {
    let mut buf = Vec::new();
    let mut first = header_line(kind);
    if !units.is_empty() {
        first.push_str("; ");
        first.push_str(units);
    }
    writeln!(buf, "{first}").expect("write to Vec");
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let csv_err = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
        w.write_record(columns).map_err(csv_err)?;
        for row in rows {
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| CliError::io(path, e))?;
    }
    fs::write(path, buf).map_err(|e| CliError::io(path, e))
}

/// Rows of a versioned table (column header excluded).
#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn read_table(path: &Path, kind: &str) -> CliResult<Table> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let (first, rest) = text.split_once('\n').unwrap_or((text.as_str(), ""));
    let expected = header_line(kind);
    if !(first == expected || first.starts_with(&format!("{expected};"))) {
        return Err(CliError::Data(format!(
            "{}: expected header `{expected}`, found `{first}`",
            path.display()
        )));
    }
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(rest.as_bytes());
    let columns = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Data(format!("{}: row {i}: {e}", path.display())))?;
        rows.push(rec.iter().map(str::to_owned).collect());
    }
    Ok(Table { columns, rows })
}

pub fn parse_f64(cell: &str, row: usize, column: &str, path: &Path) -> CliResult<f64> {
    let v: f64 = cell.trim().parse().map_err(|_| {
        CliError::Data(format!("{}: row {row}, column {column}: `{cell}` is not a number", path.display()))
    })?;
    if !v.is_finite() {
        return Err(CliError::Data(format!(
            "{}: row {row}, column {column}: non-finite value {v}",
            path.display()
        )));
    }
    Ok(v)
}

pub fn parse_usize(cell: &str, row: usize, column: &str, path: &Path) -> CliResult<usize> {
    cell.trim().parse().map_err(|_| {
        CliError::Data(format!("{}: row {row}, column {column}: `{cell}` is not an index", path.display()))
    })
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub format: String,
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub timings_seconds: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<serde_json::Value>,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn new(command: &str, config: &impl Serialize) -> Self {
        Self {
            format: header_line("manifest").trim_start_matches("# ").to_owned(),
            command: command.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            seeds: BTreeMap::new(),
            timings_seconds: BTreeMap::new(),
            convergence: None,
            files: Vec::new(),
        }
    }

    /// Records `relative` (a path under `root`) with its checksum.
    pub fn add_file(&mut self, root: &Path, relative: &str) -> CliResult<()> {
        let full: PathBuf = root.join(relative);
        let bytes = fs::metadata(&full).map_err(|e| CliError::io(&full, e))?.len();
        self.files.push(FileEntry {
            path: relative.to_owned(),
            sha256: sha256_file(&full)?,
            bytes,
        });
        Ok(())
    }

    pub fn write(&mut self, root: &Path) -> CliResult<()> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        write_json(&root.join("manifest.json"), self)
    }
}

pub fn ensure_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}
