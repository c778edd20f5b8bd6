//! Data ingestion and report emission for the `alphaclust` command line.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use alphaclust::compositions::{closure, CompositionMatrix};
use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("line {line}: cannot parse {field:?} as a number")]
    Parse { line: usize, field: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    Shape { line: usize, expected: usize, found: usize },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] alphaclust::Error),
}

impl CliError {
    /// 0 success, 2 validation error, 3 numerical failure, 4 I/O error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 4,
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }

    fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            message: err.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    pub header: bool,
    pub delimiter: u8,
    /// Divide each row by its sum instead of requiring rows to sum to one.
    pub close: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            header: false,
            delimiter: b',',
            close: false,
        }
    }
}

/// Reads a rectangular numeric table. Line numbers in errors are 1-based
/// and count the header line.
pub fn load_matrix(path: &Path, options: &LoadOptions) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(options.header)
        .delimiter(options.delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| CliError::io(path, e))?;
        let line = record.position().map_or(rows + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(CliError::Shape {
                line,
                expected,
                found: record.len(),
            });
        }
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| CliError::Parse {
                line,
                field: field.to_string(),
            })?;
            values.push(v);
        }
        rows += 1;
    }
    let width = width.ok_or_else(|| CliError::Invalid(format!("{} holds no data rows", path.display())))?;
    Ok(DMatrix::from_row_slice(rows, width, &values))
}

/// Reads compositions, closing rows when asked.
pub fn load_compositions(path: &Path, options: &LoadOptions) -> Result<CompositionMatrix> {
    let raw = load_matrix(path, options)?;
    let x = if options.close {
        closure(&raw)?
    } else {
        CompositionMatrix::new(raw)?
    };
    log::info!("{}: {} rows x {} parts", path.display(), x.nrows(), x.ncols());
    Ok(x)
}

/// Reads one label per line, 1-based, and returns them 0-based.
pub fn load_labels(path: &Path, header: bool) -> Result<Vec<usize>> {
    let m = load_matrix(path, &LoadOptions { header, ..LoadOptions::default() })?;
    if m.ncols() != 1 {
        return Err(CliError::Invalid(format!("{}: expected a single label column", path.display())));
    }
    m.iter()
        .enumerate()
        .map(|(i, &v)| {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize - 1)
            } else {
                Err(CliError::Invalid(format!("label {v} on row {} is not a positive integer", i + 1)))
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Rows of strings written as CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// Shortest decimal form that reads back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_table(path: &Path, table: &Table) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    if !table.header.is_empty() {
        w.write_record(&table.header).map_err(|e| CliError::io(path, e))?;
    }
    for row in &table.rows {
        w.write_record(row).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = File::create(path).map_err(|e| CliError::io(path, e))?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| CliError::io(path, e))?;
    writeln!(f).map_err(|e| CliError::io(path, e))
}

/// Numeric matrix with a header row.
pub fn matrix_table(m: &DMatrix<f64>, header: &[String]) -> Table {
    Table {
        header: header.to_vec(),
        rows: m.row_iter().map(|r| r.iter().map(|&v| fmt_f64(v)).collect()).collect(),
    }
}

pub fn write_compositions(path: &Path, x: &CompositionMatrix) -> Result<()> {
    let header: Vec<String> = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
    write_table(path, &matrix_table(x.values(), &header))
}

/// Labels written 1-based, one per line under a `label` header.
pub fn labels_table(labels: &[usize]) -> Table {
    let mut t = Table::new(&["label"]);
    for l in labels {
        t.push(vec![(l + 1).to_string()]);
    }
    t
}

/// Writes `name.csv` or `name.json` into `dir` and returns the path.
pub fn emit_report<T: Serialize>(dir: &Path, name: &str, format: Format, value: &T, table: &Table) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = match format {
        Format::Csv => {
            let p = dir.join(format!("{name}.csv"));
            write_table(&p, table)?;
            p
        }
        Format::Json => {
            let p = dir.join(format!("{name}.json"));
            write_json(&p, value)?;
            p
        }
    };
    Ok(path)
}

/// Everything needed to rerun a command.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub args: Vec<String>,
    pub input: Option<PathBuf>,
    pub seed: u64,
    pub threads: usize,
    pub version: String,
    pub wall_secs: f64,
    pub outputs: Vec<PathBuf>,
    /// Subcommand-specific settings after defaults were applied.
    pub config: serde_json::Value,
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(format!("{}_manifest.json", manifest.command));
    write_json(&path, manifest)?;
    Ok(path)
}
