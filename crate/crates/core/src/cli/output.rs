//! Tabular output and run manifests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;

/// Full-precision rendering (17 significant digits).
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Comma-separated table with a header row.
#[derive(Debug, Clone)]
pub struct Table {
    name: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.to_string(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn with_header(name: &str, header: Vec<String>) -> Self {
        Self { name: name.to_string(), header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_nums(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&v| num(v)).collect());
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.header.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// Everything a subcommand produces.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub tables: Vec<Table>,
    pub results: toml::Table,
}

impl Artifacts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn result(&mut self, key: &str, value: impl Into<toml::Value>) {
        self.results.insert(key.to_string(), value.into());
    }
}

/// Writes every table and `manifest.toml` into `dir`.
pub fn write_run(dir: &Path, artifacts: &Artifacts, mut manifest: toml::Table) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut files = Vec::new();
    for table in &artifacts.tables {
        let path = dir.join(table.file_name());
        fs::write(&path, table.render())?;
        files.push(toml::Value::from(table.file_name()));
        written.push(path);
    }
    manifest.insert("files".into(), toml::Value::Array(files));
    manifest.insert("results".into(), toml::Value::Table(artifacts.results.clone()));
    let text = toml::to_string(&manifest).map_err(|e| crate::error::Error::Io(e.to_string()))?;
    let path = dir.join("manifest.toml");
    fs::write(&path, text)?;
    written.push(path);
    Ok(written)
}
