//! Deterministic output files: data tables (CSV or aligned structured
//! text), key–value reports, and the per-run manifest.
//!
//! Floats are printed with Rust's shortest exact representation, so repeated
//! runs with the same configuration and seed produce byte-identical files
//! regardless of thread count.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Serialization style selected by `--format`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    /// Comma-separated values with a header row (`<name>.csv`).
    Csv,
    /// Whitespace-aligned columns with a `#`-prefixed header (`<name>.txt`).
    Structured,
}

/// A numeric table with named columns.
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Write under `dir` as `<base>.csv` or `<base>.txt` per the format;
    /// returns the file name written.
    pub fn write(&self, dir: &Path, base: &str, format: OutputFormat) -> std::io::Result<String> {
        let (name, text) = match format {
            OutputFormat::Csv => (format!("{base}.csv"), self.to_csv()),
            OutputFormat::Structured => (format!("{base}.txt"), self.to_structured()),
        };
        fs::write(dir.join(&name), text)?;
        Ok(name)
    }

    fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    fn to_structured(&self) -> String {
        let mut out = String::new();
        out.push_str("# ");
        out.push_str(&self.columns.join(" "));
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&fields.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Read a table written by [`Table::write`] in CSV format: a header row of
/// column names followed by numeric rows.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| format!("{} is empty", path.display()))?;
    let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, String> = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("{} row {}: bad number {f:?}", path.display(), i + 1))
            })
            .collect();
        let row = row?;
        if row.len() != columns.len() {
            return Err(format!(
                "{} row {}: {} fields for {} columns",
                path.display(),
                i + 1,
                row.len(),
                columns.len()
            ));
        }
        rows.push(row);
    }
    Ok((columns, rows))
}

/// A key–value report written as `key = value` lines.
pub struct Report {
    lines: Vec<String>,
}

impl Report {
    pub fn new() -> Self {
        Self { lines: Vec::new() }
    }

    pub fn entry(&mut self, key: &str, value: impl std::fmt::Display) {
        self.lines.push(format!("{key} = {value}"));
    }

    pub fn text_block(&mut self, text: &str) {
        self.lines.push(text.trim_end().to_string());
    }

    /// Write under `dir` as `<name>`; returns the file name.
    pub fn write(&self, dir: &Path, name: &str) -> std::io::Result<String> {
        let mut text = self.lines.join("\n");
        text.push('\n');
        fs::write(dir.join(name), text)?;
        Ok(name.to_string())
    }
}

/// Write `manifest.txt`: toolkit version, invocation echo, output list and
/// the verbatim configuration text.
pub fn write_manifest(
    dir: &Path,
    subcommand: &str,
    seed: u64,
    format: OutputFormat,
    outputs: &[String],
    config_text: &str,
) -> std::io::Result<()> {
    let path = dir.join("manifest.txt");
    let mut f = fs::File::create(path)?;
    writeln!(f, "tool = \"fanolab {}\"", env!("CARGO_PKG_VERSION"))?;
    writeln!(f, "subcommand = \"{subcommand}\"")?;
    writeln!(f, "seed = {seed}")?;
    let format_name = match format {
        OutputFormat::Csv => "csv",
        OutputFormat::Structured => "structured",
    };
    writeln!(f, "format = \"{format_name}\"")?;
    writeln!(f, "outputs = [")?;
    for name in outputs {
        writeln!(f, "  \"{name}\",")?;
    }
    writeln!(f, "]")?;
    writeln!(f)?;
    writeln!(f, "# configuration echo")?;
    for line in config_text.lines() {
        writeln!(f, "# {line}")?;
    }
    Ok(())
}

/// Resolve a data-directory override against the output directory default.
pub fn data_dir(out_dir: &Path, override_path: &Option<String>) -> PathBuf {
    match override_path {
        Some(p) => PathBuf::from(p),
        None => out_dir.to_path_buf(),
    }
}
