//! Writing reports: one JSON document per run, or CSV tables, each carrying the effective config.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::Value;

use crate::config::{Format, RunConfig};
use crate::Failure;

pub struct Table {
    /// File stem under the output directory.
    pub name: String,
    pub csv: String,
}

pub struct Report {
    pub command: &'static str,
    pub document: Value,
    /// The first table is the CSV rendering of `document`; any others are side outputs
    /// (histograms, traces) that are only written to an output directory.
    pub tables: Vec<Table>,
    pub certified: bool,
}

/// Builds a CSV table with the `csv` writer so that quoting is handled.
pub fn csv_table<I>(header: &[&str], rows: I) -> Result<String, Failure>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Error(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Failure::Error(e.to_string()))
}

pub fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn config_line(config: &RunConfig) -> Result<String, Failure> {
    Ok(format!("# config: {}\n", serde_json::to_string(config)?))
}

pub fn emit(report: &Report, config: &RunConfig) -> Result<(), Failure> {
    let header = config_line(config)?;
    match &config.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
            let (primary, side) = report
                .tables
                .split_first()
                .map_or((None, &[][..]), |(p, s)| (Some(p), s));
            match config.format {
                Format::Json => {
                    let path = dir.join(format!("{}.json", report.command));
                    let text = serde_json::to_string_pretty(&report.document)? + "\n";
                    fs::write(&path, text).map_err(|e| io_failure(&path, e))?;
                }
                Format::Csv => {
                    if let Some(t) = primary {
                        write_table(dir, t, &header)?;
                    }
                }
            }
            for t in side {
                write_table(dir, t, &header)?;
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            match config.format {
                Format::Json => {
                    serde_json::to_writer_pretty(&mut stdout, &report.document)?;
                    writeln!(stdout)?;
                }
                Format::Csv => {
                    if let Some(t) = report.tables.first() {
                        write!(stdout, "{header}{}", t.csv)?;
                    }
                }
            }
            if report.tables.len() > 1 {
                eprintln!(
                    "note: {} additional table(s) are written only with --out",
                    report.tables.len() - 1
                );
            }
        }
    }
    Ok(())
}

fn write_table(dir: &Path, table: &Table, header: &str) -> Result<(), Failure> {
    let path = dir.join(format!("{}.csv", table.name));
    fs::write(&path, format!("{header}{}", table.csv)).map_err(|e| io_failure(&path, e))
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Error(format!("{}: {e}", path.display()))
}
