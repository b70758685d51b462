//! Comparison tables in text, CSV and JSON.

use std::fmt::Write as _;
use std::str::FromStr;

use greenselect_core::EnergySource;
use serde::{Deserialize, Serialize};

/// One classifier's line in the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub classifier: String,
    /// Share of test predictions served by the cheapest chain model.
    pub fraction_of_g: f64,
    /// Model-selection time per test-set pass.
    pub overhead_ms: f64,
    pub accuracy: f64,
    /// Total prediction time per test-set pass.
    pub time_ms: f64,
    /// Energy per test-set pass.
    pub energy_uwh: f64,
    pub energy_source: EnergySource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(Self::Table),
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown format {other:?}; expected table, csv or json")),
        }
    }
}

pub const CSV_HEADER: &str = "classifier,fraction_of_g,overhead_ms,accuracy,time_ms,energy_uwh,energy_source";

/// Renders `rows`. Table and CSV print two decimals; JSON keeps full
/// precision so it parses back to the same values.
pub fn emit_report(rows: &[ReportRow], format: Format) -> String {
    match format {
        Format::Table => table(rows),
        Format::Csv => {
            let mut out = String::from(CSV_HEADER);
            out.push('\n');
            for r in rows {
                let _ = writeln!(
                    out,
                    "{},{:.2},{:.2},{:.2},{:.2},{:.2},{}",
                    csv_field(&r.classifier),
                    r.fraction_of_g,
                    r.overhead_ms,
                    r.accuracy,
                    r.time_ms,
                    r.energy_uwh,
                    r.energy_source
                );
            }
            out
        }
        Format::Json => {
            let mut out = serde_json::to_string_pretty(rows).expect("report rows always serialize");
            out.push('\n');
            out
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn table(rows: &[ReportRow]) -> String {
    let header = ["Classifier", "Fraction of G", "Overhead (ms)", "Accuracy", "Time (ms)", "Energy (uWh)", "Energy source"];
    let cells: Vec<[String; 7]> = rows
        .iter()
        .map(|r| {
            [
                r.classifier.clone(),
                format!("{:.2}", r.fraction_of_g),
                format!("{:.2}", r.overhead_ms),
                format!("{:.2}", r.accuracy),
                format!("{:.2}", r.time_ms),
                format!("{:.2}", r.energy_uwh),
                r.energy_source.to_string(),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let mut line = |fields: &[&str]| {
        let parts: Vec<String> = fields
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (f, w))| if i == 0 || i == 6 { format!("{f:<w$}") } else { format!("{f:>w$}") })
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(&header);
    for row in &cells {
        line(&row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}
