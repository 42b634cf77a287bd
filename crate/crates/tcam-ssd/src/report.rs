//! CSV report emission. CSV is the only report format; column names carry
//! units and are a stable interface.

use crate::backend::LatencyReport;
use std::io::Write;
use std::path::Path;

/// Write a CSV file with a header row; values must not contain commas.
pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), std::io::Error> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len(), "row width mismatch");
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub const LATENCY_HEADER: [&str; 8] = [
    "label",
    "nvme_us",
    "translation_us",
    "flash_array_us",
    "fe_be_transfer_us",
    "decode_us",
    "cpu_fe_transfer_us",
    "total_us",
];

/// One labeled latency-breakdown row, all values in microseconds.
pub fn latency_row(label: &str, report: &LatencyReport) -> Vec<String> {
    let us = |v: f64| format!("{:.4}", v * 1e6);
    vec![
        label.to_string(),
        us(report.nvme),
        us(report.translation),
        us(report.flash_array_time),
        us(report.fe_be_transfer),
        us(report.decode),
        us(report.cpu_fe_transfer),
        us(report.total()),
    ]
}

pub const SUMMARY_HEADER: [&str; 3] = ["metric", "value", "unit"];

pub fn summary_row(metric: &str, value: impl ToString, unit: &str) -> Vec<String> {
    vec![metric.to_string(), value.to_string(), unit.to_string()]
}
