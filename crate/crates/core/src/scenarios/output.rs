//! CSV persistence. The metrics schema is fixed:
//! `step,window,bidder,algo,metric,value`.

use std::fs;
use std::path::Path;

use serde::Serialize;

use super::MetricRow;
use crate::error::Result;

pub const METRICS_FILE: &str = "metrics.csv";
pub const TRAINING_FILE: &str = "training.csv";
pub const AUDIT_FILE: &str = "audit.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const REPORT_FILE: &str = "report.json";

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a headered CSV even when `rows` is empty.
pub fn write_metrics(path: &Path, rows: &[MetricRow]) -> Result<()> {
    if rows.is_empty() {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, "step,window,bidder,algo,metric,value\n")?;
        return Ok(());
    }
    write_csv(path, rows)
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<Vec<MetricRow>, _>>()?)
}

/// Trace lines are already `step,kind,payload`.
pub fn write_trace(path: &Path, lines: &[String]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut s = String::from("step,kind,payload\n");
    for l in lines {
        s.push_str(l);
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}
