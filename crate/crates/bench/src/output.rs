//! Writes CSV, JSON and SVG artifacts for an experiment record.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{Format, Metric};
use crate::error::{BenchError, BenchResult};
use crate::record::ExperimentRecord;
use crate::svg;

pub const CSV_HEADER: &str = "estimator,trial,checkpoint,metric,value";

/// Creates `dir` if needed and confirms a file can be written there.
pub fn check_writable(dir: &Path) -> BenchResult<()> {
    fs::create_dir_all(dir).map_err(|e| BenchError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let probe = dir.join(".mixest-write-probe");
    fs::write(&probe, b"").map_err(|e| BenchError::Io(format!("output directory {} is not writable: {e}", dir.display())))?;
    let _ = fs::remove_file(probe);
    Ok(())
}

/// One row per (estimator, trial, checkpoint, metric), in record order.
pub fn to_csv(record: &ExperimentRecord) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for s in &record.series {
        for (t, row) in s.values.iter().enumerate() {
            for (c, v) in s.checkpoints.iter().zip(row) {
                let _ = writeln!(out, "{},{t},{c},{},{}", s.estimator, s.metric.label(), v.0);
            }
        }
    }
    out
}

pub fn to_json(record: &ExperimentRecord) -> BenchResult<String> {
    serde_json::to_string_pretty(record).map_err(|e| BenchError::Runtime(format!("serializing record: {e}")))
}

/// Writes the requested formats into `dir`, returning the files written.
pub fn emit_outputs(record: &ExperimentRecord, formats: &[Format], dir: &Path) -> BenchResult<Vec<PathBuf>> {
    let mut written = Vec::new();
    if formats.is_empty() {
        return Ok(written);
    }
    fs::create_dir_all(dir)?;
    let mut write = |name: String, body: String| -> BenchResult<()> {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| BenchError::Io(format!("writing {}: {e}", path.display())))?;
        written.push(path);
        Ok(())
    };
    let stem = file_stem(&record.config.name);
    for format in formats {
        match format {
            Format::Csv => write(format!("{stem}.csv"), to_csv(record))?,
            Format::Json => write(format!("{stem}.json"), to_json(record)?)?,
            Format::Svg => {
                for metric in metrics_present(record) {
                    write(format!("{stem}_{}.svg", metric.label()), svg::metric_plot(record, metric))?;
                }
                for h in &record.heatmaps {
                    write(format!("{stem}_heatmap_{}.svg", file_stem(&h.label)), svg::heatmap(h))?;
                }
            }
        }
    }
    Ok(written)
}

fn metrics_present(record: &ExperimentRecord) -> Vec<Metric> {
    let mut out: Vec<Metric> = Vec::new();
    for s in &record.series {
        if !out.contains(&s.metric) {
            out.push(s.metric);
        }
    }
    out
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_are_sanitized() {
        assert_eq!(file_stem("a b/c"), "a_b_c");
    }

    #[test]
    fn unwritable_directory_is_io_error() {
        let file = std::env::temp_dir().join(format!("mixest-not-a-dir-{}", std::process::id()));
        fs::write(&file, b"x").unwrap();
        let err = check_writable(&file.join("sub")).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        fs::remove_file(file).unwrap();
    }
}
