//! Table emission: one CSV per curve, a JSON summary, and a gnuplot script
//! per curve.
//!
//! Output is byte-reproducible: floats are written with Rust's shortest
//! round-trip formatting, rows keep insertion order, and nothing
//! time-dependent is written. Re-running the same configuration must produce
//! identical files, so equality of the emitted bytes doubles as a
//! determinism check on the whole pipeline.

use crate::report::{Curve, ScenarioReport};
use anyhow::{Context, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Writes all tables for a report into `out_dir`, returning the file paths
/// in the order written. An empty report still produces the JSON summary
/// with its schema header.
pub fn emit_tables(report: &ScenarioReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let mut written = Vec::new();

    let summary_path = out_dir.join(format!("{}_summary.json", report.scenario));
    let mut json = serde_json::to_string_pretty(report).context("serializing report summary")?;
    json.push('\n');
    std::fs::write(&summary_path, json)
        .with_context(|| format!("writing {}", summary_path.display()))?;
    written.push(summary_path);

    for curve in &report.curves {
        let csv_path = out_dir.join(format!("{}_{}.csv", report.scenario, curve.name));
        std::fs::write(&csv_path, render_csv(curve)?)
            .with_context(|| format!("writing {}", csv_path.display()))?;
        let gp_path = out_dir.join(format!("{}_{}.gp", report.scenario, curve.name));
        std::fs::write(&gp_path, render_gnuplot(report, curve))
            .with_context(|| format!("writing {}", gp_path.display()))?;
        written.push(csv_path);
        written.push(gp_path);
    }
    Ok(written)
}

fn render_csv(curve: &Curve) -> Result<String> {
    let labeled = !curve.labels.is_empty();
    if labeled && curve.labels.len() != curve.rows.len() {
        anyhow::bail!(
            "curve '{}': {} labels for {} rows",
            curve.name,
            curve.labels.len(),
            curve.rows.len()
        );
    }
    let mut out = String::new();
    if labeled {
        out.push_str("label,");
    }
    out.push_str(&curve.columns.join(","));
    out.push('\n');
    for (i, row) in curve.rows.iter().enumerate() {
        if row.len() != curve.columns.len() {
            anyhow::bail!(
                "curve '{}' row {i}: {} values for {} columns",
                curve.name,
                row.len(),
                curve.columns.len()
            );
        }
        if labeled {
            let _ = write!(out, "{},", curve.labels[i]);
        }
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            // Shortest round-trip float formatting: deterministic for equal
            // bits and parseable back to the same f64.
            let _ = write!(out, "{v}");
            first = false;
        }
        out.push('\n');
    }
    Ok(out)
}

fn render_gnuplot(report: &ScenarioReport, curve: &Curve) -> String {
    let stem = format!("{}_{}", report.scenario, curve.name);
    let offset = if curve.labels.is_empty() { 0 } else { 1 };
    let mut script = String::new();
    let _ = writeln!(script, "# gnuplot script for {stem}.csv");
    let _ = writeln!(script, "set datafile separator \",\"");
    let _ = writeln!(script, "set key autotitle columnhead");
    let _ = writeln!(script, "set term pngcairo size 960,640");
    let _ = writeln!(script, "set output \"{stem}.png\"");
    let _ = writeln!(script, "set xlabel \"{}\"", curve.columns.first().map_or("x", |c| c));
    let _ = writeln!(script, "set title \"{} / {}\"", report.scenario, curve.name);
    let x = 1 + offset;
    let y_hi = curve.columns.len() + offset;
    if y_hi > x {
        let _ = writeln!(
            script,
            "plot for [col={}:{}] \"{stem}.csv\" using {x}:col with linespoints",
            x + 1,
            y_hi
        );
    } else {
        let _ = writeln!(script, "plot \"{stem}.csv\" using {x} with linespoints");
    }
    script
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::Assertion;

    fn sample_report() -> ScenarioReport {
        let mut rep = ScenarioReport::new("e0", 11);
        rep.record(Assertion::le("e0.check", 1.0, 2.0, 0.0));
        rep.curve(
            "growth",
            vec!["t".into(), "value".into(), "stderr".into()],
            Vec::new(),
            vec![vec![0.1, 1.25, 0.003], vec![0.2, 1.5, 0.004]],
        );
        rep.curve(
            "by_member",
            vec!["k".into()],
            vec!["gaussian".into(), "uniform".into()],
            vec![vec![1.1], vec![0.9]],
        );
        rep
    }

    #[test]
    fn empty_report_still_writes_a_schema_tagged_summary() {
        let dir = tempfile::tempdir().unwrap();
        let rep = ScenarioReport::new("e0", 3);
        let files = emit_tables(&rep, dir.path()).unwrap();
        assert_eq!(files.len(), 1, "summary only");
        let text = std::fs::read_to_string(&files[0]).unwrap();
        assert!(text.contains("\"schema\": \"loglab-report-v1\""), "{text}");
        assert!(text.contains("\"scenario\": \"e0\""), "{text}");
    }

    #[test]
    fn curves_become_csv_and_gnuplot_pairs() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_tables(&sample_report(), dir.path()).unwrap();
        let names: Vec<String> =
            files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        assert_eq!(
            names,
            vec![
                "e0_summary.json",
                "e0_growth.csv",
                "e0_growth.gp",
                "e0_by_member.csv",
                "e0_by_member.gp"
            ]
        );
        let csv = std::fs::read_to_string(dir.path().join("e0_growth.csv")).unwrap();
        assert_eq!(csv, "t,value,stderr\n0.1,1.25,0.003\n0.2,1.5,0.004\n");
        let labeled = std::fs::read_to_string(dir.path().join("e0_by_member.csv")).unwrap();
        assert_eq!(labeled, "label,k\ngaussian,1.1\nuniform,0.9\n");
        let gp = std::fs::read_to_string(dir.path().join("e0_growth.gp")).unwrap();
        assert!(gp.contains("e0_growth.csv"), "{gp}");
        assert!(gp.contains("set datafile separator"), "{gp}");
    }

    #[test]
    fn re_emission_is_byte_identical() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let rep = sample_report();
        let files_a = emit_tables(&rep, dir_a.path()).unwrap();
        let files_b = emit_tables(&rep, dir_b.path()).unwrap();
        assert_eq!(files_a.len(), files_b.len());
        for (a, b) in files_a.iter().zip(&files_b) {
            let bytes_a = std::fs::read(a).unwrap();
            let bytes_b = std::fs::read(b).unwrap();
            assert_eq!(bytes_a, bytes_b, "{} differs between emissions", a.display());
        }
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut rep = ScenarioReport::new("e0", 1);
        rep.curve("bad", vec!["a".into(), "b".into()], Vec::new(), vec![vec![1.0]]);
        let err = emit_tables(&rep, dir.path()).unwrap_err().to_string();
        assert!(err.contains("1 values for 2 columns"), "{err}");
    }
}
