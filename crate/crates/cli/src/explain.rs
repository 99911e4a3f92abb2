//! Human-readable summary of a stored report. Nothing is recomputed.

use std::fmt::Write;
use std::path::Path;

use crate::error::CliError;
use crate::report::Report;

pub fn load_report(path: &Path) -> Result<Report, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read report {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Report(format!("{}: {e}", path.display())))
}

pub fn explain(path: &Path) -> Result<String, CliError> {
    Ok(summarize(&load_report(path)?))
}

/// Negative numbers are printed with a true minus sign.
fn signed(v: f64) -> String {
    let s = format!("{v}");
    match s.strip_prefix('-') {
        Some(rest) => format!("\u{2212}{rest}"),
        None => s,
    }
}

pub fn summarize(report: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", report.tool.name, report.tool.version);
    let ulc = &report.ulc;
    if ulc.passed {
        let _ = writeln!(out, "ULC: pass (C = {})", signed(ulc.min_second_derivative));
    } else {
        let _ = writeln!(out, "ULC: FAIL (min V\u{2033} = {})", signed(ulc.min_second_derivative));
    }
    if report.tasks.is_empty() {
        let _ = writeln!(out, "nothing to summarize: the report holds no task records");
    }
    for task in &report.tasks {
        let _ = writeln!(out, "[{}]", task.task);
        for h in &task.hypotheses {
            let verdict = if h.failed() {
                "FAIL".to_string()
            } else {
                h.verdict.clone()
            };
            let _ = writeln!(out, "  {}: {verdict}", h.name);
        }
        for c in &task.checks {
            if c.passed {
                let _ = writeln!(out, "  {}: pass", c.name);
            } else {
                let _ = writeln!(
                    out,
                    "  {}: FAIL ({} against tolerance {})",
                    c.name,
                    signed(c.value),
                    c.tolerance
                );
            }
        }
        for note in &task.notes {
            let _ = writeln!(out, "  note: {note}");
        }
    }
    let s = &report.summary;
    let _ = writeln!(
        out,
        "checks passed: {}, failed: {}, hypothesis failures: {}, exit status {}",
        s.checks_passed,
        s.checks_failed.len(),
        s.hypotheses_failed.len(),
        s.exit_status
    );
    out
}
