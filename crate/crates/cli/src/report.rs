//! Structured run reports. Everything outside `timestamp` is a function of
//! the configuration and seed alone.

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl ToolInfo {
    pub fn current() -> Self {
        Self {
            name: "symdir".into(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

/// An invariant compared against its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Check {
    /// Passes when `value ≤ tolerance`.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
            detail: String::new(),
        }
    }

    /// Passes when `value ≥ -tolerance`.
    pub fn nonnegative(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value >= -tolerance,
            detail: String::new(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub name: String,
    /// `pass`, `fail` or `not-checkable`.
    pub verdict: String,
    pub evidence: String,
    pub provenance: String,
}

impl Hypothesis {
    pub fn failed(&self) -> bool {
        self.verdict == "fail"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub name: String,
    pub value: f64,
    pub std_error: Option<f64>,
    pub provenance: String,
}

/// Ascending eigenvalues of the reliable block of an operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub name: String,
    pub basis: String,
    pub eigenvalues: Vec<f64>,
    /// CSV file written beside the report, when requested.
    pub csv: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task: String,
    pub checks: Vec<Check>,
    pub hypotheses: Vec<Hypothesis>,
    pub estimates: Vec<EstimateRecord>,
    pub spectra: Vec<Spectrum>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UlcRecord {
    pub passed: bool,
    /// Certified constant `C`, or the offending minimum of `V''` on failure.
    pub min_second_derivative: f64,
    pub coordinate: Option<usize>,
    pub at: Option<f64>,
    pub method: String,
    pub per_coordinate: Vec<f64>,
    /// The certificate requires `min V'' > tolerance`.
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub checks_passed: usize,
    pub checks_failed: Vec<String>,
    pub hypotheses_failed: Vec<String>,
    pub exit_status: i32,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TaskTiming {
    pub task: String,
    pub seconds: f64,
}

/// Wall-clock data, the only nondeterministic part of a report.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Timestamp {
    pub unix_seconds: u64,
    pub tasks: Vec<TaskTiming>,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: ToolInfo,
    pub config: ExperimentConfig,
    pub ulc: UlcRecord,
    pub tasks: Vec<TaskRecord>,
    pub summary: Summary,
    pub timestamp: Timestamp,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_HYPOTHESIS: i32 = 2;

impl Summary {
    pub fn tally(ulc: &UlcRecord, tasks: &[TaskRecord]) -> Self {
        let mut summary = Summary::default();
        if !ulc.passed {
            summary.hypotheses_failed.push("ULC".into());
        }
        for t in tasks {
            for c in &t.checks {
                if c.passed {
                    summary.checks_passed += 1;
                } else {
                    summary.checks_failed.push(format!("{}: {}", t.task, c.name));
                }
            }
            for h in t.hypotheses.iter().filter(|h| h.failed()) {
                summary.hypotheses_failed.push(format!("{}: {}", t.task, h.name));
            }
        }
        summary.exit_status = if !summary.hypotheses_failed.is_empty() {
            EXIT_HYPOTHESIS
        } else if !summary.checks_failed.is_empty() {
            EXIT_FAILURE
        } else {
            EXIT_OK
        };
        summary
    }
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Strips the `timestamp` field so two reports can be compared byte for byte.
pub fn without_timestamp(json: &str) -> &str {
    match json.find("\"timestamp\":") {
        Some(i) => &json[..i],
        None => json,
    }
}

/// CSV table of a spectrum: header row, then full-precision values.
pub fn spectrum_csv(s: &Spectrum) -> String {
    let mut out = String::from("index,eigenvalue\n");
    for (i, v) in s.eigenvalues.iter().enumerate() {
        out.push_str(&format!("{i},{v}\n"));
    }
    out
}
