//! Experiment configuration: parsing, validation and tolerance overrides.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use symdir_core::{Measure, Truncation};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub enum MeasureSpec {
    /// `V(x) = x² / (2 variance)`.
    Gaussian { variance: f64 },
    /// `V(x) = Σ_k coeffs[k] x^k`.
    Polynomial { coeffs: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum MeasureKind {
    Gaussian,
    Polynomial,
}

/// Flat form of a measure, so type errors keep their full field path.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasure {
    kind: MeasureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    variance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coeffs: Option<Vec<f64>>,
}

impl TryFrom<RawMeasure> for MeasureSpec {
    type Error = String;

    fn try_from(raw: RawMeasure) -> Result<Self, String> {
        match (raw.kind, raw.variance, raw.coeffs) {
            (MeasureKind::Gaussian, v, None) => Ok(MeasureSpec::Gaussian {
                variance: v.unwrap_or_else(unit),
            }),
            (MeasureKind::Polynomial, None, Some(coeffs)) => Ok(MeasureSpec::Polynomial { coeffs }),
            (MeasureKind::Gaussian, _, Some(_)) => Err("a gaussian measure takes `variance`, not `coeffs`".into()),
            (MeasureKind::Polynomial, Some(_), _) => Err("a polynomial measure takes `coeffs`, not `variance`".into()),
            (MeasureKind::Polynomial, None, None) => Err("a polynomial measure needs `coeffs`".into()),
        }
    }
}

impl From<MeasureSpec> for RawMeasure {
    fn from(m: MeasureSpec) -> Self {
        match m {
            MeasureSpec::Gaussian { variance } => RawMeasure {
                kind: MeasureKind::Gaussian,
                variance: Some(variance),
                coeffs: None,
            },
            MeasureSpec::Polynomial { coeffs } => RawMeasure {
                kind: MeasureKind::Polynomial,
                variance: None,
                coeffs: Some(coeffs),
            },
        }
    }
}

fn unit() -> f64 {
    1.0
}

impl MeasureSpec {
    pub fn build(&self) -> symdir_core::Result<Measure> {
        match self {
            MeasureSpec::Gaussian { variance } => Measure::gaussian(*variance),
            MeasureSpec::Polynomial { coeffs } => Measure::polynomial(coeffs.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSpec {
    /// Polynomial degree bound `K` per coordinate.
    pub degree: usize,
    /// Particle level bound `N`.
    pub level: usize,
}

impl From<TruncationSpec> for Truncation {
    fn from(t: TruncationSpec) -> Self {
        Truncation::new(t.degree, t.level)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Assemble,
    Decompose,
    Segal,
    Theorem2,
    Theorem3,
}

impl Task {
    pub const ALL: [Task; 5] = [
        Task::Assemble,
        Task::Decompose,
        Task::Segal,
        Task::Theorem2,
        Task::Theorem3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Assemble => "assemble",
            Task::Decompose => "decompose",
            Task::Segal => "segal",
            Task::Theorem2 => "theorem2",
            Task::Theorem3 => "theorem3",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Either the literal `"all"` or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TaskSelection {
    Keyword(String),
    List(Vec<Task>),
}

impl Default for TaskSelection {
    fn default() -> Self {
        TaskSelection::Keyword("all".into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub closed_form: f64,
    pub extension: f64,
    pub duality: f64,
    pub dirichlet_form: f64,
    pub symmetry: f64,
    pub positivity: f64,
    pub unitarity: f64,
    pub spectral_invariance: f64,
    pub identity: f64,
    pub refinement: f64,
    /// Cross-checks pass when Monte Carlo and quadrature agree within this
    /// many standard errors.
    pub standard_errors: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            closed_form: 1e-6,
            extension: 1e-8,
            duality: 1e-8,
            dirichlet_form: 1e-8,
            symmetry: 1e-10,
            positivity: 1e-8,
            unitarity: 1e-8,
            spectral_invariance: 1e-8,
            identity: 1e-8,
            refinement: symdir_core::diagnostics::REFINEMENT_TOLERANCE,
            standard_errors: 3.0,
        }
    }
}

impl Tolerances {
    pub const NAMES: [&'static str; 11] = [
        "closed_form",
        "extension",
        "duality",
        "dirichlet_form",
        "symmetry",
        "positivity",
        "unitarity",
        "spectral_invariance",
        "identity",
        "refinement",
        "standard_errors",
    ];

    fn slot(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "closed_form" => &mut self.closed_form,
            "extension" => &mut self.extension,
            "duality" => &mut self.duality,
            "dirichlet_form" => &mut self.dirichlet_form,
            "symmetry" => &mut self.symmetry,
            "positivity" => &mut self.positivity,
            "unitarity" => &mut self.unitarity,
            "spectral_invariance" => &mut self.spectral_invariance,
            "identity" => &mut self.identity,
            "refinement" => &mut self.refinement,
            "standard_errors" => &mut self.standard_errors,
            _ => return None,
        })
    }

    /// Applies `name=value`.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), CliError> {
        let (name, value) = assignment.split_once('=').ok_or_else(|| {
            CliError::config(
                format!("tolerances.{assignment}"),
                "override must have the form <name>=<value>",
            )
        })?;
        let name = name.trim();
        let path = format!("tolerances.{name}");
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::config(&path, format!("`{}` is not a number", value.trim())))?;
        let slot = self.slot(name).ok_or_else(|| {
            CliError::config(
                &path,
                format!("unknown tolerance; expected one of {}", Self::NAMES.join(", ")),
            )
        })?;
        *slot = value;
        self.validate()
    }

    fn validate(&self) -> Result<(), CliError> {
        let mut copy = *self;
        for name in Self::NAMES {
            let v = *copy.slot(name).expect("listed name");
            if !(v.is_finite() && v >= 0.0) {
                return Err(CliError::config(
                    format!("tolerances.{name}"),
                    format!("must be a finite non-negative number (got {v})"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// Report directory; falls back to `SYMDIR_OUT_DIR`, then the working
    /// directory.
    pub dir: Option<String>,
    /// Write spectra tables as CSV beside the report.
    pub csv: bool,
}

fn default_seed() -> u64 {
    0
}

fn default_samples() -> usize {
    100_000
}

fn default_refinements() -> Vec<TruncationSpec> {
    vec![
        TruncationSpec { degree: 8, level: 5 },
        TruncationSpec { degree: 10, level: 6 },
    ]
}

fn default_budget() -> f64 {
    512.0
}

fn default_pairs() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// One measure per coordinate; the dimension is their count.
    pub measures: Vec<MeasureSpec>,
    pub truncation: TruncationSpec,
    #[serde(default)]
    pub tasks: TaskSelection,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Monte Carlo sample count for the integrability screen.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Random pairs drawn for the duality check.
    #[serde(default = "default_pairs")]
    pub duality_pairs: usize,
    /// Truncations compared in the refinement study.
    #[serde(default = "default_refinements")]
    pub refinements: Vec<TruncationSpec>,
    /// Weights of the norm on the negative space; defaults to all ones.
    #[serde(default)]
    pub minus_norm_weights: Option<Vec<f64>>,
    #[serde(default = "default_budget")]
    pub memory_budget_mb: f64,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(
                if path == "." { "<root>".into() } else { path },
                e.into_inner().to_string(),
            )
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn dimension(&self) -> usize {
        self.measures.len()
    }

    pub fn tasks(&self) -> Vec<Task> {
        match &self.tasks {
            TaskSelection::Keyword(_) => Task::ALL.to_vec(),
            TaskSelection::List(list) => {
                let mut out = list.clone();
                out.sort();
                out.dedup();
                out
            }
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.measures.is_empty() {
            return Err(CliError::config(
                "measures",
                "at least one coordinate measure is required",
            ));
        }
        for (j, measure) in self.measures.iter().enumerate() {
            measure.build().map_err(|e| match measure {
                MeasureSpec::Gaussian { .. } => CliError::config(format!("measures[{j}].variance"), e.to_string()),
                MeasureSpec::Polynomial { .. } => CliError::config(format!("measures[{j}].coeffs"), e.to_string()),
            })?;
        }
        match &self.tasks {
            TaskSelection::Keyword(k) if k != "all" => {
                return Err(CliError::config(
                    "tasks",
                    format!("expected \"all\" or a list of tasks, got \"{k}\""),
                ));
            }
            TaskSelection::List(list) if list.is_empty() => {
                return Err(CliError::config("tasks", "task list must not be empty"));
            }
            _ => {}
        }
        if self.truncation.degree == 0 {
            return Err(CliError::config("truncation.degree", "degree bound must be at least 1"));
        }
        self.tolerances.validate()?;
        if self.samples < symdir_core::sampler::MonteCarlo::DEFAULT_REPLICATES {
            return Err(CliError::config(
                "samples",
                format!(
                    "need at least {} samples",
                    symdir_core::sampler::MonteCarlo::DEFAULT_REPLICATES
                ),
            ));
        }
        if self.refinements.is_empty() {
            return Err(CliError::config("refinements", "at least one truncation is required"));
        }
        for (i, t) in self.refinements.iter().enumerate() {
            if t.degree == 0 {
                return Err(CliError::config(
                    format!("refinements[{i}].degree"),
                    "degree bound must be at least 1",
                ));
            }
        }
        if let Some(w) = &self.minus_norm_weights {
            if w.len() != self.dimension() {
                return Err(CliError::config(
                    "minus_norm_weights",
                    format!("expected {} weights, got {}", self.dimension(), w.len()),
                ));
            }
            if let Some(i) = w.iter().position(|&x| !(x.is_finite() && x > 0.0)) {
                return Err(CliError::config(
                    format!("minus_norm_weights[{i}]"),
                    "weights must be positive",
                ));
            }
        }
        if !(self.memory_budget_mb.is_finite() && self.memory_budget_mb > 0.0) {
            return Err(CliError::config("memory_budget_mb", "must be positive"));
        }
        let needed = self.estimated_memory_mb();
        if needed > self.memory_budget_mb {
            return Err(CliError::config(
                "truncation",
                format!(
                    "dense matrices need about {needed:.1} MB, over the budget of {} MB",
                    self.memory_budget_mb
                ),
            ));
        }
        Ok(())
    }

    /// Rough footprint of the dense matrices held at once by the largest
    /// truncation in the run.
    pub fn estimated_memory_mb(&self) -> f64 {
        let d = self.dimension();
        let t = self.truncation;
        let main = ((t.degree + 1) as f64).powi(d as i32) * symdir_core::index::binomial(d + t.level, t.level) as f64;
        let refined = if self.tasks().contains(&Task::Theorem2) {
            self.refinements
                .iter()
                .map(|r| ((r.degree + 1) * (r.level + 1)) as f64)
                .fold(0.0, f64::max)
        } else {
            0.0
        };
        let largest = main.max(refined);
        // a dozen matrices of that size live at the peak
        12.0 * largest * largest * 8.0 / (1024.0 * 1024.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"measures":[{"kind":"gaussian"}],"truncation":{"degree":4,"level":2}}"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.tasks(), Task::ALL.to_vec());
        assert_eq!(c.seed, 0);
        assert_eq!(c.tolerances, Tolerances::default());
        assert_eq!(c.measures[0], MeasureSpec::Gaussian { variance: 1.0 });
    }

    #[test]
    fn errors_carry_field_paths() {
        let bad = r#"{"measures":[{"kind":"polynomial","coeffs":[0,0,1,"x"]}],"truncation":{"degree":4,"level":2}}"#;
        let err = ExperimentConfig::parse(bad).unwrap_err();
        assert!(err.to_string().contains("measures[0].coeffs[3]"), "{err}");

        let mixed = r#"{"measures":[{"kind":"gaussian","coeffs":[0,0,1]}],"truncation":{"degree":4,"level":2}}"#;
        assert!(ExperimentConfig::parse(mixed)
            .unwrap_err()
            .to_string()
            .contains("measures[0]"));

        let odd = r#"{"measures":[{"kind":"polynomial","coeffs":[0,0,1,1]}],"truncation":{"degree":4,"level":2}}"#;
        let err = ExperimentConfig::parse(odd).unwrap_err();
        assert!(err.to_string().contains("measures[0].coeffs"), "{err}");

        let unknown = r#"{"measures":[{"kind":"gaussian"}],"truncation":{"degree":4,"level":2,"extra":1}}"#;
        assert!(ExperimentConfig::parse(unknown)
            .unwrap_err()
            .to_string()
            .contains("truncation"));

        let tasks = r#"{"measures":[{"kind":"gaussian"}],"truncation":{"degree":4,"level":2},"tasks":[]}"#;
        assert!(ExperimentConfig::parse(tasks)
            .unwrap_err()
            .to_string()
            .contains("tasks"));
    }

    #[test]
    fn budget_rejects_large_truncations() {
        let big = r#"{"measures":[{"kind":"gaussian"},{"kind":"gaussian"},{"kind":"gaussian"}],
            "truncation":{"degree":20,"level":8},"memory_budget_mb":64}"#;
        let err = ExperimentConfig::parse(big).unwrap_err();
        assert!(err.to_string().contains("truncation"), "{err}");
    }

    #[test]
    fn overrides_by_name() {
        let mut t = Tolerances::default();
        t.apply_override("duality=1e-6").unwrap();
        assert_eq!(t.duality, 1e-6);
        assert!(t.apply_override("nonsense=1").is_err());
        assert!(t.apply_override("duality").is_err());
        assert!(t.apply_override("duality=-1").is_err());
    }

    #[test]
    fn task_list_is_ordered_and_deduplicated() {
        let c = ExperimentConfig::parse(
            r#"{"measures":[{"kind":"gaussian"}],"truncation":{"degree":4,"level":2},"tasks":["segal","assemble","segal"]}"#,
        )
        .unwrap();
        assert_eq!(c.tasks(), vec![Task::Assemble, Task::Segal]);
    }
}
