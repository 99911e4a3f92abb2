//! Executes the tasks of an experiment and assembles the report.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;

use symdir_core::diagnostics::{coefficient_screen, one_dimensional_screen, ConditionReport, MinusNorm};
use symdir_core::dirichlet::{assemble_h_mu, dirichlet_form_matrix};
use symdir_core::fock::{assemble_laplacian, decompose_laplacian, duality_defect};
use symdir_core::measures::{check_integrability, check_ulc, Potential, UlcMethod};
use symdir_core::operator::{sorted_eigenvalues, spectral_distance, submatrix};
use symdir_core::sampler::MonteCarlo;
use symdir_core::segal::{assemble_bold_delta, one_dimensional_identity_residual, y_degree_zero_block};
use symdir_core::{Discretization, Operator, Product, SegalMap};

use crate::config::{ExperimentConfig, MeasureSpec, Task, Tolerances};
use crate::error::CliError;
use crate::report::{
    spectrum_csv, Check, EstimateRecord, Hypothesis, Report, Spectrum, Summary, TaskRecord, TaskTiming, Timestamp,
    ToolInfo, UlcRecord,
};

/// Name of the environment variable holding the default output directory.
pub const OUT_DIR_VAR: &str = "SYMDIR_OUT_DIR";
pub const REPORT_FILE: &str = "report.json";

const ULC_RESOLUTION: usize = 1001;
const INTEGRABILITY_ORDER: usize = 32;

/// Options given on the command line, overriding the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub tolerance_overrides: Vec<String>,
}

/// Result of a run: the report and where it was written.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Report,
    pub report_path: PathBuf,
}

impl RunOutcome {
    pub fn exit_status(&self) -> i32 {
        self.report.summary.exit_status
    }
}

pub fn run(config_path: &Path, options: &RunOptions) -> Result<RunOutcome, CliError> {
    let mut config = ExperimentConfig::load(config_path)?;
    if let Some(seed) = options.seed {
        config.seed = seed;
    }
    for o in &options.tolerance_overrides {
        config.tolerances.apply_override(o)?;
    }
    let out_dir = options
        .out
        .clone()
        .or_else(|| config.output.dir.as_ref().map(PathBuf::from))
        .or_else(|| std::env::var_os(OUT_DIR_VAR).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let mut report = execute(&config)?;
    write_outputs(&mut report, &out_dir)
}

/// Runs every task of a validated configuration. Tasks execute in parallel
/// and are merged in their canonical order.
pub fn execute(config: &ExperimentConfig) -> Result<Report, CliError> {
    config.validate()?;
    let started = Instant::now();
    let factors = config
        .measures
        .iter()
        .map(MeasureSpec::build)
        .collect::<symdir_core::Result<Vec<_>>>()
        .map_err(CliError::in_module("measures"))?;
    let product = Product::new(factors).map_err(CliError::in_module("measures"))?;

    let ulc = ulc_record(&product)?;
    let mut tasks = Vec::new();
    let mut timings = Vec::new();
    if ulc.passed {
        let disc =
            Discretization::new(product.clone(), config.truncation.into()).map_err(CliError::in_module("basis"))?;
        let ctx = Context {
            config,
            product: &product,
            disc: &disc,
        };
        let results: Vec<(TaskRecord, f64)> = config
            .tasks()
            .par_iter()
            .map(|&task| {
                let t0 = Instant::now();
                let record = ctx.run_task(task)?;
                Ok((record, t0.elapsed().as_secs_f64()))
            })
            .collect::<Result<_, CliError>>()?;
        for (record, seconds) in results {
            timings.push(TaskTiming {
                task: record.task.clone(),
                seconds,
            });
            tasks.push(record);
        }
    }
    let summary = Summary::tally(&ulc, &tasks);
    Ok(Report {
        tool: ToolInfo::current(),
        config: config.clone(),
        ulc,
        tasks,
        summary,
        timestamp: Timestamp {
            unix_seconds: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            tasks: timings,
            total_seconds: started.elapsed().as_secs_f64(),
        },
    })
}

fn write_outputs(report: &mut Report, dir: &Path) -> Result<RunOutcome, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    if report.config.output.csv {
        for task in &mut report.tasks {
            for (i, s) in task.spectra.iter_mut().enumerate() {
                let name = format!("{}_spectrum_{i}.csv", task.task);
                let path = dir.join(&name);
                std::fs::write(&path, spectrum_csv(s))
                    .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
                s.csv = Some(name);
            }
        }
    }
    let report_path = dir.join(REPORT_FILE);
    std::fs::write(&report_path, report.to_json())
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", report_path.display())))?;
    Ok(RunOutcome {
        report: report.clone(),
        report_path,
    })
}

fn ulc_record(product: &Product) -> Result<UlcRecord, CliError> {
    match check_ulc(product, ULC_RESOLUTION) {
        Ok(cert) => Ok(UlcRecord {
            passed: true,
            min_second_derivative: cert.constant,
            coordinate: None,
            at: None,
            method: method_name(cert.method).into(),
            per_coordinate: cert.per_coordinate,
            tolerance: 0.0,
        }),
        Err(symdir_core::Error::NotUlc {
            coordinate,
            min_value,
            at,
        }) => Ok(UlcRecord {
            passed: false,
            min_second_derivative: min_value,
            coordinate: Some(coordinate),
            at: Some(at),
            method: "first coordinate with non-positive V''".into(),
            per_coordinate: Vec::new(),
            tolerance: 0.0,
        }),
        Err(e) => Err(CliError::in_module("measures")(e)),
    }
}

fn method_name(m: UlcMethod) -> &'static str {
    match m {
        UlcMethod::AnalyticInfimum => "analytic infimum",
        UlcMethod::GridMinimization => "grid minimization over the mass interval",
    }
}

struct Context<'a> {
    config: &'a ExperimentConfig,
    product: &'a Product,
    disc: &'a Discretization,
}

impl Context<'_> {
    fn tol(&self) -> &Tolerances {
        &self.config.tolerances
    }

    fn run_task(&self, task: Task) -> Result<TaskRecord, CliError> {
        let mut record = match task {
            Task::Assemble => self.assemble()?,
            Task::Decompose => self.decompose(),
            Task::Segal => self.segal()?,
            Task::Theorem2 => self.theorem2()?,
            Task::Theorem3 => self.theorem3()?,
        };
        record.task = task.as_str().into();
        Ok(record)
    }

    /// Variance of a one-dimensional Gaussian run, for the closed-form check.
    fn gaussian_variance(&self) -> Option<f64> {
        match self.product.factors() {
            [f] => match f.potential() {
                Potential::Gaussian { variance } => Some(*variance),
                _ => None,
            },
            _ => None,
        }
    }

    fn closed_form_check(&self, eigenvalues: &[f64]) -> Option<Check> {
        let variance = self.gaussian_variance()?;
        let k_rel = self.disc.reliable_degree(0);
        let n = self.disc.truncation().level;
        let mut expected: Vec<f64> = (0..=k_rel)
            .flat_map(|k| (0..=n).map(move |l| (k + l + 2 * k * l) as f64 / variance))
            .collect();
        expected.sort_by(f64::total_cmp);
        let value = if expected.len() == eigenvalues.len() {
            spectral_distance(&expected, eigenvalues)
        } else {
            f64::INFINITY
        };
        Some(
            Check::at_most("closed-form spectrum", value, self.tol().closed_form)
                .with_detail("eigenvalues (k + l + 2kl) / variance for k up to the reliable degree, l up to N"),
        )
    }

    fn assemble(&self) -> Result<TaskRecord, CliError> {
        let disc = self.disc;
        let tol = self.tol();
        let mut r = TaskRecord::default();

        let h = assemble_h_mu(disc);
        let form = dirichlet_form_matrix(disc).map_err(CliError::in_module("dirichlet"))?;
        let rel = &h.reliable_rows;
        let form_block = submatrix(&form, rel, rel);
        r.checks.push(Check::at_most(
            "dirichlet form identity",
            (&h.reliable_block() - &form_block).amax(),
            tol.dirichlet_form,
        ));
        let h_spectrum = h.reliable_eigenvalues();
        r.checks.push(Check::nonnegative(
            "dirichlet operator positivity",
            h_spectrum.first().copied().unwrap_or(0.0),
            tol.positivity,
        ));
        if let Some(&gap) = h_spectrum.get(1) {
            let c = disc.ulc().constant;
            r.checks.push(
                Check::nonnegative("spectral gap", gap - c, tol.positivity)
                    .with_detail(format!("second eigenvalue {gap} against ULC constant {c}")),
            );
        }

        let lap = assemble_laplacian(disc);
        let nf = disc.fock_set().len();
        let nx = disc.x_set().len();
        let mut level0 = 0.0f64;
        for i in 0..nx {
            for j in 0..nx {
                level0 = level0.max((lap.entries[(i * nf, j * nf)] - h.entries[(i, j)]).abs());
            }
        }
        r.checks.push(
            Check::at_most("extension (level-0 block)", level0, 0.0).with_detail("same assembly path, exact equality"),
        );
        r.checks.push(Check::at_most(
            "laplacian symmetry",
            lap.reliable_symmetry_defect(),
            tol.symmetry,
        ));
        let lap_spectrum = lap.reliable_eigenvalues();
        r.checks.push(Check::nonnegative(
            "laplacian positivity",
            lap_spectrum.first().copied().unwrap_or(0.0),
            tol.positivity,
        ));
        r.checks.extend(self.closed_form_check(&lap_spectrum));

        let duality =
            duality_defect(disc, self.config.duality_pairs, self.config.seed).map_err(CliError::in_module("fock"))?;
        r.checks.push(
            Check::at_most("duality", duality.max_defect, tol.duality).with_detail(format!(
                "{} random reliable pairs, normalized by 1 + |u||v|",
                duality.pairs
            )),
        );

        for j in 0..disc.dimension() {
            let mut phi = vec![0.0; disc.dimension()];
            phi[j] = 1.0;
            let name = format!("integrability along e{}", j + 1);
            match check_integrability(self.product, &phi, INTEGRABILITY_ORDER) {
                Ok(est) => {
                    r.hypotheses.push(Hypothesis {
                        name,
                        verdict: "pass".into(),
                        evidence: format!("I1 = {}, I2 = {}", est.i1, est.i2),
                        provenance: format!(
                            "Gauss quadrature, orders {} and {} agree to 1e-8",
                            est.order, est.refined_order
                        ),
                    });
                    for (label, v) in [("I1", est.i1), ("I2", est.i2)] {
                        r.estimates.push(EstimateRecord {
                            name: format!("{label} along e{}", j + 1),
                            value: v,
                            std_error: None,
                            provenance: format!("Gauss quadrature of order {}", est.refined_order),
                        });
                    }
                }
                Err(e @ symdir_core::Error::DivergentIntegral { .. }) => r.hypotheses.push(Hypothesis {
                    name,
                    verdict: "fail".into(),
                    evidence: e.to_string(),
                    provenance: "quadrature order doubling".into(),
                }),
                Err(e) => return Err(CliError::in_module("measures")(e)),
            }
        }

        r.spectra.push(spectrum("dirichlet operator", &h, h_spectrum));
        r.spectra.push(spectrum("laplacian", &lap, lap_spectrum));
        Ok(r)
    }

    fn decompose(&self) -> TaskRecord {
        let tol = self.tol();
        let dec = decompose_laplacian(self.disc);
        let mut r = TaskRecord::default();
        r.checks.push(Check::at_most(
            "decomposition symmetry",
            dec.symmetry_residual,
            tol.symmetry,
        ));
        r.checks.push(Check::nonnegative(
            "decomposition positivity",
            dec.min_eigenvalue(),
            tol.positivity,
        ));
        if self.disc.truncation().level == 0 {
            r.notes
                .push("no particles: the laplacian is the dirichlet operator and the remainder vanishes".into());
        }
        r.spectra.push(Spectrum {
            name: "remainder".into(),
            basis: dec.a_mu.row_basis.clone(),
            eigenvalues: dec.a_spectrum.clone(),
            csv: None,
        });
        r
    }

    fn segal(&self) -> Result<TaskRecord, CliError> {
        let disc = self.disc;
        let tol = self.tol();
        let module = CliError::in_module;
        let mut r = TaskRecord::default();
        let segal = SegalMap::for_discretization(disc).map_err(module("segal"))?;
        r.checks
            .push(Check::at_most("unitarity", segal.unitarity_residual(), tol.unitarity));

        let bold = assemble_bold_delta(disc, &segal).map_err(module("segal"))?;
        let lap = assemble_laplacian(disc);
        let transported = bold.conjugated.reliable_eigenvalues();
        r.checks.push(Check::at_most(
            "spectral invariance",
            spectral_distance(&sorted_eigenvalues(&lap.reliable_block()), &transported),
            tol.spectral_invariance,
        ));
        r.checks.extend(self.closed_form_check(&transported));

        let h = assemble_h_mu(disc);
        let rows = disc.reliable_x_rows();
        let block = y_degree_zero_block(disc, &bold.conjugated);
        r.checks.push(Check::at_most(
            "extension (y-degree-0 block)",
            (submatrix(&block, &rows, &rows) - submatrix(&h.entries, &rows, &rows)).amax(),
            tol.extension,
        ));

        if disc.dimension() == 1 {
            let identity = one_dimensional_identity_residual(disc, &segal).map_err(module("segal"))?;
            r.checks
                .push(Check::at_most("one-dimensional identity", identity, tol.identity));
            r.checks.push(
                Check::at_most("explicit remainder display", bold.residual, tol.identity)
                    .with_detail(format!("at the fitted constant {}", bold.fit.chosen)),
            );
        } else {
            r.notes.push(format!(
                "explicit remainder display does not close for d = {}: residual {} at c = 1, {} at c = 2",
                disc.dimension(),
                bold.fit.residual_at_one,
                bold.fit.residual_at_two
            ));
        }
        let fit = &bold.fit;
        for (name, value) in [
            ("explicit display residual at c = 1", Some(fit.residual_at_one)),
            ("explicit display residual at c = 2", Some(fit.residual_at_two)),
            ("explicit display least-squares constant", fit.best),
            (
                "explicit display residual at least-squares constant",
                Some(fit.residual_at_best),
            ),
        ] {
            if let Some(value) = value {
                r.estimates.push(EstimateRecord {
                    name: name.into(),
                    value,
                    std_error: None,
                    provenance: "reliable-block Frobenius fit against the transported laplacian".into(),
                });
            }
        }
        r.spectra
            .push(spectrum("transported laplacian", &bold.conjugated, transported));
        Ok(r)
    }

    fn theorem2(&self) -> Result<TaskRecord, CliError> {
        let mut r = TaskRecord::default();
        let refinements: Vec<_> = self.config.refinements.iter().map(|&t| t.into()).collect();
        let screens: Vec<ConditionReport> = self
            .product
            .factors()
            .par_iter()
            .map(|f| one_dimensional_screen(f, &refinements, self.tol().refinement))
            .collect::<symdir_core::Result<_>>()
            .map_err(CliError::in_module("diagnostics"))?;
        let multi = screens.len() > 1;
        for (j, screen) in screens.iter().enumerate() {
            let suffix = if multi {
                format!(" (coordinate {})", j + 1)
            } else {
                String::new()
            };
            merge_screen(&mut r, screen, &suffix, self.tol().standard_errors);
            if let Some(study) = &screen.refinement {
                let worst = study.changes.iter().copied().fold(0.0, f64::max);
                r.checks.push(
                    Check::at_most(format!("refinement stability{suffix}"), worst, study.tolerance).with_detail(
                        format!(
                            "lowest {} eigenvalues across successive truncations",
                            study.eigenvalues[0].len()
                        ),
                    ),
                );
                for (t, values) in study.truncations.iter().zip(&study.eigenvalues) {
                    r.spectra.push(Spectrum {
                        name: format!("transported laplacian K={} N={}{suffix}", t.degree, t.level),
                        basis: "L2(mu) x L2(gamma)".into(),
                        eigenvalues: values.clone(),
                        csv: None,
                    });
                }
            }
        }
        if multi {
            r.notes
                .push("the refinement screen is one-dimensional and runs per coordinate".into());
        }
        Ok(r)
    }

    fn theorem3(&self) -> Result<TaskRecord, CliError> {
        let tol = self.tol();
        let norm = match &self.config.minus_norm_weights {
            Some(w) => MinusNorm::new(w.clone()).map_err(CliError::in_module("diagnostics"))?,
            None => MinusNorm::uniform(self.product.dimension()),
        };
        let mc = MonteCarlo::new(self.config.samples, self.config.seed);
        let screen = coefficient_screen(self.product, &norm, mc).map_err(CliError::in_module("diagnostics"))?;
        let mut r = TaskRecord::default();
        merge_screen(&mut r, &screen, "", tol.standard_errors);

        let segal = SegalMap::for_discretization(self.disc).map_err(CliError::in_module("segal"))?;
        let op = symdir_core::diagnostics::assemble_h_mu_gamma(self.disc, &segal)
            .map_err(CliError::in_module("diagnostics"))?;
        r.checks.push(Check::at_most(
            "two-variable operator symmetry",
            op.reliable_symmetry_defect(),
            tol.symmetry,
        ));
        let values = op.reliable_eigenvalues();
        r.checks.push(Check::nonnegative(
            "two-variable operator positivity",
            values.first().copied().unwrap_or(0.0),
            tol.positivity,
        ));
        r.spectra
            .push(spectrum("two-variable operator without remainder", &op, values));
        Ok(r)
    }
}

fn spectrum(name: &str, op: &Operator, eigenvalues: Vec<f64>) -> Spectrum {
    Spectrum {
        name: name.into(),
        basis: op.row_basis.clone(),
        eigenvalues,
        csv: None,
    }
}

fn merge_screen(r: &mut TaskRecord, screen: &ConditionReport, suffix: &str, standard_errors: f64) {
    for h in &screen.hypotheses {
        r.hypotheses.push(Hypothesis {
            name: format!("{}{suffix}", h.name),
            verdict: h.verdict.as_str().into(),
            evidence: h.evidence.clone(),
            provenance: h.provenance.clone(),
        });
    }
    for e in &screen.estimates {
        r.estimates.push(EstimateRecord {
            name: format!("{}{suffix}", e.name),
            value: e.value,
            std_error: e.std_error,
            provenance: e.provenance.clone(),
        });
    }
    for c in &screen.cross_checks {
        r.checks.push(
            Check::at_most(
                format!("cross-check {}{suffix}", c.name),
                (c.monte_carlo - c.reference).abs(),
                standard_errors * c.std_error,
            )
            .with_detail(format!(
                "Monte Carlo {} (SE {}) against quadrature {}",
                c.monte_carlo, c.std_error, c.reference
            )),
        );
    }
    for b in &screen.bounds {
        r.checks.push(Check {
            name: format!("{}{suffix}", b.name),
            value: b.value,
            tolerance: b.bound,
            passed: b.holds,
            detail: "tolerance is the bound".into(),
        });
    }
    r.notes.extend(screen.notes.iter().map(|n| format!("{n}{suffix}")));
}
