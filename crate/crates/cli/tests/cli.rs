use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use symdir_cli::report::{without_timestamp, Report};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn symdir(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symdir"))
        .args(args)
        .env_remove("SYMDIR_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn run_into(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    symdir(&args)
}

fn read_report(dir: &Path) -> (String, Report) {
    let text = std::fs::read_to_string(dir.join("report.json")).unwrap();
    let report = serde_json::from_str(&text).unwrap();
    (text, report)
}

#[test]
fn gaussian_run_passes_and_reports_the_closed_form_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(&fixture("gaussian_pass.json"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, report) = read_report(dir.path());
    let segal = report.tasks.iter().find(|t| t.task == "segal").unwrap();
    let table = &segal.spectra[0].eigenvalues;
    // K = 6 and deg V' = 1 leave degrees 0..=6 reliable; N = 3
    let mut expected: Vec<f64> = (0..=6usize)
        .flat_map(|k| (0..=3usize).map(move |l| (k + l + 2 * k * l) as f64))
        .collect();
    expected.sort_by(f64::total_cmp);
    assert_eq!(table.len(), expected.len());
    for (a, b) in table.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
    for task in &report.tasks {
        for c in &task.checks {
            assert!(c.passed, "{}: {}", task.task, c.name);
            assert!(c.tolerance.is_finite());
        }
    }
    assert_eq!(report.tasks.len(), 5);
}

#[test]
fn spectra_are_written_as_full_precision_csv() {
    let dir = tempfile::tempdir().unwrap();
    run_into(&fixture("gaussian_pass.json"), dir.path(), &[]);
    let (_, report) = read_report(dir.path());
    let spectrum = &report.tasks[0].spectra[0];
    let name = spectrum.csv.as_ref().expect("csv requested");
    let csv = std::fs::read_to_string(dir.path().join(name)).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("index,eigenvalue"));
    let values: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(&values, &spectrum.eigenvalues);
}

#[test]
fn identical_runs_differ_only_in_the_timestamp() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_into(&fixture("gaussian_pass.json"), a.path(), &[]);
    run_into(&fixture("gaussian_pass.json"), b.path(), &[]);
    let (ta, _) = read_report(a.path());
    let (tb, _) = read_report(b.path());
    assert_eq!(without_timestamp(&ta), without_timestamp(&tb));
    assert!(without_timestamp(&ta).len() < ta.len());
}

#[test]
fn seed_flag_changes_only_seeded_quantities() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_into(&fixture("gaussian_pass.json"), a.path(), &["--seed", "1"]);
    run_into(&fixture("gaussian_pass.json"), b.path(), &["--seed", "2"]);
    let (_, ra) = read_report(a.path());
    let (_, rb) = read_report(b.path());
    assert_eq!(ra.config.seed, 1);
    let mc = |r: &Report| r.tasks.iter().find(|t| t.task == "theorem3").unwrap().estimates[0].value;
    assert_ne!(mc(&ra), mc(&rb));
    assert_eq!(ra.tasks[1], rb.tasks[1]);
}

#[test]
fn failing_ulc_is_a_hypothesis_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(&fixture("double_well.json"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    let (_, report) = read_report(dir.path());
    assert!(!report.ulc.passed);
    assert_eq!(report.ulc.min_second_derivative, -0.25);
    assert!(report.tasks.is_empty());

    let explained = symdir(&["explain", dir.path().join("report.json").to_str().unwrap()]);
    let text = String::from_utf8(explained.stdout).unwrap();
    assert!(text.contains("ULC: FAIL (min V\u{2033} = \u{2212}0.25)"), "{text}");
    assert!(text.contains("nothing to summarize"));
}

#[test]
fn malformed_potential_is_an_error_with_a_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(&fixture("odd_degree.json"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("measures[0].coeffs"), "{err}");
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn failed_invariant_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(
        &fixture("gaussian_pass.json"),
        dir.path(),
        &["--tol-override", "standard_errors=0"],
    );
    assert_eq!(out.status.code(), Some(1));
    let (_, report) = read_report(dir.path());
    assert!(report.summary.checks_failed.iter().any(|c| c.contains("cross-check")));
}

#[test]
fn unknown_tolerance_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(
        &fixture("gaussian_pass.json"),
        dir.path(),
        &["--tol-override", "speed=1"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("tolerances.speed"));
}

#[test]
fn output_directory_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_symdir"))
        .args(["run", fixture("gaussian_pass.json").to_str().unwrap()])
        .env("SYMDIR_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn no_particles_gives_a_trivial_decomposition() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("n0.json");
    std::fs::write(
        &config,
        r#"{"measures":[{"kind":"polynomial","coeffs":[0,0,0.5,0,0.25]}],
            "truncation":{"degree":6,"level":0},"tasks":["assemble","decompose"]}"#,
    )
    .unwrap();
    let out = run_into(&config, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let (_, report) = read_report(dir.path());
    let assemble = &report.tasks[0];
    assert_eq!(assemble.spectra[0].eigenvalues, assemble.spectra[1].eigenvalues);
    let remainder = &report.tasks[1].spectra[0].eigenvalues;
    assert!(remainder.iter().all(|&v| v == 0.0));
}

#[test]
fn explain_lists_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    run_into(&fixture("gaussian_pass.json"), dir.path(), &[]);
    let out = symdir(&["explain", dir.path().join("report.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("duality: pass"));
    assert!(text.contains("decomposition positivity: pass"));
}

#[test]
fn explain_rejects_missing_and_corrupt_reports() {
    let dir = tempfile::tempdir().unwrap();
    let missing = symdir(&["explain", dir.path().join("absent.json").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));
    let corrupt = dir.path().join("corrupt.json");
    std::fs::write(&corrupt, "{\"tool\": 3").unwrap();
    assert_eq!(symdir(&["explain", corrupt.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn explain_handles_a_report_without_tasks() {
    let dir = tempfile::tempdir().unwrap();
    run_into(&fixture("gaussian_pass.json"), dir.path(), &[]);
    let (_, mut report) = read_report(dir.path());
    report.tasks.clear();
    let path = dir.path().join("empty.json");
    std::fs::write(&path, report.to_json()).unwrap();
    let text = String::from_utf8(symdir(&["explain", path.to_str().unwrap()]).stdout).unwrap();
    assert!(text.contains("nothing to summarize"));
}
