use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use certiverify::dataset::save_dataset;
use certiverify::{Dataset, GroundTruth};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_certiverify")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn scalars(dir: &Path, name: &str, xs: &[f64], invalid: &[usize]) -> String {
    let path = dir.join(name);
    save_dataset(&path, &Dataset::from_scalars(xs).unwrap(), &GroundTruth::with_invalid(xs.len(), invalid)).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn certify_single_run_and_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let input = scalars(dir.path(), "d.json", &[9.0, 1.0], &[0]);
    let out = cli(&["certify", "--scheme", "sum", "--input", &input, "--epsilon", "0.5", "--delta", "0.1", "--seed", "1"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("invalid records: [0]"));

    let csv = dir.path().join("r.csv");
    let csv_s = csv.to_string_lossy();
    let args = ["certify", "--scheme", "sum", "--input", &input, "--epsilon", "0.5", "--delta", "0.1", "--trials", "1000", "--out", &csv_s];
    assert!(cli(&args).status.success());
    let first = fs::read_to_string(&csv).unwrap();
    assert!(first.starts_with("scheme,adversary,epsilon,delta,trials,failure_rate,"));
    assert!(first.contains("\nsum,as-loaded,0.5,0.1,1000,0,"));
    assert!(cli(&args).status.success());
    assert_eq!(fs::read_to_string(&csv).unwrap(), first);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let input = scalars(dir.path(), "d.json", &[1.0, 1.0], &[0, 1]);
    let bad_scheme = cli(&["certify", "--scheme", "nope", "--input", &input, "--epsilon", "0.5", "--delta", "0.1"]);
    assert_eq!(bad_scheme.status.code(), Some(2));
    let bad_eps = cli(&["certify", "--scheme", "sum", "--input", &input, "--epsilon", "1.5", "--delta", "0.1"]);
    assert_eq!(bad_eps.status.code(), Some(2));
    let missing = cli(&["certify", "--scheme", "sum", "--input", "/nonexistent.json", "--epsilon", "0.5", "--delta", "0.1"]);
    assert_eq!(missing.status.code(), Some(2));
    let failure = cli(&["correct", "--mode", "strong-max", "--input", &input, "--epsilon", "0.5", "--delta", "0.1"]);
    assert_eq!(failure.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&failure.stderr).contains("correction failure"));
}

#[test]
fn correct_modes() {
    let dir = tempfile::tempdir().unwrap();
    let input = scalars(dir.path(), "d.json", &[10.0, 10.0, 1.0, 1.0, 1.0, 1.0], &[0, 1]);
    let weak = cli(&["correct", "--mode", "weak", "--input", &input, "--epsilon", "0.3", "--delta", "0.1", "--seed", "4"]);
    assert!(weak.status.success());
    assert!(stdout(&weak).contains("value: 4"));
    let strong = cli(&["correct", "--mode", "strong-max", "--input", &input, "--epsilon", "0.3", "--delta", "0.1"]);
    assert!(strong.status.success());
    assert!(stdout(&strong).contains("value: 1"));
    let general = cli(&["correct", "--mode", "weak", "--scheme", "average", "--input", &input, "--epsilon", "0.3", "--delta", "0.1"]);
    assert_eq!(general.status.code(), Some(2));
}

#[test]
fn instopt_reports_plan_and_lipschitz_feasibility() {
    let dir = tempfile::tempdir().unwrap();
    let input = scalars(dir.path(), "d.json", &[1.0, 1.0, 1.0, 1.0], &[]);
    let out = cli(&["instopt", "--input", &input, "--epsilon", "0.5", "--check-lipschitz"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("minimal violating sets: 4"), "{text}");
    assert!(text.contains("p feasible: true"));
    assert!(text.contains("lipschitz p feasible: true"));
}

#[test]
fn gen_writes_a_loadable_hard_instance() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hard.json");
    let p = path.to_string_lossy();
    let out = cli(&["gen", "--adversary", "max-of-sums-hard", "--params", "c=2,n=16", "--out", &p, "--seed", "5"]);
    assert!(out.status.success());
    let (ds, truth) = certiverify::load_dataset(&path).unwrap();
    assert_eq!(ds.len(), 16);
    assert_eq!(truth.invalid_ids().len(), 12);
    let bad = cli(&["gen", "--adversary", "max-of-sums-hard", "--params", "c=3,n=16", "--out", &p]);
    assert_eq!(bad.status.code(), Some(2));
}
