//! End-to-end checks of the `approx-thompson` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use approx_thompson::experiment::output::{read_bound_csv, read_regret_csv, read_trajectories_csv};
use approx_thompson::experiment::RegretCurve;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_approx-thompson"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("motivating.toml");
    let mut tables = Vec::new();
    for (name, threads) in [("a.csv", "1"), ("b.csv", "1"), ("c.csv", "3")] {
        let out = dir.path().join(name);
        let output = run(&[
            "run",
            cfg.to_str().unwrap(),
            "--reps",
            "50",
            "--seed",
            "7",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&output), 0, "{}", String::from_utf8_lossy(&output.stderr));
        tables.push((fs::read(&out).unwrap(), fs::read(out.with_extension("meta.json")).unwrap()));
    }
    assert_eq!(tables[0], tables[1]);
    assert_eq!(tables[0], tables[2]);
    let text = String::from_utf8(tables[0].0.clone()).unwrap();
    assert!(text.starts_with("policy,step,mean_regret,ci_half_width,reps\n"));
    assert!(!text.contains('\r'));
    assert_eq!(text.lines().count(), 1 + 3 * 100);
}

#[test]
fn overrides_change_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("motivating.toml");
    let table = |seed: &str| {
        let out = dir.path().join(format!("{seed}.csv"));
        let output = run(&["run", cfg.to_str().unwrap(), "--reps", "20", "--seed", seed, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&output), 0);
        fs::read(out).unwrap()
    };
    assert_ne!(table("1"), table("2"));
}

#[test]
fn dump_reproduces_the_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig3a.csv");
    let output = run(&[
        "run",
        config("fig3a.toml").to_str().unwrap(),
        "--reps",
        "30",
        "--out",
        out.to_str().unwrap(),
        "--dump-trajectories",
    ]);
    assert_eq!(code(&output), 0);
    let curves = read_regret_csv(fs::File::open(&out).unwrap()).unwrap();
    let dump = read_trajectories_csv(fs::File::open(out.with_extension("reps.csv")).unwrap()).unwrap();
    assert_eq!(curves.len(), dump.len());
    for (curve, (policy, paths)) in curves.iter().zip(&dump) {
        assert_eq!(&curve.policy, policy);
        assert_eq!(paths.len(), 30);
        let again = RegretCurve::from_paths(policy.clone(), paths).unwrap();
        for t in 0..curve.horizon() {
            assert!((again.mean[t] - curve.mean[t]).abs() <= 1e-12);
            assert!((again.ci_half_width[t] - curve.ci_half_width[t]).abs() <= 1e-12);
        }
        assert!(curve.mean.windows(2).all(|w| w[1] >= w[0]));
        assert!(curve.ci_half_width.iter().all(|&c| c >= 0.0));
    }
}

#[test]
fn theory_tables() {
    let output = run(&["theory", "fig5"]);
    assert_eq!(code(&output), 0);
    let points = read_bound_csv(output.stdout.as_slice()).unwrap();
    assert!(!points.is_empty());
    assert!(points.iter().all(|p| (0.0..=0.05).contains(&p.value)));

    let output = run(&["theory", "fig6"]);
    assert_eq!(code(&output), 0);
    let points = read_bound_csv(output.stdout.as_slice()).unwrap();
    assert!(points.iter().any(|p| p.curve_id == "fig6a"));
    assert!(points.iter().any(|p| p.curve_id == "fig6b"));

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bounds.csv");
    let output = run(&["theory", config("bounds.toml").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&output), 0);
    assert_eq!(read_bound_csv(fs::File::open(out).unwrap()).unwrap().len(), 400);
}

#[test]
fn divergence_queries() {
    let output = run(&["divergence", config("kl_scaled.toml").to_str().unwrap()]);
    assert_eq!(code(&output), 0, "{}", String::from_utf8_lossy(&output.stderr));
    let text = String::from_utf8(output.stdout).unwrap();
    assert!(text.starts_with("alpha,method,value\n"));
    let kl: Vec<f64> = text
        .lines()
        .filter(|l| l.starts_with("1.0000000000000000e0,"))
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(kl.len(), 2);
    assert!((kl[0] - 1.49794).abs() < 1e-5);
    assert!((kl[0] - kl[1]).abs() < 1e-3);
}

#[test]
fn exit_codes() {
    assert_eq!(code(&run(&[])), 64);
    assert_eq!(code(&run(&["frobnicate"])), 64);
    assert_eq!(code(&run(&["run", "x.toml", "--bogus"])), 64);
    assert_eq!(code(&run(&["--help"])), 0);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let text = fs::read_to_string(config("motivating.toml")).unwrap().replace("horizon = 100", "horizon = 0");
    fs::write(&bad, text).unwrap();
    let output = run(&["run", bad.to_str().unwrap()]);
    assert_eq!(code(&output), 1);
    assert!(String::from_utf8_lossy(&output.stderr).contains("horizon"));
    assert_eq!(code(&run(&["run", dir.path().join("missing.toml").to_str().unwrap()])), 1);

    let narrow = dir.path().join("narrow.toml");
    fs::write(
        &narrow,
        r#"
alphas = [1.0]
p = { kind = "gaussian", mean = [0.0], covariance = [[1.0]] }
q = { kind = "gaussian", mean = [0.0], covariance = [[20.25]] }
grid = { lo = -20.0, hi = 20.0, points = 4001 }
"#,
    )
    .unwrap();
    let output = run(&["divergence", narrow.to_str().unwrap()]);
    assert_eq!(code(&output), 2);
    assert!(String::from_utf8_lossy(&output.stderr).contains("deficit"));
}

#[test]
fn validate_passes() {
    let output = run(&["validate"]);
    let text = String::from_utf8_lossy(&output.stdout);
    assert_eq!(code(&output), 0, "{text}");
    assert!(text.lines().filter(|l| l.starts_with("PASS ")).count() >= 10);
}
