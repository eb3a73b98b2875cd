use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("config.json");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_gradband"))
        .arg("--config")
        .arg(&path)
        .args(args)
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn out_arg(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

const TUNE: &str = r#"{
    "schema": 1,
    "prior": {"family": "two_point_k2"},
    "policy": {"name": "softelim", "theta": 1.0},
    "n": 50,
    "seed": 3,
    "tune": {"iterations": 4, "batch_size": 40, "baseline": "self", "calibration_batches": 3, "eval_every": 2},
    "eval": {"n_eval": 50}
}"#;

#[test]
fn tune_writes_artifacts_deterministically() {
    let dir = TempDir::new().unwrap();
    let mut csvs = Vec::new();
    for (name, workers) in [("a", "1"), ("b", "3")] {
        let out = run(dir.path(), TUNE, &["tune", "--out", &out_arg(dir.path(), name), "--workers", workers]);
        assert!(out.status.success(), "{}", stderr(&out));
        let run_dir = dir.path().join(name);
        assert!(run_dir.join("final_policy.json").exists());
        let summary: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(run_dir.join("summary.json")).unwrap()).unwrap();
        assert!(summary["final_regret"].is_number());
        assert!(summary["wall_time_s"].is_number());
        assert!(summary["c"].as_f64().unwrap() > 0.0);
        csvs.push(fs::read(run_dir.join("run.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    let text = String::from_utf8(csvs[0].clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "iteration,theta,grad_norm,alpha,eval_regret,eval_stderr");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("0,1,,,"));
    // Evaluated at iterations 2 and 4 only.
    assert!(lines[2].ends_with(",,"));
    assert!(!lines[3].ends_with(",,"));
    assert!(!text.contains('\r'));
}

#[test]
fn seed_flag_changes_and_fixes_output() {
    let dir = TempDir::new().unwrap();
    let read = |name: &str, seed: &str| {
        let out = run(dir.path(), TUNE, &["tune", "--out", &out_arg(dir.path(), name), "--seed", seed]);
        assert!(out.status.success(), "{}", stderr(&out));
        fs::read(dir.path().join(name).join("run.csv")).unwrap()
    };
    let a = read("a", "11");
    assert_eq!(a, read("b", "11"));
    assert_ne!(a, read("c", "12"));
}

#[test]
fn missing_prior_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let config = TUNE.replace(r#""prior": {"family": "two_point_k2"},"#, "");
    let out = run(dir.path(), &config, &["tune", "--out", &out_arg(dir.path(), "o")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("`prior`"), "{}", stderr(&out));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    let config = TUNE.replace(r#""n": 50,"#, r#""n": 50, "horizon": 50,"#);
    let out = run(dir.path(), &config, &["tune", "--out", &out_arg(dir.path(), "o")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("horizon"));
}

#[test]
fn missing_out_is_reported() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), TUNE, &["tune"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("`out`"));
}

const SWEEP: &str = r#"{
    "schema": 1,
    "prior": {"family": "two_point_k2"},
    "policy": "exp3",
    "n": 40,
    "eval": {"n_eval": 30},
    "sweep": {"theta_grid": GRID}
}"#;

#[test]
fn sweep_rows_follow_the_grid() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &SWEEP.replace("GRID", "[0.5]"), &["sweep", "--out", &out_arg(dir.path(), "one")]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("one/sweep.csv")).unwrap();
    assert_eq!(text.lines().collect::<Vec<_>>()[0], "theta,regret,stderr");
    assert_eq!(text.lines().count(), 2);

    let out = run(dir.path(), &SWEEP.replace("GRID", "[0.1, 0.5, 1.0]"), &["sweep", "--out", &out_arg(dir.path(), "three")]);
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(dir.path().join("three/sweep.csv")).unwrap().lines().count(), 4);
}

#[test]
fn empty_sweep_grid_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &SWEEP.replace("GRID", "[]"), &["sweep", "--out", &out_arg(dir.path(), "o")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("o/sweep.csv").exists());
}

#[test]
fn out_of_range_theta_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &SWEEP.replace("GRID", "[0.5, 2.0]"), &["sweep", "--out", &out_arg(dir.path(), "o")]);
    assert_eq!(out.status.code(), Some(2));
}

const VARIANCE: &str = r#"{
    "schema": 1,
    "prior": {"family": "two_point_k2"},
    "policy": "softelim",
    "n": 40,
    "seed": 5,
    "variance": {"theta_grid": [0.5, 2.0], BASELINES "m": 50}
}"#;

#[test]
fn variance_rows_per_baseline() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &VARIANCE.replace("BASELINES", ""), &["variance", "--out", &out_arg(dir.path(), "all")]);
    assert!(out.status.success(), "{}", stderr(&out));
    let all = fs::read_to_string(dir.path().join("all/variance.csv")).unwrap();
    assert_eq!(all.lines().next(), Some("theta,baseline,mean_grad,var_grad,m"));
    assert_eq!(all.lines().count(), 7);

    let out = run(
        dir.path(),
        &VARIANCE.replace("BASELINES", r#""baselines": ["opt"],"#),
        &["variance", "--out", &out_arg(dir.path(), "opt"), "--workers", "2"],
    );
    assert!(out.status.success());
    let opt = fs::read_to_string(dir.path().join("opt/variance.csv")).unwrap();
    let rows: Vec<&str> = opt.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("opt")));
    // Same draws whichever baselines are requested.
    let from_all: Vec<&str> = all.lines().filter(|l| l.contains(",opt,")).collect();
    assert_eq!(rows, from_all);
}

const BENCH: &str = r#"{
    "schema": 1,
    "prior": {"family": "beta_bernoulli", "k": 3},
    "n": 30,
    "seed": 2,
    "eval": {"n_eval": 40},
    "bench": {"policies": POLICIES}
}"#;

#[test]
fn bench_writes_one_row_per_policy() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &BENCH.replace("POLICIES", r#"["ts"]"#), &["bench", "--out", &out_arg(dir.path(), "one")]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("one/bench.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "policy,prior,n,regret,stderr,n_eval,seed");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("ts,beta_bernoulli,30,"));
    assert!(lines[1].ends_with(",40,2"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("ts"));

    let policies = r#"["ucb1", {"name": "ucbv", "zeta": 1.0}, "oracle"]"#;
    let out = run(dir.path(), &BENCH.replace("POLICIES", policies), &["bench", "--out", &out_arg(dir.path(), "three")]);
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("three/bench.csv")).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.contains("oracle,beta_bernoulli,30,0.0,0.0,40,2"));
}

#[test]
fn unknown_policy_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &BENCH.replace("POLICIES", r#"["ts", "gittins"]"#), &["bench", "--out", &out_arg(dir.path(), "o")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("gittins"));
}

const CONCAVITY: &str = r#"{
    "schema": 1,
    "n": 20,
    "seed": 1,
    "concavity": {
        "mixture": [{"weight": 0.5, "mu1": 0.6, "mu2": 0.4}, {"weight": 0.5, "mu1": 1.0, "mu2": 0.0}],
        GRID
        "mc_points": 3,
        "mc_rollouts": 500
    }
}"#;

#[test]
fn concavity_passes_on_the_default_grid() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &CONCAVITY.replace("GRID", ""), &["concavity", "--out", &out_arg(dir.path(), "c")]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("c/concavity.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "theta,closed_form,second_diff,mc_reward,mc_stderr");
    // theta = 1, 1.5, ..., 10
    assert_eq!(lines.len(), 1 + 19);
    assert_eq!(lines.iter().skip(1).filter(|l| !l.ends_with(",,")).count(), 3);
    let flag: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("c/concavity.json")).unwrap()).unwrap();
    assert_eq!(flag["concave"], serde_json::Value::Bool(true));
}

#[test]
fn concavity_needs_three_points() {
    let dir = TempDir::new().unwrap();
    let out = run(
        dir.path(),
        &CONCAVITY.replace("GRID", r#""theta_grid": [1.0, 2.0],"#),
        &["concavity", "--out", &out_arg(dir.path(), "c")],
    );
    assert_eq!(out.status.code(), Some(2));
}
