use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sobemp(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sobemp"))
        .args(args)
        .arg("--output-dir")
        .arg(dir)
        .env_remove("SOBEMP_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn gaussian_norm_extrapolates_to_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = sobemp(&["gaussian-norm"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("gaussian_norm.csv")).unwrap();
    let last = text.lines().last().unwrap();
    let scaled: f64 = last.split(',').nth(3).unwrap().parse().unwrap();
    assert!((scaled - 2.0).abs() < 1e-3, "{last}");
}

#[test]
fn point_mass_identity_passes() {
    let dir = tempfile::tempdir().unwrap();
    let model = r#"model={"type":"discrete","dim":1,"weights":[1.0],"locations":[[0.0]]}"#;
    let o = sobemp(&["identity-check", "--set", model, "--set", "replicas=50"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS"));
    let summary = fs::read_to_string(dir.path().join("summary.json")).unwrap();
    assert!(summary.contains("\"exact\": 0.0"));
    let csv = fs::read_to_string(dir.path().join("replicas.csv")).unwrap();
    assert!(csv.starts_with("n,replica,seed,norm_value,wall_ms"));
}

#[test]
fn default_rate_sweep_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = sobemp(&["rate-sweep"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("slope = -0.4"));
}

#[test]
fn failed_assertion_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = sobemp(
        &["identity-check", "--set", "thresholds.sigmas=0", "--set", "thresholds.quad_budget_rel=0", "--set", "replicas=40"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = sobemp(&["rate-sweep", "--set", "params.beta=1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("params.beta"));
    assert_eq!(sobemp(&["rate-sweep", "--set", "novalue"], dir.path()).status.code(), Some(2));
    assert_eq!(sobemp(&["no-such-command"], dir.path()).status.code(), Some(2));
    // ε = 0 outside the supercritical regime
    let o = sobemp(&["rate-sweep", "--set", "params.alpha=0.4"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"schema_version": 42}"#).unwrap();
    let o = sobemp(&["tail-sweep", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.json"));
}

#[test]
fn dry_run_computes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = sobemp(&["tail-sweep", "--dry-run"], &out);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("plan:"));
    assert!(!out.exists());
}

#[test]
fn seeds_reproduce() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str| {
        let o = sobemp(&["norm", "--seed", seed, "--set", "n=64"], dir.path());
        assert_eq!(o.status.code(), Some(0));
        stdout(&o)
    };
    assert_eq!(run("5"), run("5"));
    assert_ne!(run("5"), run("6"));
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let o = sobemp(&["identity-check", "--set", "replicas=40", "--set", "n_grid=[10,20]", "--threads", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let first = fs::read_to_string(dir.path().join("summary.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&first).unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, serde_json::to_string(&v["config"]).unwrap()).unwrap();
    let again = dir.path().join("again");
    let o = sobemp(&["identity-check", "--config", cfg.to_str().unwrap()], &again);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(first, fs::read_to_string(again.join("summary.json")).unwrap());
}

#[test]
fn b0_and_sigma_check_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(sobemp(&["b0", "--set", "eps=0.1"], dir.path()).status.code(), Some(0));
    assert!(dir.path().join("b0.csv").exists());
    let o = sobemp(&["sigma-check", "--set", "alphas=[1.5]", "--set", "ps=[2]", "--set", "eps_grid=[0.1]"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = fs::read_to_string(dir.path().join("sigma.csv")).unwrap();
    assert!(text.starts_with("alpha,p,eps,lhs,rhs,ratio"));
}
