use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_thermoline"))
}

fn run(config: &str, dir: &Path, extra: &[&str]) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    bin()
        .arg("--config")
        .arg(&cfg)
        .arg("--output")
        .arg(dir.join("out"))
        .args(extra)
        .env_remove("THERMOLINE_THREADS")
        .output()
        .unwrap()
}

fn manifest(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

const ENSEMBLE: &str = r#"{
  "command": "ensemble",
  "seed": 11,
  "model": {"kind": "spin_half", "gap": 1.0},
  "measurement": {"kind": "spin_energy", "gap": 1.0},
  "prior": {"alpha": -2.5, "theta_min": 0.1, "theta_max": 5.0},
  "grid_size": 512,
  "nu_grid": {"max": 100, "points": 6},
  "n_traj": 8
}"#;

#[test]
fn missing_seed_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(r#"{"command": "prior"}"#, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`seed`") && err.contains("line"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn invalid_field_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = ENSEMBLE.replace("\"n_traj\": 8", "\"n_traj\": 1");
    let out = run(&bad, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`n_traj`"));
}

#[test]
fn runtime_failure_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    // a regular file where the output directory should be
    fs::write(dir.path().join("out"), "").unwrap();
    let out = run(ENSEMBLE, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn ensemble_artifacts_are_reproducible_and_hashed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = manifest(&run(ENSEMBLE, a.path(), &[]));
    let mb = manifest(&run(ENSEMBLE, b.path(), &["--threads", "2"]));
    assert_eq!(ma["config_hash"], mb["config_hash"]);
    assert_eq!(ma["seed"], 11);
    assert!(ma["wall_time_s"].as_f64().unwrap() >= 0.0);
    for name in ["ensemble.csv", "ensemble.json"] {
        let x = fs::read(a.path().join("out").join(name)).unwrap();
        let y = fs::read(b.path().join("out").join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
    let csv = fs::read_to_string(a.path().join("out/ensemble.csv")).unwrap();
    let hash = ma["config_hash"].as_str().unwrap();
    assert!(csv.starts_with(&format!("# config_hash={hash}\n")));
    assert!(csv.contains("\nnu,emsd,emsle,ecrb,bcrb\n"));
    // no temp files left behind
    assert_eq!(fs::read_dir(a.path().join("out")).unwrap().count(), 2);
}

#[test]
fn seed_flag_overrides_config() {
    let a = tempfile::tempdir().unwrap();
    let m = manifest(&run(ENSEMBLE, a.path(), &["--seed", "99"]));
    assert_eq!(m["seed"], 99);
    let b = tempfile::tempdir().unwrap();
    let base = manifest(&run(ENSEMBLE, b.path(), &[]));
    assert_ne!(m["config_hash"], base["config_hash"]);
    assert_ne!(
        fs::read(a.path().join("out/ensemble.csv")).unwrap(),
        fs::read(b.path().join("out/ensemble.csv")).unwrap()
    );
}

#[test]
fn threads_env_var_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, ENSEMBLE).unwrap();
    let out = bin()
        .arg("--config")
        .arg(&cfg)
        .arg("--output")
        .arg(dir.path().join("out"))
        .env("THERMOLINE_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn geometry_csv_has_all_models() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"command": "geometry", "seed": 0, "geometry": {"ratio_min": 0.1, "ratio_max": 5.0, "points": 50}}"#;
    manifest(&run(cfg, dir.path(), &[]));
    let csv = fs::read_to_string(dir.path().join("out/geometry.csv")).unwrap();
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(
        lines.next(),
        Some("theta_over_gap,theta,qfi_reservoir,qfi_spin,qfi_boson,lambda_reservoir,lambda_spin,lambda_boson")
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 50);
    // reservoir metric is 1/theta^2 at unit capacity
    for r in &rows {
        assert!((r[2] * r[1] * r[1] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn prior_trajectory_bounds_and_adaptive_commands_run() {
    let model = r#""model": {"kind": "ideal_reservoir"}, "prior": {"alpha": -2.5, "theta_min": 0.1, "theta_max": 5.0}, "grid_size": 512"#;
    let cases = [
        (
            "prior",
            format!(r#"{{"command": "prior", "seed": 1, {model}}}"#),
            "prior.csv",
            "lambda,theta,density",
        ),
        (
            "trajectory",
            format!(
                r#"{{"command": "trajectory", "seed": 1, {model}, "measurement": {{"kind": "spin_energy", "gap": 2.0}}, "nu": 20, "true_theta": 1.0}}"#
            ),
            "trajectory.csv",
            "step,outcome,theta_hat_msd,theta_hat_msle,msd,msle,eps_adapted",
        ),
        (
            "bounds",
            format!(
                r#"{{"command": "bounds", "seed": 1, {model}, "measurement": {{"kind": "boson_occupation", "gap": 1.0}}, "nu_grid": [1, 10], "n_mc": 100}}"#
            ),
            "bounds.csv",
            "nu,ecrb,bcrb,tbcrb,tbcrb_std_error,q_prior",
        ),
        (
            "adaptive",
            format!(
                r#"{{"command": "adaptive", "seed": 1, {model}, "n_gap_candidates": 8, "nu_grid": [1, 5, 20], "n_traj": 4}}"#
            ),
            "adaptive.csv",
            "nu,emsd,emsle,ecrb,bcrb",
        ),
    ];
    for (name, cfg, file, header) in cases {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(&run(&cfg, dir.path(), &[]));
        assert_eq!(m["command"], name);
        let csv = fs::read_to_string(dir.path().join("out").join(file)).unwrap();
        assert!(csv.lines().any(|l| l == header), "{name}: header missing");
        assert!(csv.lines().next().unwrap().starts_with("# config_hash="));
    }
}

#[test]
fn documented_configs_are_valid() {
    let docs = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/configs");
    let mut seen = 0;
    for entry in fs::read_dir(&docs).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let out = bin().arg("--config").arg(&path).arg("--dry-run").output().unwrap();
        let m = manifest(&out);
        assert_eq!(m["command"], v["command"], "{}", path.display());
        assert_eq!(m["artifacts"].as_array().unwrap().len(), 0);
        seen += 1;
    }
    assert_eq!(seen, 6);
    // the cheap ones run end to end as written
    for name in ["prior.json", "geometry.json"] {
        let dir = tempfile::tempdir().unwrap();
        let out = bin()
            .arg("--config")
            .arg(docs.join(name))
            .arg("--output")
            .arg(dir.path())
            .output()
            .unwrap();
        manifest(&out);
    }
}
