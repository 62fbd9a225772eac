use std::fs;
use std::path::Path;
use std::process::Command;

fn icebm(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_icebm")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn assert_finite_csv(path: &Path) {
    let text = fs::read_to_string(path).unwrap();
    for line in text.lines().skip(1) {
        for v in line.split(',') {
            assert!(v.parse::<f64>().unwrap().is_finite(), "{}: {line}", path.display());
        }
    }
}

#[test]
fn validate_with_defaults_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let o = icebm(&["validate", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("validation.json")).unwrap()).unwrap();
    for id in ["A4", "A6", "A7"] {
        let check = report["checks"].as_array().unwrap().iter().find(|c| c["id"] == id).unwrap();
        assert_eq!(check["passed"], true, "{id}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{\"kind\": \"validate\", ");
    assert_eq!(icebm(&["validate", "--config", &bad]).status.code(), Some(2));
    let unknown = write(dir.path(), "u.json", r#"{"kind": "validate", "params": {"Qq": 1}}"#);
    let o = icebm(&["validate", "--config", &unknown]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Qq"));
    let degenerate = write(dir.path(), "d.json", r#"{"kind": "validate", "params": {"b": 0.0}}"#);
    let out = dir.path().join("d");
    assert_eq!(
        icebm(&["validate", "--config", &degenerate, "--out", out.to_str().unwrap()]).status.code(),
        Some(3)
    );
    assert!(!out.exists(), "partial outputs are removed");
    let unstable = write(dir.path(), "s.json", r#"{"kind": "simulate", "run": {"dt": 0.5, "n_paths": 2}}"#);
    let o = icebm(&["simulate", "--config", &unstable, "--out", dir.path().join("s").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn drift_curves_for_three_solar_constants() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"kind": "drift-curve", "options": {"n_grid": 501}}"#);
    let out = dir.path().join("dc");
    let o = icebm(&["drift-curve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for q in ["327", "343", "350"] {
        let p = out.join(format!("drift_curve_Q{q}.csv"));
        assert!(fs::read_to_string(&p).unwrap().starts_with("eta,f_hat,sigma_hat\n"));
        assert_eq!(fs::read_to_string(&p).unwrap().lines().count(), 502);
        assert_finite_csv(&p);
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let stable = |i: usize| {
        manifest["summary"][i]["equilibria"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|e| e["stable"] == true)
            .count()
    };
    assert_eq!(stable(1), 2);
}

#[test]
fn flags_override_config_and_rerun_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"kind": "converge", "run": {"T": 0.2, "n_lat": 21, "seed": 5}, "options": {"n_grid": 201}}"#,
    );
    let a = dir.path().join("a");
    let o = icebm(&["converge", "--config", &cfg, "--out", a.to_str().unwrap(), "--seed", "9", "--paths", "6", "--eps", "0.2,0.1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("convergence.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 9);
    assert_eq!(report["n_paths"], 6);
    assert_eq!(report["epsilons"], serde_json::json!([0.2, 0.1]));
    let b = dir.path().join("b");
    let o = icebm(&["rerun", "--manifest", a.join("manifest.json").to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(a.join("convergence.json")).unwrap(), fs::read(b.join("convergence.json")).unwrap());
}

#[test]
fn density_csv_columns_are_finite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"kind": "density", "options": {"n_grid": 2001}}"#);
    let out = dir.path().join("d");
    assert_eq!(icebm(&["density", "--config", &cfg, "--out", out.to_str().unwrap()]).status.code(), Some(0));
    let csv = out.join("density.csv");
    assert!(fs::read_to_string(&csv).unwrap().starts_with("eta,f_hat,sigma_hat,density,log_density\n"));
    assert_finite_csv(&csv);
}

#[test]
fn help_lists_standard_defaults() {
    let o = icebm(&["validate", "--help"]);
    let text = String::from_utf8_lossy(&o.stdout);
    for needle in ["R=12.6", "Q=343", "a=202", "b=1.9", "c=3.04", "--seed", "--eps", "--paths"] {
        assert!(text.contains(needle), "{needle}");
    }
}
