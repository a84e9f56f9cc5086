use std::path::PathBuf;
use std::process::{Command, Output};

fn confgeom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_confgeom")).args(args).output().expect("binary runs")
}

fn scratch(name: &str, body: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("confgeom-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn passing_scenario_exits_zero() {
    let out = confgeom(&["verify", "hodge-identities"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["summary"]["failed"], 0);
    assert_eq!(v["version"], 1);
}

#[test]
fn unknown_metric_family_is_a_config_error() {
    let path = scratch(
        "bad-family.json",
        r#"{"name": "bad", "seed": 1, "backend": "dual", "metric": {"family": "klein-bottle"}, "checks": ["conformal.scalar-law"]}"#,
    );
    let out = confgeom(&["verify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(!out.stderr.is_empty());
}

#[test]
fn unknown_check_and_missing_file_are_config_errors() {
    let path = scratch(
        "bad-check.json",
        r#"{"name": "bad", "seed": 1, "backend": "dual", "metric": {"family": "flat"}, "checks": ["no.such-check"]}"#,
    );
    assert_eq!(confgeom(&["verify", path.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(confgeom(&["verify", "/nonexistent/scenario.json"]).status.code(), Some(2));
}

#[test]
fn failing_check_exits_one() {
    let path = scratch(
        "strict.json",
        r#"{"name": "strict", "seed": 3, "backend": "dual", "metric": {"family": "random"},
            "chart": {"lo": [-1, -1, -1], "hi": [1, 1, 1]}, "phi": "0.2*sin(x)*cos(y) + 0.1*z",
            "tolerances": {"conformal.connection-law": 1e-300}, "checks": ["conformal.connection-law"]}"#,
    );
    let out = confgeom(&["verify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["summary"]["failed"], 1);
}

#[test]
fn reports_are_reproducible_and_seeded() {
    let a = confgeom(&["verify", "conformal-identities-n3", "--seed", "11"]);
    let b = confgeom(&["verify", "conformal-identities-n3", "--seed", "11"]);
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["seed"], 11);
}

#[test]
fn fd_backend_override_is_reported() {
    let out = confgeom(&["verify", "einstein-pair-mobius", "--backend", "fd", "--format", "text"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("backend fd"));
    assert!(text.contains("failed 0"));
}

#[test]
fn holonomy_subcommand_reports_label() {
    let out = confgeom(&["holonomy", "holonomy-sphere"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["label"], "generic");
    assert_eq!(v["algebra_dim"], 1);
}

#[test]
fn list_scenarios_names_every_builtin() {
    let out = confgeom(&["list-scenarios"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), confgeom::harness::BUILTIN.len());
    assert!(text.lines().any(|l| l == "triple-warped-roundtrip"));
}
