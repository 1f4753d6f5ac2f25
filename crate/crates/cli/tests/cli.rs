use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kbl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kbl")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn list_shows_catalog() {
    let o = kbl(&["list"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    for id in ["shift_not_solvable", "diag_solvable", "diag_not_solvable", "weighted_lp", "shift2_not_ksolvable", "volterra"] {
        assert!(text.contains(id), "{id} missing");
    }
}

#[test]
fn unknown_case_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = kbl(&["case", "no_such_case", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn bad_flag_is_usage_error() {
    assert_eq!(code(&kbl(&["case"])), 2);
    assert_eq!(code(&kbl(&["frobnicate"])), 2);
}

#[test]
fn volterra_case_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = kbl(&["case", "volterra", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&dir.path().join("case_volterra.json"));
    assert_eq!(r["schema"], 1);
    assert_eq!(r["results"]["passed"], true);
    assert!(r.get("timings").is_none());
    assert!(dir.path().join("case_volterra_resolvent_cross_check.csv").exists());
    assert!(dir.path().join("case_volterra_d_m.csv").exists());
}

#[test]
fn override_is_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = kbl(&["case", "shift2_not_ksolvable", "--set", "n=30", "--set", "m=10", "--out", out]);
    assert_eq!(code(&o), 0);
    let r = read_json(&dir.path().join("case_shift2_not_ksolvable.json"));
    assert_eq!(r["config_echo"]["params"]["n"], 30);
    assert_eq!(r["results"]["distances_linf"].as_array().unwrap().len(), 10);
    assert_eq!(code(&kbl(&["case", "shift2_not_ksolvable", "--set", "bogus=1", "--out", out])), 2);
    assert_eq!(code(&kbl(&["case", "shift2_not_ksolvable", "--set", "n=oops", "--out", out])), 2);
}

#[test]
fn failed_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = kbl(&[
        "case",
        "diag_solvable",
        "--set",
        "n=300",
        "--set",
        "n_sweep=[]",
        "--set",
        "d_max=1e-12",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    let r = read_json(&dir.path().join("case_diag_solvable.json"));
    assert_eq!(r["results"]["observed_verdict"], "not-confirmed");
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = kbl(&["case", "weighted_lp", "shift2_not_ksolvable", "--out", d.path().to_str().unwrap()]);
        assert_eq!(code(&o), 0);
    }
    for name in ["case_weighted_lp.json", "case_shift2_not_ksolvable.json", "case_weighted_lp_d_m_l1.csv"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn timings_are_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let o = kbl(&["--timings", "case", "shift2_not_ksolvable", "--set", "n=20", "--set", "m=4", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(read_json(&dir.path().join("case_shift2_not_ksolvable.json"))["timings"]["total_seconds"].is_number());
}

const SWEEP: &str = r#"{
  "command": "krylov-dist",
  "operator": {"kind": "inv_sqrt", "dim": 200},
  "space": {"p": "inf", "dim": 200},
  "f": {"generator": "inv_sqrt"},
  "m": 6
}"#;

#[test]
fn krylov_dist_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sweep.json", SWEEP);
    let out1 = dir.path().join("one");
    let o = kbl(&["krylov-dist", "--config", &cfg, "--out", out1.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&out1.join("krylov_dist.json"));
    let d = r["results"]["distances"].as_array().unwrap();
    assert_eq!(d.len(), 6);
    let csv = std::fs::read_to_string(out1.join("krylov_dist_d_m.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);

    // the echoed config reproduces the same report
    let echo = serde_json::to_string(&r["config_echo"]).unwrap();
    let cfg2 = write_config(dir.path(), "echo.json", &echo);
    let out2 = dir.path().join("two");
    assert_eq!(code(&kbl(&["krylov-dist", "--config", &cfg2, "--out", out2.to_str().unwrap()])), 0);
    assert_eq!(std::fs::read(out1.join("krylov_dist.json")).unwrap(), std::fs::read(out2.join("krylov_dist.json")).unwrap());
}

#[test]
fn krylov_dist_schema_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let extra = write_config(dir.path(), "extra.json", &SWEEP.replace("\"m\": 6", "\"m\": 6, \"mystery\": true"));
    assert_eq!(code(&kbl(&["krylov-dist", "--config", &extra, "--out", out])), 2);
    let mismatch = write_config(dir.path(), "mismatch.json", SWEEP);
    assert_eq!(code(&kbl(&["krylov-dist", "--config", &mismatch, "--set", "space.dim=10", "--out", out])), 2);
    let wrong_cmd = write_config(dir.path(), "wrong.json", SWEEP);
    assert_eq!(code(&kbl(&["resolvent", "--config", &wrong_cmd, "--out", out])), 2);
    assert_eq!(code(&kbl(&["krylov-dist", "--config", "/nonexistent/config.json", "--out", out])), 2);
}

#[test]
fn resolvent_inverse_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let ok = write_config(
        dir.path(),
        "inv.json",
        r#"{"operator": {"kind": "diagonal", "entries": [2, 3, 4]}, "resolvent": {"target": [0, 0], "eps": 1e-8}}"#,
    );
    let o = kbl(&["resolvent", "--config", &ok, "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&dir.path().join("resolvent.json"));
    assert!(r["residuals"]["inverse_residual"].as_f64().unwrap() <= 1e-6);
    assert!(r["residuals"]["error_vs_direct"].as_f64().unwrap() <= r["results"]["error_bound"].as_f64().unwrap());

    // straight path from 3 to 0 crosses the eigenvalue 1
    let blocked = write_config(
        dir.path(),
        "blocked.json",
        r#"{"operator": {"kind": "diagonal", "entries": [1, -1, [0, 1], [0, -1]]},
            "resolvent": {"target": [0, 0], "start": [3, 0]}}"#,
    );
    assert_eq!(code(&kbl(&["resolvent", "--config", &blocked, "--out", out])), 1);
    let missing = write_config(dir.path(), "missing.json", r#"{"operator": {"kind": "harmonic", "dim": 3}}"#);
    assert_eq!(code(&kbl(&["resolvent", "--config", &missing, "--out", out])), 2);
}

#[test]
fn projection_paths() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let ok = write_config(
        dir.path(),
        "p.json",
        r#"{"operator": {"kind": "diagonal", "entries": [2, 0.5, 0.4]},
            "contours": [{"kind": "circle", "center": [2, 0], "radius": 0.5, "nodes": 64}]}"#,
    );
    assert_eq!(code(&kbl(&["projection", "--config", &ok, "--out", out])), 0);
    let r = read_json(&dir.path().join("projection.json"));
    assert_eq!(r["results"]["projections"][0]["rank"], 1);
    assert!(r["residuals"]["idempotency_residual_max"].as_f64().unwrap() <= 1e-10);

    let touching = write_config(
        dir.path(),
        "t.json",
        r#"{"operator": {"kind": "diagonal", "entries": [1]},
            "contours": [{"kind": "circle", "center": [0, 0], "radius": 1, "nodes": 8}]}"#,
    );
    assert_eq!(code(&kbl(&["projection", "--config", &touching, "--out", out])), 1);
    let bad_kind = write_config(
        dir.path(),
        "k.json",
        r#"{"operator": {"kind": "diagonal", "entries": [1]}, "contours": [{"kind": "ellipse"}]}"#,
    );
    assert_eq!(code(&kbl(&["projection", "--config", &bad_kind, "--out", out])), 2);
    let none = write_config(dir.path(), "n.json", r#"{"operator": {"kind": "diagonal", "entries": [1]}}"#);
    assert_eq!(code(&kbl(&["projection", "--config", &none, "--out", out])), 2);
}
