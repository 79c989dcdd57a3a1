use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kamforge"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn write_config(dir: &Path, v: &Value) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

#[test]
fn every_fixture_runs_offline() {
    let tmp = tempfile::tempdir().unwrap();
    for cmd in ["unfold", "nondegen", "dioph", "cover", "homsolve", "kamstep", "response", "sweep"] {
        let out = tmp.path().join(cmd);
        let o = run(cmd, &fixture(&format!("{cmd}.json")), &out, &[]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        let v = read_json(&out.join(format!("{cmd}.json")));
        assert_eq!(v["tool"], "kamforge");
        assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
        assert_eq!(v["command"], cmd);
        assert_eq!(v["config_digest"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn fixture_results() {
    let tmp = tempfile::tempdir().unwrap();
    let res = |cmd: &str| {
        let out = tmp.path().join(cmd);
        let o = run(cmd, &fixture(&format!("{cmd}.json")), &out, &[]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        read_json(&out.join(format!("{cmd}.json")))["result"].clone()
    };
    let u = res("unfold");
    assert_eq!(u["codimension"], 2);
    assert_eq!(u["transversality"]["holds"], true);
    assert_eq!(res("dioph")["verdict"]["satisfied"], true);
    let c = res("cover");
    assert!(c["push_forward_error"].as_f64().unwrap() < 1e-12);
    assert_eq!(c["deck_invariance_error"], 0.0);
    assert_eq!(c["sigma_checks"]["passed"], true);
    let h = res("homsolve");
    assert_eq!(h["residual_ok"], true);
    let k = res("kamstep");
    let slope = k["slope"].as_f64().unwrap();
    assert!((1.7..=2.3).contains(&slope), "{slope}");
    let s = res("sweep");
    assert!(!s["type_changes"].as_array().unwrap().is_empty());
}

fn small_measure(dir: &Path, seed: u64) -> PathBuf {
    std::fs::create_dir_all(dir.join("unfoldings")).unwrap();
    std::fs::copy(fixture("unfoldings/oscillator.json"), dir.join("unfoldings/oscillator.json")).unwrap();
    let mut cfg = read_json(&fixture("measure.json"));
    cfg["params"]["samples"] = json!(500);
    cfg["seed"] = json!(seed);
    write_config(dir, &cfg)
}

#[test]
fn measure_csv_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_measure(tmp.path(), 11);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run("measure", &cfg, &a, &[]).status.success());
    assert!(run("measure", &cfg, &b, &[]).status.success());
    let ca = std::fs::read(a.join("measure.csv")).unwrap();
    let cb = std::fs::read(b.join("measure.csv")).unwrap();
    assert_eq!(ca, cb);
    assert_eq!(std::fs::read(a.join("measure.svg")).unwrap(), std::fs::read(b.join("measure.svg")).unwrap());
    let text = String::from_utf8(ca).unwrap();
    let mut lines = text.lines();
    let stamp = lines.next().unwrap();
    let digest = read_json(&a.join("measure.json"))["config_digest"].as_str().unwrap().to_string();
    assert_eq!(stamp, format!("# kamforge {} config={digest}", env!("CARGO_PKG_VERSION")));
    assert_eq!(lines.next().unwrap(), "omega1,omega2,mu1,in_gamma,worst_k,worst_ell,margin");
    assert_eq!(lines.count(), 500);
}

#[test]
fn seed_override_changes_sample_and_digest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_measure(tmp.path(), 11);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run("measure", &cfg, &a, &[]).status.success());
    assert!(run("measure", &cfg, &b, &["--seed", "12"]).status.success());
    let ja = read_json(&a.join("measure.json"));
    let jb = read_json(&b.join("measure.json"));
    assert_ne!(ja["config_digest"], jb["config_digest"]);
    assert_eq!(jb["result"]["seed"], 12);
    let body = |d: &Path| {
        let s = std::fs::read_to_string(d.join("measure.csv")).unwrap();
        s.lines().skip(1).collect::<Vec<_>>().join("\n")
    };
    assert_ne!(body(&a), body(&b));
}

#[test]
fn json_format_embeds_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_measure(tmp.path(), 1);
    let out = tmp.path().join("o");
    assert!(run("measure", &cfg, &out, &["--format", "json"]).status.success());
    assert!(!out.join("measure.csv").exists());
    let v = read_json(&out.join("measure.json"));
    let rows = v["result"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 500);
    assert!(rows[0]["margin"].is_f64());
    assert_eq!(rows[0]["omega"].as_array().unwrap().len(), 2);
}

#[test]
fn fractions_do_not_increase_with_gamma() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_measure(tmp.path(), 5);
    let out = tmp.path().join("o");
    assert!(run("measure", &cfg, &out, &[]).status.success());
    let v = read_json(&out.join("measure.json"));
    assert_eq!(v["result"]["monotone_in_gamma"], true);
    let by: Vec<f64> = v["result"]["by_gamma"].as_array().unwrap().iter().map(|e| e["gamma"].as_f64().unwrap()).collect();
    assert_eq!(by, vec![1e-6, 1e-4, 1e-2]);
}

fn error_of(o: &Output, out: &Path) -> Value {
    let stderr = String::from_utf8(o.stderr.clone()).unwrap();
    let line: Value = serde_json::from_str(stderr.trim()).expect("stderr is one JSON record");
    let file = read_json(&out.join("error.json"));
    assert_eq!(line, file);
    line
}

#[test]
fn bad_config_gives_an_error_record() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &json!({"command": "dioph", "params": {"omega": [1.0]}}));
    let out = tmp.path().join("o");
    let o = run("dioph", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    let e = error_of(&o, &out);
    assert_eq!(e["error"]["kind"], "config");
    assert_eq!(e["tool"], "kamforge");
    assert!(e["error"]["message"].as_str().unwrap().contains("gamma"));
}

#[test]
fn missing_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = run("dioph", &tmp.path().join("nope.json"), &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_of(&o, &out)["error"]["kind"], "read");
}

#[test]
fn command_must_match_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = run("measure", &fixture("dioph.json"), &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(error_of(&o, &out)["error"]["message"].as_str().unwrap().contains("dioph"));
}

#[test]
fn small_divisor_refusal_is_a_computation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = read_json(&fixture("homsolve.json"));
    cfg["params"]["field"] = read_json(&fixture("fields/kam_example.json"));
    cfg["params"]["spec"]["gamma"] = json!(2.0);
    let path = write_config(tmp.path(), &cfg);
    let out = tmp.path().join("o");
    let o = run("homsolve", &path, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    let e = error_of(&o, &out);
    assert_eq!(e["error"]["kind"], "small_divisor");
    let k: Vec<i64> = serde_json::from_value(e["error"]["details"]["k"].clone()).unwrap();
    assert_eq!(k.iter().map(|v| v.abs()).sum::<i64>(), 2);
    assert_eq!(e["config_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn usage_errors_are_records_too() {
    let o = bin().args(["frobnicate", "--config", "x.json"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let v: Value = serde_json::from_str(String::from_utf8(o.stderr).unwrap().trim()).unwrap();
    assert_eq!(v["error"]["kind"], "usage");
}

#[test]
fn tol_override_reaches_the_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    // a residual of ~1e-17 fails a 1e-30 relative check
    let o = run("homsolve", &fixture("homsolve.json"), &out, &["--tol", "1e-30"]);
    assert!(o.status.success());
    let v = read_json(&out.join("homsolve.json"));
    let r = v["result"]["relative_residual"].as_f64().unwrap();
    assert_eq!(v["result"]["residual_ok"], r <= 1e-30);
}

#[test]
fn unfold_output_feeds_dioph() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &json!({
            "command": "unfold",
            "params": {"matrix": [[0.0, 1.0], [-1.0, 0.0]], "symmetry": {"r": [[-1.0, 0.0], [0.0, 1.0]]}}
        }),
    );
    let out = tmp.path().join("u");
    assert!(run("unfold", &cfg, &out, &[]).status.success());
    let unf = read_json(&out.join("unfold.json"))["result"]["unfolding"].clone();
    assert_eq!(unf["codimension"], 1);
    std::fs::write(tmp.path().join("unf.json"), unf.to_string()).unwrap();
    let cfg = write_config(
        tmp.path(),
        &json!({
            "command": "dioph",
            "params": {"omega": [1.0, 1.618], "unfolding": "unf.json", "mu": [0.0], "gamma": 1e-3, "tau": 1.5, "k_max": 10}
        }),
    );
    let out = tmp.path().join("d");
    let o = run("dioph", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&out.join("dioph.json"));
    let alpha: Vec<f64> = serde_json::from_value(v["result"]["alpha"].clone()).unwrap();
    assert_eq!(alpha.len(), 2);
    assert!(alpha.iter().all(|a| (a.abs() - 1.0).abs() < 1e-12), "{alpha:?}");
}
