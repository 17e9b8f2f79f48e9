use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn jcl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jcl")).args(args).output().expect("spawn jcl")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const STRONG: &str = r#"{"p1_alpha": 0.3, "p2_alpha": 0.7, "nu": {"j1": 0.2, "j2": 0.3, "j3": 0.5}, "C": 4.0, "runs": 400, "seed": 11}"#;

#[test]
fn same_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", STRONG);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (out, jobs) in [(&a, "1"), (&b, "0")] {
        let o = jcl(&["lottery-strong", "--config", &cfg, "--out", out.to_str().unwrap(), "--jobs", jobs]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("run_id,outcome,stages,z_value\n"));
    assert_eq!(text.lines().count(), 401);
    assert!(dir.path().join("a.json").exists());

    let c = dir.path().join("c.csv");
    jcl(&["lottery-strong", "--config", &cfg, "--out", c.to_str().unwrap(), "--seed", "12"]);
    assert_ne!(text, fs::read_to_string(&c).unwrap());
}

#[test]
fn degenerate_coin_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"p1_alpha": 0.0, "p2_alpha": 0.5, "nu": {"a": 1.0}, "C": 1.0}"#);
    let out = dir.path().join("o.csv");
    let o = jcl(&["lottery-strong", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("positive probability"));
}

#[test]
fn unknown_key_and_unknown_strategy_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.csv");
    let cfg = write_config(dir.path(), "a.json", r#"{"p1_alpha": 0.5, "p2_alpha": 0.5, "nu": {"a": 1.0}, "mode": 1}"#);
    assert_eq!(jcl(&["lottery-weak", "--config", &cfg, "--out", out.to_str().unwrap()]).status.code(), Some(2));
    let cfg = write_config(
        dir.path(),
        "b.json",
        r#"{"p1_alpha": 0.5, "p2_alpha": 0.5, "nu": {"a": 1.0}, "device1": "sneaky"}"#,
    );
    assert_eq!(jcl(&["lottery-weak", "--config", &cfg, "--out", out.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn missing_output_directory_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", STRONG);
    let out = dir.path().join("no/such/dir/o.csv");
    let o = jcl(&["lottery-strong", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no/such/dir"));
}

#[test]
fn gate_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"p1_alpha": 0.3, "p2_alpha": 0.7, "nu": {"j1": 0.2, "j2": 0.3, "j3": 0.5},
            "C": 0.01, "device1": "push:j1", "runs": 2000, "seed": 3}"#,
    );
    let out = dir.path().join("o.csv");
    let out = out.to_str().unwrap();
    assert_eq!(jcl(&["lottery-strong", "--config", &cfg, "--out", out, "--assert", "--eps", "0.01"]).status.code(), Some(3));
    // Without --assert the same run succeeds and records the failed gate.
    assert!(jcl(&["lottery-strong", "--config", &cfg, "--out", out, "--eps", "0.01"]).status.success());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o.json")).unwrap()).unwrap();
    assert_eq!(report["gate"]["passed"], false);
}

#[test]
fn honest_weak_lottery_passes_its_gate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"p1_alpha": 0.3, "p2_alpha": 0.7, "nu": {"j1": 0.2, "j2": 0.8}, "runs": 2000}"#);
    let out = dir.path().join("w.csv");
    let o = jcl(&["lottery-weak", "--config", &cfg, "--out", out.to_str().unwrap(), "--assert"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("run_id,outcome_or_timeout,stages,verdict\n"));
}

#[test]
fn detect_flags_the_stalling_device() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"p1_alpha": 0.3, "p2_alpha": 0.7, "nu": {"j1": 0.2, "j2": 0.8}, "device2": "stall", "device1": "honest"}"#,
    );
    let out = dir.path().join("d.csv");
    let o = jcl(&[
        "detect", "--config", &cfg, "--out", out.to_str().unwrap(), "--runs", "50", "--max-stages", "2000", "--assert",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(",timeout,2000,device2_faulty")), "{text}");
}
