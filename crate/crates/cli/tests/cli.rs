use std::path::Path;
use std::process::{Command, Output};

fn weakdep() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_weakdep"));
    c.env_remove("WEAKDEP_OUT");
    c
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_RATE: &str = r#"{
  "name": "small-rate",
  "seed": 7,
  "model": {"kind": "linear", "scheme": {"type": "geometric", "ratio": 0.5}, "law": {"kind": "rademacher"}},
  "task": {"kind": "rate", "grid": {"lo": 3, "hi": 7}, "replications": 3000,
           "normalizations": ["sqrt-n-ss2", "sqrt-ESn2"]}
}"#;

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "rate.json", SMALL_RATE);
    for (out, threads) in [("a", "1"), ("b", "3")] {
        let o = weakdep()
            .args(["run", &cfg, "--threads", threads, "--out"])
            .arg(tmp.path().join(out))
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = files(&tmp.path().join("a/small-rate"));
    let b = files(&tmp.path().join("b/small-rate"));
    assert!(a.iter().any(|(f, _)| f == "rate_sqrt-n-ss2.csv"));
    assert!(a.iter().any(|(f, _)| f == "rate_sqrt-ESn2_fit.json"));
    assert_eq!(a, b);

    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("a/small-rate/manifest.json")).unwrap()).unwrap();
    let digest_a = manifest["config_digest"].clone();
    let manifest_b: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("b/small-rate/manifest.json")).unwrap()).unwrap();
    assert_eq!(digest_a, manifest_b["config_digest"]);
    // grid point i owns replications [i R, (i + 1) R)
    let csv = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .find(|o| o["file"] == "rate_sqrt-n-ss2.csv")
        .unwrap();
    assert_eq!(csv["replications"][2]["first"], 6000);
    assert_eq!(csv["replications"][2]["end"], 9000);
}

#[test]
fn seed_override_changes_the_draws() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "rate.json", SMALL_RATE);
    for (out, seed) in [("a", "1"), ("b", "2")] {
        let o = weakdep()
            .args(["run", &cfg, "--seed", seed, "--out"])
            .arg(tmp.path().join(out))
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let read = |d: &str| std::fs::read(tmp.path().join(d).join("small-rate/rate_sqrt-n-ss2.csv")).unwrap();
    assert_ne!(read("a"), read("b"));
}

#[test]
fn boundary_violation_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "a.json",
        r#"{"name": "a", "seed": 1,
            "model": {"kind": "linear", "scheme": {"type": "power-law", "exponent": 2.0}, "law": {"kind": "standard-gaussian"},
                      "truncation": {"depth": 4096}},
            "task": {"kind": "assumptions", "levels": 8, "p": 3, "a": 1.0, "b": 0.6, "closed_form": true}}"#,
    );
    for cmd in ["validate", "run"] {
        let o = weakdep().args([cmd, &cfg]).current_dir(tmp.path()).output().unwrap();
        assert_eq!(o.status.code(), Some(3));
        let err = stderr(&o);
        assert!(err.contains("B(p)") && err.contains("task.b"), "{err}");
        assert!(err.contains("\"exit_code\":3"));
    }
}

#[test]
fn parse_errors_exit_2_with_position() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "p.json", "{\n  \"name\": \"x\",\n  \"seed\": -1\n}");
    let o = weakdep().args(["validate", &cfg]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("\"line\":3"), "{}", stderr(&o));
    let o = weakdep().args(["validate", "does-not-exist.json"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn cancellation_variance_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "v.json",
        r#"{"name": "v", "seed": 1,
            "model": {"kind": "linear", "scheme": {"type": "difference", "base": {"sequence": "power", "beta": 0.25}},
                      "law": {"kind": "standard-gaussian"}, "truncation": {"depth": 1024}},
            "task": {"kind": "variance", "max_lag": 64}}"#,
    );
    let o = weakdep().args(["run", &cfg, "--out"]).arg(tmp.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("degenerate-variance"));
}

#[test]
fn counterexample_preset_recovers_the_slope() {
    let tmp = tempfile::tempdir().unwrap();
    let o = weakdep()
        .args(["run", "preset:counterexample-1.3"])
        .env("WEAKDEP_OUT", tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = tmp.path().join("counterexample-1.3");
    let fit: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("counterexample_fit.json")).unwrap()).unwrap();
    let slope = fit["fit"]["slope"].as_f64().unwrap();
    assert!((slope + 0.3).abs() < 0.05, "slope {slope}");
    let csv = std::fs::read_to_string(dir.join("counterexample.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 11);
    let plot = std::fs::read_to_string(dir.join("counterexample_sqrt-n-ss2.dat")).unwrap();
    assert!(plot.starts_with('#'));
    assert_eq!(plot.lines().filter(|l| !l.starts_with('#')).count(), 11);
    // the sqrt(E S_n^2) curve is identically zero: sidecar only
    assert!(dir.join("counterexample_sqrt-ESn2.censored.dat").exists());
    assert!(!dir.join("counterexample_sqrt-ESn2.dat").exists());
}

#[test]
fn every_preset_is_listed_and_valid() {
    let o = weakdep().args(["presets", "list"]).output().unwrap();
    let list = String::from_utf8(o.stdout).unwrap();
    for name in ["doubling-cos", "gl2-walk", "counterexample-1.3", "cancellation-beta-0.25", "holder-of-linear"] {
        assert!(list.contains(name));
        let o = weakdep().args(["validate", &format!("preset:{name}")]).output().unwrap();
        assert!(o.status.success(), "{name}: {}", stderr(&o));
        // the printed document parses back
        let shown = weakdep().args(["presets", "show", name]).output().unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let cfg = write_config(tmp.path(), "p.json", &String::from_utf8(shown.stdout).unwrap());
        assert!(weakdep().args(["validate", &cfg]).output().unwrap().status.success());
    }
}

#[test]
fn depcoef_writes_profile_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "d.json",
        r#"{"name": "d", "seed": 3,
            "model": {"kind": "doubling", "observable": "cos2pi"},
            "task": {"kind": "depcoef", "levels": 4, "replications": 500}}"#,
    );
    let o = weakdep().args(["run", &cfg, "--out"]).arg(tmp.path()).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let plot = std::fs::read_to_string(tmp.path().join("d/depcoef.dat")).unwrap();
    assert!(plot.contains("# l theta_prime theta_star"));
    assert_eq!(plot.lines().filter(|l| !l.starts_with('#')).count(), 5);
}

#[test]
fn blocks_task_reports_identity() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "b.json",
        r#"{"name": "b", "seed": 3,
            "model": {"kind": "linear", "scheme": {"type": "geometric", "ratio": 0.5}, "law": {"kind": "standard-gaussian"}},
            "task": {"kind": "blocks", "n": 112, "m": 16, "replications": 10}}"#,
    );
    let o = weakdep().args(["run", &cfg, "--out"]).arg(tmp.path()).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("b/blocks.json")).unwrap()).unwrap();
    assert!(v["diagnostics"]["residual"].as_f64().unwrap() < 1e-10);
    assert_eq!(v["degeneracy_frequency"].as_f64(), Some(0.0));
    // a layout that cannot be tiled is a precondition failure
    let bad = write_config(tmp.path(), "c.json", &std::fs::read_to_string(tmp.path().join("b.json")).unwrap().replace("112", "100"));
    assert_eq!(weakdep().args(["validate", &bad]).output().unwrap().status.code(), Some(3));
}
