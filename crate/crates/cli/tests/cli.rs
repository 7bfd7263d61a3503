use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn salesim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_salesim")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn demo() -> Value {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/scripted-demo.json");
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, v.to_string()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_config_is_a_nonzero_exit() {
    let o = salesim(&["personas", "--config", "/definitely/not/here.json", "--out", "/tmp/x"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("/definitely/not/here.json"), "{err}");
    assert_eq!(err.matches("No such file").count(), 1, "{err}");
}

#[test]
fn personas_prints_counts_per_condition() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = demo();
    cfg["sampling"]["personas_per_condition"] = json!(3);
    let c = write_config(tmp.path(), "c.json", &cfg);
    let out = tmp.path().join("run");
    let o = salesim(&["personas", "--config", s(&c), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    for label in ["Agr\t3", "Info\t3", "Fin\t3", "Edu\t3", "Heal\t3", "Arts\t3"] {
        assert!(stdout.contains(label), "{stdout}");
    }
    let text = std::fs::read_to_string(out.join("personas.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 18);
}

#[test]
fn seed_override_changes_personas() {
    let tmp = tempfile::tempdir().unwrap();
    let c = write_config(tmp.path(), "c.json", &demo());
    let read = |d: &str, seed: &str| {
        let out = tmp.path().join(d);
        assert!(salesim(&["personas", "--config", s(&c), "--out", s(&out), "--seed", seed]).status.success());
        std::fs::read_to_string(out.join("personas.jsonl")).unwrap()
    };
    assert_eq!(read("a", "11"), read("b", "11"));
    assert_ne!(read("c", "11"), read("d", "12"));
}

#[test]
fn strict_replay_with_cold_cache_fails_without_clobbering() {
    let tmp = tempfile::tempdir().unwrap();
    let c = write_config(tmp.path(), "c.json", &demo());
    let out = tmp.path().join("run");
    assert!(salesim(&["personas", "--config", s(&c), "--out", s(&out)]).status.success());
    let o = salesim(&["simulate", "--config", s(&c), "--out", s(&out), "--strict-replay"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("cache miss"), "{}", stderr(&o));
    assert!(!out.join("transcripts.jsonl").exists());
    assert!(!out.join("run.json").exists());
}

#[test]
fn warm_replay_cache_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("cache.jsonl");
    let mut cfg = demo();
    for role in ["user", "planner", "responder"] {
        let inner = cfg["roles"][role]["backend"].take();
        cfg["roles"][role]["backend"] = json!({"kind": "replay", "cache_path": cache, "inner": inner});
    }
    let c = write_config(tmp.path(), "c.json", &cfg);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(salesim(&["personas", "--config", s(&c), "--out", s(&a)]).status.success());
    assert!(salesim(&["simulate", "--config", s(&c), "--out", s(&a)]).status.success());
    let cached = std::fs::read_to_string(&cache).unwrap().lines().count();
    assert!(cached > 0);

    let o = salesim(&["simulate", "--config", s(&c), "--out", s(&b), "--personas", s(&a.join("personas.jsonl")), "--strict-replay"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read(a.join("transcripts.jsonl")).unwrap(),
        std::fs::read(b.join("transcripts.jsonl")).unwrap()
    );
    assert_eq!(std::fs::read_to_string(&cache).unwrap().lines().count(), cached);
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(b.join("run.json")).unwrap()).unwrap();
    assert_eq!(manifest["strict_replay"], json!(true));
}

#[test]
fn too_many_aborts_fail_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = demo();
    // one response, then the script is exhausted
    cfg["roles"]["responder"]["backend"] = json!({"kind": "scripted", "responses": ["{\"response\": \"hi\"}"], "mode": "queue"});
    let c = write_config(tmp.path(), "c.json", &cfg);
    let out = tmp.path().join("run");
    assert!(salesim(&["personas", "--config", s(&c), "--out", s(&out)]).status.success());
    let o = salesim(&["simulate", "--config", s(&c), "--out", s(&out)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("aborted"), "{}", stderr(&o));
    let aborted = std::fs::read_to_string(out.join("aborted.jsonl")).unwrap();
    assert!(aborted.lines().count() >= 119, "{aborted}");
    assert!(out.join("run.json").exists());

    // a permissive threshold lets the same run through
    cfg["abort_threshold"] = json!(1.0);
    let c = write_config(tmp.path(), "c2.json", &cfg);
    assert!(salesim(&["simulate", "--config", s(&c), "--out", s(&out)]).status.success());
}

#[test]
fn strategy_flags_are_validated() {
    let tmp = tempfile::tempdir().unwrap();
    let c = write_config(tmp.path(), "c.json", &demo());
    let out = tmp.path().join("run");
    assert!(salesim(&["personas", "--config", s(&c), "--out", s(&out)]).status.success());
    let o = salesim(&["simulate", "--config", s(&c), "--out", s(&out), "--strategy", "on", "--pipeline", "monolithic"]);
    assert!(!o.status.success());

    let o = salesim(&["simulate", "--config", s(&c), "--out", s(&out), "--strategy", "on"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = std::fs::read_to_string(out.join("transcripts.jsonl")).unwrap();
    let t: Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
    assert_eq!(t["strategy"]["sector"], json!("agr"));
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["pipeline"], json!({"mode": "planner_responder", "strategy_enabled": true}));
}

#[test]
fn analyze_reports_missing_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = salesim(&["analyze", s(tmp.path())]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("run.json"), "{}", stderr(&o));
}

#[test]
fn analyze_two_runs_writes_comparison() {
    let tmp = tempfile::tempdir().unwrap();
    let c = write_config(tmp.path(), "c.json", &demo());
    let (a, b, cmp) = (tmp.path().join("off"), tmp.path().join("on"), tmp.path().join("cmp"));
    for (dir, flag) in [(&a, "off"), (&b, "on")] {
        assert!(salesim(&["personas", "--config", s(&c), "--out", s(dir)]).status.success());
        assert!(salesim(&["simulate", "--config", s(&c), "--out", s(dir), "--strategy", flag]).status.success());
    }
    let o = salesim(&["analyze", s(&a), s(&b), "--out", s(&cmp)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["comparison.csv", "comparison.md", "comparison.json", "without/metrics.csv", "with/charts/occupation.svg"] {
        assert!(cmp.join(f).exists(), "{f}");
    }
    let md = std::fs::read_to_string(cmp.join("comparison.md")).unwrap();
    assert!(md.contains("w/o: planner/responder, strategy off"), "{md}");
    assert!(md.matches(" / ").count() >= 18, "{md}");
}
