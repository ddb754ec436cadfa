//! End-to-end tests of the binary: exit codes, report determinism, seeding
//! and the interactive loop.

use std::io::Write;
use std::process::{Command, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_condlab"))
}

fn write_structure(dir: &tempfile::TempDir, name: &str, doc: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, doc).unwrap();
    path.to_str().unwrap().to_string()
}

const A2: &str = r#"{"sig":[["R",2]],"n":2,"rels":{"R":[[0,0],[1,1]]}}"#;
const B2: &str = r#"{"sig":[["R",2]],"n":2,"rels":{"R":[[0,0],[0,1],[1,0],[1,1]]}}"#;

#[test]
fn check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let a2 = write_structure(&dir, "a2.json", A2);
    let b2 = write_structure(&dir, "b2.json", B2);

    let ok = bin().args(["check", &a2, &b2, "--mode", "cond"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let no = bin().args(["check", &b2, &a2, "--mode", "cond"]).output().unwrap();
    assert_eq!(no.status.code(), Some(1));
    let missing = dir.path().join("missing.json");
    let err = bin()
        .args(["check", &a2, missing.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(err.status.code(), Some(2));
    let bad_mode = bin()
        .args(["check", &a2, &b2, "--mode", "nonsense"])
        .output()
        .unwrap();
    assert_eq!(bad_mode.status.code(), Some(2));
}

#[test]
fn check_modes_agree_on_the_two_element_pair() {
    let dir = tempfile::tempdir().unwrap();
    let a2 = write_structure(&dir, "a2.json", A2);
    let b2 = write_structure(&dir, "b2.json", B2);
    for mode in ["cond", "game:4", "bfs", "rounds"] {
        let out = bin().args(["check", &a2, &b2, "--mode", mode]).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "mode {mode}");
        let out = bin().args(["check", &b2, &a2, "--mode", mode]).output().unwrap();
        assert_eq!(out.status.code(), Some(1), "mode {mode}");
    }
    // Bi-condensability fails in the backward direction.
    let out = bin()
        .args(["check", &a2, &b2, "--mode", "bicond", "--json"])
        .arg(dir.path().join("r.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap())
            .unwrap();
    assert_eq!(report["detail"]["failing_direction"], "RightToLeft");
}

#[test]
fn crossval_is_deterministic_up_to_timing() {
    let dir = tempfile::tempdir().unwrap();
    let run = |path: &str| {
        let out = bin()
            .args(["crossval", "--preset", "r2", "--max-n", "2", "--seed", "9", "--json"])
            .arg(dir.path().join(path))
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        let mut v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(path)).unwrap())
                .unwrap();
        v.as_object_mut().unwrap().remove("timing_ms");
        v
    };
    assert_eq!(run("first.json"), run("second.json"));
}

#[test]
fn crossval_mixed_signature() {
    let out = bin()
        .args(["crossval", "--preset", "r2s1", "--max-n", "2", "--seed", "11"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn crossval_zero_pair_count_still_runs_the_exhaustive_tier() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["crossval", "--preset", "r2", "--max-n", "2", "--pair-count", "0", "--json"])
        .arg(dir.path().join("r.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap())
            .unwrap();
    assert!(report["detail"]["pairs_checked"].as_u64().unwrap() > 300);
}

#[test]
fn mismatched_signatures_are_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let a2 = write_structure(&dir, "a2.json", A2);
    let other = write_structure(
        &dir,
        "other.json",
        r#"{"sig":[["lt",2]],"n":2,"rels":{"lt":[[0,1]]}}"#,
    );
    let out = bin().args(["check", &a2, &other]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn env_seed_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["crossval", "--preset", "r2", "--max-n", "1", "--seed", "5", "--json"])
        .arg(dir.path().join("r.json"))
        .env("CONDLAB_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap())
            .unwrap();
    assert_eq!(report["seed"], 77);
}

#[test]
fn demo_commands() {
    for (name, budget) in [("random-poset-nonrev", "60"), ("classC", "12"), ("example-I", "1")] {
        let out = bin().args(["demo", name, "--budget", budget]).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "demo {name}");
    }
    let out = bin().args(["demo", "no-such-demo"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn presets_parse_back() {
    for name in ["classC-fin", "classC-omega", "random-poset"] {
        let out = bin()
            .args(["preset", name, "--level", "7", "--seed", "3"])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "preset {name}");
        let doc = String::from_utf8(out.stdout).unwrap();
        condlab::structure::parse_structure(doc.trim()).unwrap();
    }
    // The separating pair prints both structures.
    let out = bin().args(["preset", "example-I", "--level", "4"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let doc = String::from_utf8(out.stdout).unwrap();
    let mut lines = doc.trim().lines();
    let left = condlab::structure::parse_structure(lines.next().unwrap()).unwrap();
    let right = condlab::structure::parse_structure(lines.next().unwrap()).unwrap();
    assert_eq!(left.universe_size(), right.universe_size());
}

#[test]
fn interactive_play_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let a2 = write_structure(&dir, "a2.json", A2);
    let b2 = write_structure(&dir, "b2.json", B2);
    let mut child = bin()
        .args(["play", &a2, &b2, "--rounds", "2", "--side", "I"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .as_mut()
        .unwrap()
        .write_all(b"L 0\nL 1\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("player II wins"), "got: {text}");
}
