//! End-to-end runs of the command-line binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bimpilot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bimpilot")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn first_task(dir: &Path) -> PathBuf {
    let mut tasks: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    tasks.sort();
    tasks.remove(0)
}

#[test]
fn generate_run_evaluate_report_render() {
    let tmp = tempfile::tempdir().unwrap();
    let suite = tmp.path().join("suite");
    let out = bimpilot(&["gen-bench", "--seed", "0", "--out", s(&suite)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_dir(&suite).unwrap().count(), 25);

    let again = tmp.path().join("again");
    assert!(bimpilot(&["gen-bench", "--seed", "0", "--out", s(&again)]).status.success());
    let task = first_task(&suite);
    assert_eq!(fs::read(&task).unwrap(), fs::read(first_task(&again)).unwrap());

    let runs = tmp.path().join("runs");
    let out = bimpilot(&["run", "--task", s(&task), "--seed", "1", "--out", s(&runs)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let id = report["task_id"].as_str().unwrap().to_string();
    for ext in ["report.json", "document.json", "trace.json", "interactions.jsonl", "timing.json"] {
        assert!(runs.join(format!("{id}.{ext}")).is_file(), "missing {ext}");
    }

    let doc = runs.join(format!("{id}.document.json"));
    let out = bimpilot(&["eval", "--doc", s(&doc), "--truth", s(&task)]);
    assert_eq!(out.status.code(), Some(0));
    let ev: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(ev["census_match"], true);

    for (format, marker) in [("table", "full"), ("csv", ","), ("json", "{")] {
        let out = bimpilot(&["report", "--in", s(&runs), "--format", format]);
        assert!(out.status.success());
        assert!(String::from_utf8_lossy(&out.stdout).contains(marker), "{format}");
    }

    let ppm = tmp.path().join("frame.ppm");
    let trace = runs.join(format!("{id}.trace.json"));
    let out = bimpilot(&["render", "--trace", s(&trace), "--frame-index", "0", "--out", s(&ppm)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read(&ppm).unwrap().starts_with(b"P6"));
    let out = bimpilot(&["render", "--trace", s(&trace), "--frame-index", "99999999", "--out", s(&ppm)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.json");
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, b"{\"not\": \"a task\"}").unwrap();
    let out_dir = tmp.path().join("o");

    assert_eq!(bimpilot(&[]).status.code(), Some(2));
    assert_eq!(bimpilot(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(bimpilot(&["run", "--task", s(&bad), "--out", s(&out_dir)]).status.code(), Some(2));
    assert_eq!(bimpilot(&["report", "--in", s(tmp.path())]).status.code(), Some(2));

    let suite = tmp.path().join("suite");
    assert!(bimpilot(&["gen-bench", "--out", s(&suite)]).status.success());
    let task = first_task(&suite);
    let out = bimpilot(&["run", "--task", s(&task), "--fault-rate", "1.5", "--out", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fault rate"));
    let out = bimpilot(&["run", "--task", s(&task), "--ablate", "telepathy", "--out", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(2));
    // Missing input file is an I/O failure, not a usage error.
    assert_eq!(bimpilot(&["run", "--task", s(&missing), "--out", s(&out_dir)]).status.code(), Some(1));
}

#[test]
fn http_backend_requires_the_key_variable() {
    let tmp = tempfile::tempdir().unwrap();
    let suite = tmp.path().join("suite");
    assert!(bimpilot(&["gen-bench", "--out", s(&suite)]).status.success());
    let task = first_task(&suite);
    let config = tmp.path().join("http.json");
    let body = r#"{"backend": {"kind": "http", "endpoint": "http://127.0.0.1:9/v1", "model": "m",
        "timeout_secs": 1.0, "api_key_env": "BIMPILOT_CLI_TEST_KEY"}}"#;
    fs::write(&config, body).unwrap();
    let run = |backend: &str| {
        Command::new(env!("CARGO_BIN_EXE_bimpilot"))
            .args(["run", "--task", s(&task), "--config", s(&config), "--backend", backend])
            .args(["--out", s(&tmp.path().join("o"))])
            .env_remove("BIMPILOT_CLI_TEST_KEY")
            .output()
            .unwrap()
    };
    let out = run("http");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("BIMPILOT_CLI_TEST_KEY"));
    // HTTP settings are rejected when the scripted backend is selected.
    assert_eq!(run("scripted").status.code(), Some(2));
}
