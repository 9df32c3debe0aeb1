use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn confuse(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_confuse"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// The scripted e2e fixture copied into a scratch directory.
fn workspace() -> (tempfile::TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/e2e");
    for name in ["bench.jsonl", "docs.jsonl", "script.json", "run.json"] {
        std::fs::copy(fixtures.join(name), tmp.path().join(name)).unwrap();
    }
    let dir = tmp.path().to_path_buf();
    (tmp, dir)
}

#[test]
fn usage_errors_exit_2() {
    let dir = std::env::temp_dir();
    let out = confuse(&dir, &["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("Usage"));
    assert_eq!(confuse(&dir, &["eval", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(confuse(&dir, &["judge", "--strategy", "vibes"]).status.code(), Some(2));
}

#[test]
fn missing_config_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = confuse(dir.path(), &["eval", "--config", "absent/run.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("absent/run.json"), "{}", stderr(&out));
}

#[test]
fn dry_run_makes_no_calls() {
    let (_tmp, dir) = workspace();
    // A live backend pointing nowhere: any request would fail.
    let text = std::fs::read_to_string(dir.join("run.json"))
        .unwrap()
        .replace(r#""kind": "scripted",
    "script": "script.json""#, r#""kind": "live""#);
    assert!(text.contains(r#""kind": "live""#));
    std::fs::write(dir.join("live.json"), text).unwrap();
    assert!(confuse(&dir, &["index", "--config", "run.json"]).status.success());
    let out = confuse(&dir, &["eval", "--config", "live.json", "--dry-run"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("dry run ok: 12 cases"));
    assert!(!dir.join("report.json").exists());

    let out = confuse(&dir, &["dpo-seed", "--config", "live.json", "--cases", "bench.jsonl", "--out", "pairs.jsonl", "--dry-run"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("generators"));
}

#[test]
fn judge_resolve_report() {
    let (_tmp, dir) = workspace();
    assert!(confuse(&dir, &["index", "--config", "run.json"]).status.success());
    let out = confuse(&dir, &["judge", "--config", "run.json", "--out", "judgments.jsonl"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let judgments = std::fs::read_to_string(dir.join("judgments.jsonl")).unwrap();
    assert_eq!(judgments.lines().count(), 12);

    let out = confuse(
        &dir,
        &["resolve", "--config", "run.json", "--judgments", "judgments.jsonl", "--out", "transcripts.jsonl"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let transcripts = std::fs::read_to_string(dir.join("transcripts.jsonl")).unwrap();
    let mutrux = transcripts.lines().find(|l| l.contains(r#""case_id":"d-mutrux""#)).unwrap();
    assert!(mutrux.contains(r#""channel":"retrieval""#) && mutrux.contains(r#""final_answer":"yes""#));

    assert!(confuse(&dir, &["eval", "--config", "run.json", "--strategy", "prompt"]).status.success());
    let out = confuse(&dir, &["report", "--config", "run.json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let table = stdout(&out);
    assert!(table.contains("strategy prompt") && table.contains("average"), "{table}");
}

#[test]
fn serve_env_rejects_bad_inputs() {
    let (_tmp, dir) = workspace();
    let out = confuse(&dir, &["serve-env", "--config", "run.json", "--cases", "missing.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("missing.jsonl"));
    assert!(confuse(&dir, &["index", "--config", "run.json"]).status.success());
    let out = confuse(&dir, &["serve-env", "--config", "run.json", "--cases", "bench.jsonl", "--dry-run"]);
    assert!(out.status.success(), "{}", stderr(&out));
}
