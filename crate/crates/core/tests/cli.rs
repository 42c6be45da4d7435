use std::path::Path;
use std::process::Command;

fn speechfix(args: &[&str], cwd: &Path, workers: Option<&str>) -> (i32, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_speechfix"));
    cmd.args(args).current_dir(cwd);
    match workers {
        Some(w) => cmd.env("SPEECHFIX_WORKERS", w),
        None => cmd.env_remove("SPEECHFIX_WORKERS"),
    };
    let out = cmd.output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap(), text)
}

#[test]
fn simulate_restore_evaluate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"corpus": {"utterances": 2, "segment_seconds": 1.0}, "synthesis": {"griffin_lim_iters": 2}}"#,
    )
    .unwrap();
    for cmd in ["simulate", "restore", "evaluate"] {
        let (code, out) = speechfix(&[cmd, "--config", "cfg.json", "--seed", "5", "--out", "runs"], dir.path(), Some("1"));
        assert_eq!(code, 0, "{cmd}: {out}");
    }
    let runs: Vec<_> = std::fs::read_dir(dir.path().join("runs")).unwrap().collect();
    assert_eq!(runs.len(), 1);
    let run = runs[0].as_ref().unwrap().path();
    assert!(run.join("report_oracle.json").exists());
    let manifest = std::fs::read_to_string(run.join("manifest.csv")).unwrap();
    let hash = manifest.lines().nth(1).unwrap().rsplit(',').next().unwrap();
    assert!(hash.starts_with(run.file_name().unwrap().to_str().unwrap()));
}

#[test]
fn invalid_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"schema_version": 99}"#).unwrap();
    std::fs::write(dir.path().join("ok.json"), "{}").unwrap();
    assert_eq!(speechfix(&["simulate", "--config", "bad.json"], dir.path(), None).0, 2);
    assert_eq!(speechfix(&["simulate", "--config", "missing.json"], dir.path(), None).0, 2);
    let (code, out) = speechfix(&["simulate", "--config", "ok.json"], dir.path(), Some("zero"));
    assert_eq!(code, 2);
    assert!(out.contains("SPEECHFIX_WORKERS"));
    assert_eq!(speechfix(&["bogus"], dir.path(), None).0, 2);
}

#[test]
fn partial_failure_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("m.csv"),
        "item_id,clean_path,degraded_path,applied_params,duration_s,sample_rate,config_hash\n\
         a,nope/a.wav,nope/a_deg.wav,[],3.0,44100,x\n",
    )
    .unwrap();
    std::fs::write(dir.path().join("cfg.json"), r#"{"evaluate": {"manifest": "m.csv", "estimate": "degraded"}}"#).unwrap();
    let (code, out) = speechfix(&["evaluate", "--config", "cfg.json"], dir.path(), None);
    assert_eq!(code, 1, "{out}");
    assert!(out.contains("failed a"));
}
