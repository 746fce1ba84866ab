use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use semistiff_cli::record::SUMMARY_HEADER;

const LADDER: &str = r#"
[experiment]
kind = "ladder"
seeds = [3]

[annulus]
r_inner = 1.0
r_outer = 2.718281828459045

[sweep]
epsilons = [0.3]
d = 1
sectors = [[1, 1], [1, 0]]

[minimize]
max_iters = 3000
"#;

fn semistiff(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semistiff"))
        .args(args)
        .current_dir(dir)
        .env_remove("SEMISTIFF_WORKERS")
        .env_remove("SEMISTIFF_OUT")
        .env_remove("SEMISTIFF_SEED")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("exp.cfg");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_then_verify() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), LADDER);
    let out = tmp.path().join("a");
    let o = semistiff(&["run", &cfg, "--out", out.to_str().unwrap(), "--workers", "2"], tmp.path());
    assert!(o.status.success(), "{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));

    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some(SUMMARY_HEADER));
    assert_eq!(lines.count(), 2);
    assert_eq!(fs::read_to_string(out.join("runs.jsonl")).unwrap().lines().count(), 2);
    let plots: Vec<_> = fs::read_dir(out.join("plots")).unwrap().collect();
    assert!(!plots.is_empty());

    let v = semistiff(&["verify", out.to_str().unwrap()], tmp.path());
    assert!(v.status.success(), "{}", stdout(&v));
    assert!(stdout(&v).lines().all(|l| l.starts_with("PASS")));

    // the same config and seed reproduce the summary byte for byte
    let again = tmp.path().join("b");
    let o = semistiff(&["run", &cfg, "--out", again.to_str().unwrap()], tmp.path());
    assert!(o.status.success());
    assert_eq!(fs::read(out.join("summary.csv")).unwrap(), fs::read(again.join("summary.csv")).unwrap());

    // an energy trace edited to rise must be caught
    let runs = fs::read_to_string(out.join("runs.jsonl")).unwrap();
    let mut rec: serde_json::Value = serde_json::from_str(runs.lines().next().unwrap()).unwrap();
    let trace = rec["descent"]["energy_trace"].as_array_mut().unwrap();
    assert!(trace.len() >= 2);
    let last = trace.len() - 1;
    let bumped = trace[0]["total"].as_f64().unwrap() + 1.0;
    trace[last]["total"] = bumped.into();
    let mut edited = serde_json::to_string(&rec).unwrap();
    edited.push('\n');
    edited.push_str(runs.lines().nth(1).unwrap());
    edited.push('\n');
    fs::write(out.join("runs.jsonl"), edited).unwrap();
    let v = semistiff(&["verify", out.to_str().unwrap()], tmp.path());
    assert!(!v.status.success());
    assert!(stdout(&v).lines().any(|l| l.starts_with("FAIL") && l.contains("monotone trace")));

    // runs from two different configs cannot be verified together
    let other = write_config(tmp.path(), &LADDER.replace("max_iters = 3000", "max_iters = 2999"));
    let c = tmp.path().join("c");
    assert!(semistiff(&["run", &other, "--out", c.to_str().unwrap()], tmp.path()).status.success());
    let mixed = format!(
        "{}{}",
        fs::read_to_string(again.join("runs.jsonl")).unwrap(),
        fs::read_to_string(c.join("runs.jsonl")).unwrap()
    );
    fs::write(again.join("runs.jsonl"), mixed).unwrap();
    let v = semistiff(&["verify", again.to_str().unwrap()], tmp.path());
    assert!(!v.status.success());
    assert!(stdout(&v).contains("mixed config hashes"));
}

#[test]
fn environment_overrides_apply() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &LADDER.replace("[[1, 1], [1, 0]]", "[[1, 1]]"));
    let o = Command::new(env!("CARGO_BIN_EXE_semistiff"))
        .args(["run", &cfg])
        .current_dir(tmp.path())
        .env("SEMISTIFF_OUT", "from_env")
        .env("SEMISTIFF_SEED", "11")
        .env("SEMISTIFF_WORKERS", "1")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let runs = fs::read_to_string(tmp.path().join("from_env/runs.jsonl")).unwrap();
    let rec: serde_json::Value = serde_json::from_str(runs.lines().next().unwrap()).unwrap();
    assert_eq!(rec["seed"], 11);
}

#[test]
fn empty_sweep_succeeds_with_empty_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &LADDER.replace("[[1, 1], [1, 0]]", "[]"));
    let out = tmp.path().join("empty");
    let o = semistiff(&["run", &cfg, "--out", out.to_str().unwrap()], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(out.join("runs.jsonl")).unwrap(), "");
    assert_eq!(fs::read_to_string(out.join("summary.csv")).unwrap().trim_end(), SUMMARY_HEADER);
}

#[test]
fn verify_without_runs_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let v = semistiff(&["verify", tmp.path().to_str().unwrap()], tmp.path());
    assert!(!v.status.success());
    assert!(stdout(&v).contains("no runs found"));
}

#[test]
fn bad_config_exits_with_a_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &LADDER.replace("epsilons = [0.3]", "epsilons = [-0.3]"));
    let o = semistiff(&["run", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sweep.epsilons[0]"));
    assert!(!tmp.path().join("out").exists());
}
