//! The binary's contract: files written, exit codes, and the error
//! messages a user actually sees.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_blocksim");

fn blocksim(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary spawns")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal deaths")
}

/// A small, fast scenario; `spy` toggles the listening node.
fn write_scenario(path: &Path, spy: bool) {
    let text = format!(
        r#"
schema_version = 1
seed = 42
nodes = 4
mean_block_interval = 20.0
duration = 900.0

[latency]
kind = "uniform"
min_ms = 10.0
max_ms = 60.0

[[miners]]
node = 0
share = 0.4

[[miners]]
node = 1
share = 0.3

[[miners]]
node = 2
share = 0.3

[workload]
users = 8
addresses_per_user = 2
tx_rate = 0.1
fee = 100000

[workload.value]
kind = "fixed"
amount = 100000000

[attack]
kind = "double_spend"
attacker_share = 0.3
confirmations_required = 2
trial_count = 200
horizon = 40

[analysis]
spy = {spy}
"#
    );
    fs::write(path, text).unwrap();
}

#[test]
fn run_writes_the_full_output_set() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.toml");
    write_scenario(&scenario, true);
    let out_dir = dir.path().join("out");
    let out = blocksim(&["run", "--scenario", scenario.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr_of(&out));
    for name in ["trace.jsonl", "chain.jsonl", "metrics.csv", "resolved-config.json"] {
        let f = out_dir.join(name);
        assert!(f.is_file(), "{name} missing");
        assert!(fs::metadata(&f).unwrap().len() > 0, "{name} empty");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.toml");
    write_scenario(&scenario, true);
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let out = blocksim(&["run", "--scenario", scenario.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "stderr: {}", stderr_of(&out));
    }
    for name in ["trace.jsonl", "chain.jsonl", "metrics.csv"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn overcommitted_hashrate_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.toml");
    fs::write(
        &scenario,
        r#"
schema_version = 1

[[miners]]
node = 0
share = 0.7

[[miners]]
node = 1
share = 0.5
"#,
    )
    .unwrap();
    let out = blocksim(&["run", "--scenario", scenario.to_str().unwrap(), "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let err = stderr_of(&out);
    assert!(err.contains("miners"), "error must name the bad field: {err}");
}

#[test]
fn missing_scenario_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = blocksim(&["run", "--scenario", dir.path().join("absent.toml").to_str().unwrap(), "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(code(&out), 1, "stderr: {}", stderr_of(&out));
}

#[test]
fn attack_grid_rows_come_back_in_cell_order() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.toml");
    write_scenario(&scenario, false);
    let out_dir = dir.path().join("atk");
    let out = blocksim(&[
        "attack",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--grid",
        "0.0:1,0.3:2",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr_of(&out));
    let csv = fs::read_to_string(out_dir.join("attack_results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "q,z,trials,successes,rate,ci_low,ci_high");
    assert_eq!(lines.len(), 3);
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!((first[0], first[1]), ("0", "1"));
    assert_eq!(first[3], "0", "a powerless attacker never wins");
    let second: Vec<&str> = lines[2].split(',').collect();
    assert_eq!((second[0], second[1]), ("0.3", "2"));
    let rate: f64 = second[4].parse().unwrap();
    assert!(rate > 0.05, "a 30% attacker wins sometimes, got {rate}");
}

#[test]
fn empty_grid_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.toml");
    write_scenario(&scenario, false);
    let out = blocksim(&[
        "attack",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        dir.path().join("atk").to_str().unwrap(),
        "--grid",
        ",",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr_of(&out).contains("grid"), "stderr: {}", stderr_of(&out));
}

#[test]
fn analyze_matches_the_run_it_reads() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.toml");
    write_scenario(&scenario, true);
    let run_dir = dir.path().join("run");
    let out = blocksim(&["run", "--scenario", scenario.to_str().unwrap(), "--out", run_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0);

    let ana_dir = dir.path().join("ana");
    let out = blocksim(&[
        "analyze",
        "--chain",
        run_dir.join("chain.jsonl").to_str().unwrap(),
        "--trace",
        run_dir.join("trace.jsonl").to_str().unwrap(),
        "--out",
        ana_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr_of(&out));
    for name in ["clusters.csv", "deanon.csv", "metrics.csv"] {
        assert!(ana_dir.join(name).is_file(), "{name} missing");
    }
    // Metrics recomputed from the trace file equal the run's own.
    let from_run = fs::read(run_dir.join("metrics.csv")).unwrap();
    let from_files = fs::read(ana_dir.join("metrics.csv")).unwrap();
    assert_eq!(from_run, from_files);
}

#[test]
fn spyless_traces_skip_deanonymization_gracefully() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.toml");
    write_scenario(&scenario, false);
    let run_dir = dir.path().join("run");
    assert_eq!(code(&blocksim(&["run", "--scenario", scenario.to_str().unwrap(), "--out", run_dir.to_str().unwrap()])), 0);

    let ana_dir = dir.path().join("ana");
    let out = blocksim(&[
        "analyze",
        "--chain",
        run_dir.join("chain.jsonl").to_str().unwrap(),
        "--trace",
        run_dir.join("trace.jsonl").to_str().unwrap(),
        "--out",
        ana_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "a spyless trace is not an error");
    assert!(stdout_of(&out).contains("deanon skipped"), "stdout: {}", stdout_of(&out));
    assert!(!ana_dir.join("deanon.csv").exists());
    assert!(ana_dir.join("clusters.csv").is_file());
}

#[test]
fn truncated_chain_exports_are_refused_by_line() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.toml");
    write_scenario(&scenario, false);
    let run_dir = dir.path().join("run");
    assert_eq!(code(&blocksim(&["run", "--scenario", scenario.to_str().unwrap(), "--out", run_dir.to_str().unwrap()])), 0);

    let chain = fs::read_to_string(run_dir.join("chain.jsonl")).unwrap();
    let mut lines: Vec<String> = chain.lines().map(String::from).collect();
    assert!(lines.len() >= 3, "need a chain with blocks to damage");
    let cut = lines[2].len() / 2;
    lines[2].truncate(cut);
    let damaged = dir.path().join("damaged.jsonl");
    fs::write(&damaged, lines.join("\n")).unwrap();

    let out = blocksim(&[
        "analyze",
        "--chain",
        damaged.to_str().unwrap(),
        "--trace",
        run_dir.join("trace.jsonl").to_str().unwrap(),
        "--out",
        dir.path().join("ana").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr_of(&out).contains("line 3"), "stderr: {}", stderr_of(&out));
}

#[test]
fn report_summarizes_every_artifact_in_one_place() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.toml");
    write_scenario(&scenario, true);
    let out_dir = dir.path().join("all");
    assert_eq!(code(&blocksim(&["run", "--scenario", scenario.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])), 0);
    assert_eq!(
        code(&blocksim(&["attack", "--scenario", scenario.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])),
        0
    );
    assert_eq!(
        code(&blocksim(&[
            "analyze",
            "--chain",
            out_dir.join("chain.jsonl").to_str().unwrap(),
            "--trace",
            out_dir.join("trace.jsonl").to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ])),
        0
    );

    let out = blocksim(&["report", "--dir", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    for section in ["== metrics", "== attack results", "== clustering", "== deanonymization"] {
        assert!(text.contains(section), "missing {section} in:\n{text}");
    }

    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out = blocksim(&["report", "--dir", empty.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "an empty directory has nothing to report");
}
