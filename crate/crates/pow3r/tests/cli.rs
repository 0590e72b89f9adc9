//! End-to-end CLI tests: real process, real files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn pow3r() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pow3r"))
}

fn run(args: &[&str]) -> Output {
    pow3r().args(args).output().expect("binary runs")
}

fn assert_code(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, contents).unwrap();
    path
}

const TASKS: &str = r#"{"schema":"pow3r.tasks.v1"}
{"id":"t1","prompt":"describe","criteria":[{"id":"a","text":"mentions the chart","weight":2,"category":"perception","required":true},{"id":"b","text":"correct trend","weight":3,"category":"perception"},{"id":"c","text":"clear writing","weight":1,"category":"style","required":false}]}
{"id":"t2","prompt":"count","criteria":[{"id":"a","text":"count is right","weight":5,"category":"perception","required":true},{"id":"b","text":"units given","weight":1,"category":"style","required":false}]}
"#;

const VERDICTS: &str = r#"{"schema":"pow3r.verdicts.v1"}
{"task_id":"t1","group_size":4,"verdicts":[[{"value":"pass"},{"value":"pass"},{"value":"pass"}],[{"value":"pass"},{"value":"fail"},{"value":"pass"}],[{"value":"fail"},{"value":"pass"},{"value":"pass"}],[{"value":"pass"},{"value":"fail"},{"value":"pass"}]]}
{"task_id":"t2","group_size":4,"verdicts":[[{"value":"pass"},{"value":"pass"}],[{"value":"pass"},{"value":"fail"}],[{"value":"fail"},{"value":"invalid"}],[{"value":"pass"},{"value":"fail"}]]}
"#;

#[test]
fn diagnose_writes_report_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = write(dir.path(), "tasks.jsonl", TASKS);
    let verdicts = write(dir.path(), "verdicts.jsonl", VERDICTS);
    let out = dir.path().join("out");
    let output = run(&[
        "diagnose",
        "--tasks",
        tasks.to_str().unwrap(),
        "--verdicts",
        verdicts.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_code(&output, 0);
    for file in [
        "report.json",
        "tier_state_shares.csv",
        "pressure_per_criterion.csv",
        "zero_signal_pressure.csv",
        "plot_tier_bars.csv",
        "plot_pressure_bars.csv",
        "manifest.json",
    ] {
        assert!(out.join(file).exists(), "{file} missing");
    }
    // static-only run has no spread files
    assert!(!out.join("spread_pairs.csv").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "diagnose");
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);
    assert!(!manifest["outputs"].as_array().unwrap().is_empty());
}

#[test]
fn diagnose_rejects_empty_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = write(dir.path(), "tasks.jsonl", TASKS);
    let verdicts = write(dir.path(), "verdicts.jsonl", "{\"schema\":\"pow3r.verdicts.v1\"}\n");
    let out = dir.path().join("out");
    let output = run(&[
        "diagnose",
        "--tasks",
        tasks.to_str().unwrap(),
        "--verdicts",
        verdicts.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_code(&output, 2);
}

#[test]
fn reward_dyn_with_fresh_factors_matches_cat() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = write(dir.path(), "tasks.jsonl", TASKS);
    let verdicts = write(dir.path(), "verdicts.jsonl", VERDICTS);
    let empty_factors = write(
        dir.path(),
        "factors.json",
        "{\"schema\":\"pow3r.factors.v1\",\"entries\":[]}\n",
    );
    let out_cat = dir.path().join("cat");
    let out_dyn = dir.path().join("dyn");
    assert_code(
        &run(&[
            "reward",
            "--tasks",
            tasks.to_str().unwrap(),
            "--verdicts",
            verdicts.to_str().unwrap(),
            "--construction",
            "cat",
            "--out",
            out_cat.to_str().unwrap(),
        ]),
        0,
    );
    assert_code(
        &run(&[
            "reward",
            "--tasks",
            tasks.to_str().unwrap(),
            "--verdicts",
            verdicts.to_str().unwrap(),
            "--construction",
            "dyn",
            "--factors",
            empty_factors.to_str().unwrap(),
            "--out",
            out_dyn.to_str().unwrap(),
        ]),
        0,
    );
    let read_rewards = |path: &Path| -> Vec<Vec<f64>> {
        fs::read_to_string(path.join("rewards.jsonl"))
            .unwrap()
            .lines()
            .skip(1)
            .map(|line| {
                let v: serde_json::Value = serde_json::from_str(line).unwrap();
                v["rewards"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|x| x.as_f64().unwrap())
                    .collect()
            })
            .collect()
    };
    let cat = read_rewards(&out_cat);
    let dyn_r = read_rewards(&out_dyn);
    assert_eq!(cat.len(), dyn_r.len());
    for (a, b) in cat.iter().flatten().zip(dyn_r.iter().flatten()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn reward_dyn_without_factors_fails() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = write(dir.path(), "tasks.jsonl", TASKS);
    let verdicts = write(dir.path(), "verdicts.jsonl", VERDICTS);
    let output = run(&[
        "reward",
        "--tasks",
        tasks.to_str().unwrap(),
        "--verdicts",
        verdicts.to_str().unwrap(),
        "--construction",
        "dyn",
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_code(&output, 2);
}

#[test]
fn reward_binary_without_required_criteria_fails() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = write(
        dir.path(),
        "tasks.jsonl",
        r#"{"schema":"pow3r.tasks.v1"}
{"id":"t1","prompt":"p","criteria":[{"id":"a","text":"x","weight":1,"category":"k","required":false}]}
"#,
    );
    let verdicts = write(
        dir.path(),
        "verdicts.jsonl",
        r#"{"schema":"pow3r.verdicts.v1"}
{"task_id":"t1","group_size":2,"verdicts":[[{"value":"pass"}],[{"value":"fail"}]]}
"#,
    );
    let output = run(&[
        "reward",
        "--tasks",
        tasks.to_str().unwrap(),
        "--verdicts",
        verdicts.to_str().unwrap(),
        "--construction",
        "binary",
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_code(&output, 2);
}

#[test]
fn update_factors_applies_epoch_and_validates_config() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = write(dir.path(), "tasks.jsonl", TASKS);
    let verdicts = write(dir.path(), "verdicts.jsonl", VERDICTS);
    let out = dir.path().join("out");
    assert_code(
        &run(&[
            "update-factors",
            "--tasks",
            tasks.to_str().unwrap(),
            "--verdicts",
            verdicts.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]),
        0,
    );
    let store: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("factors.json")).unwrap()).unwrap();
    let entries = store["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 5, "one entry per (task, criterion)");
    for e in entries {
        let alpha = e["alpha"].as_f64().unwrap();
        assert!((0.67..=1.5).contains(&alpha));
        assert_eq!(e["epoch"].as_u64().unwrap(), 1);
    }

    // invalid config rejected
    let output = run(&[
        "update-factors",
        "--tasks",
        tasks.to_str().unwrap(),
        "--verdicts",
        verdicts.to_str().unwrap(),
        "--alpha-min",
        "1.2",
        "--out",
        dir.path().join("bad").to_str().unwrap(),
    ]);
    assert_code(&output, 2);
}

#[test]
fn judge_simulated_is_deterministic_and_feeds_reward() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = write(dir.path(), "tasks.jsonl", TASKS);
    let responses = write(
        dir.path(),
        "responses.jsonl",
        r#"{"schema":"pow3r.responses.v1"}
{"task_id":"t1","rollouts":["resp one","resp two","resp three","resp four"]}
{"task_id":"t2","rollouts":["resp one","resp two","resp three","resp four"]}
"#,
    );
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        assert_code(
            &run(&[
                "judge",
                "--tasks",
                tasks.to_str().unwrap(),
                "--responses",
                responses.to_str().unwrap(),
                "--backend",
                "sim",
                "--seed",
                "11",
                "--sim-pass",
                "0.7",
                "--out",
                out.to_str().unwrap(),
            ]),
            0,
        );
    }
    let a = fs::read(out_a.join("verdicts.jsonl")).unwrap();
    let b = fs::read(out_b.join("verdicts.jsonl")).unwrap();
    assert_eq!(a, b, "simulated judging is bit-reproducible");
    assert!(out_a.join("judge_summary.json").exists());

    // the produced verdicts feed the reward command
    let out_r = dir.path().join("r");
    assert_code(
        &run(&[
            "reward",
            "--tasks",
            tasks.to_str().unwrap(),
            "--verdicts",
            out_a.join("verdicts.jsonl").to_str().unwrap(),
            "--construction",
            "scalar",
            "--out",
            out_r.to_str().unwrap(),
        ]),
        0,
    );
}

#[test]
fn judge_remote_missing_auth_env_is_a_transport_error() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = write(dir.path(), "tasks.jsonl", TASKS);
    let responses = write(
        dir.path(),
        "responses.jsonl",
        r#"{"schema":"pow3r.responses.v1"}
{"task_id":"t1","rollouts":["only"]}
"#,
    );
    let output = run(&[
        "judge",
        "--tasks",
        tasks.to_str().unwrap(),
        "--responses",
        responses.to_str().unwrap(),
        "--backend",
        "remote",
        "--endpoint",
        "http://127.0.0.1:1/v1",
        "--model",
        "m",
        "--auth-env",
        "POW3R_TEST_TOKEN_THAT_IS_NOT_SET",
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_code(&output, 3);
}

#[test]
fn convert_rewrites_negative_weights() {
    let dir = tempfile::tempdir().unwrap();
    let signed = write(
        dir.path(),
        "signed.jsonl",
        r#"{"schema":"pow3r.tasks.signed.v1"}
{"id":"t1","prompt":"p","criteria":[{"id":"good","text":"cites the source","weight":5,"category":"k"},{"id":"bad","text":"gives unsafe advice","weight":-3,"category":"k"}]}
"#,
    );
    let out = dir.path().join("out");
    assert_code(
        &run(&[
            "convert",
            "--tasks",
            signed.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]),
        0,
    );
    let body = fs::read_to_string(out.join("tasks.jsonl")).unwrap();
    let task: serde_json::Value = serde_json::from_str(body.lines().nth(1).unwrap()).unwrap();
    let criteria = task["criteria"].as_array().unwrap();
    assert_eq!(criteria[0]["weight"], 5);
    assert!(criteria[0].get("judge_flip").is_none());
    assert_eq!(criteria[1]["weight"], 3);
    assert_eq!(criteria[1]["judge_flip"], true);
    assert_eq!(
        criteria[1]["text"],
        "The response avoids: gives unsafe advice"
    );
    // converted file loads as a regular task file
    let out2 = dir.path().join("out2");
    let verdicts = write(
        dir.path(),
        "v.jsonl",
        r#"{"schema":"pow3r.verdicts.v1"}
{"task_id":"t1","group_size":2,"verdicts":[[{"value":"pass"},{"value":"pass"}],[{"value":"fail"},{"value":"pass"}]]}
"#,
    );
    assert_code(
        &run(&[
            "reward",
            "--tasks",
            out.join("tasks.jsonl").to_str().unwrap(),
            "--verdicts",
            verdicts.to_str().unwrap(),
            "--construction",
            "cat",
            "--out",
            out2.to_str().unwrap(),
        ]),
        0,
    );
}

#[test]
fn simulate_zero_steps_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = write(dir.path(), "tasks.jsonl", TASKS);
    let out = dir.path().join("out");
    let output = run(&[
        "simulate",
        "--tasks",
        tasks.to_str().unwrap(),
        "--constructions",
        "cat",
        "--steps",
        "0",
        "--eval-interval",
        "5",
        "--eval-group-size",
        "8",
        "--group-size",
        "4",
        "--thresholds",
        "0.0,0.99",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_code(&output, 0);
    let trajectories: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("trajectories.json")).unwrap()).unwrap();
    let checkpoints = trajectories[0]["checkpoints"].as_array().unwrap();
    assert_eq!(checkpoints.len(), 1, "steps=0 leaves only checkpoint 0");
    let table = fs::read_to_string(out.join("steps_to_threshold.csv")).unwrap();
    assert!(table.starts_with("threshold,cat\n"), "single construction has no speedup column: {table}");
    assert!(table.contains("0,0"), "threshold below step-0 reward crosses at 0");
    assert!(table.contains("0.99,--"), "unreached threshold prints --");

    // same seed, same outputs
    let out2 = dir.path().join("out2");
    let output = run(&[
        "simulate",
        "--tasks",
        tasks.to_str().unwrap(),
        "--constructions",
        "cat",
        "--steps",
        "0",
        "--eval-interval",
        "5",
        "--eval-group-size",
        "8",
        "--group-size",
        "4",
        "--thresholds",
        "0.0,0.99",
        "--seed",
        "3",
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert_code(&output, 0);
    assert_eq!(
        fs::read(out.join("trajectories.json")).unwrap(),
        fs::read(out2.join("trajectories.json")).unwrap()
    );
    assert_eq!(
        fs::read(out.join("trajectory_cat.csv")).unwrap(),
        fs::read(out2.join("trajectory_cat.csv")).unwrap()
    );
}

#[test]
fn simulate_with_speedup_column() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = write(dir.path(), "tasks.jsonl", TASKS);
    let out = dir.path().join("out");
    let output = run(&[
        "simulate",
        "--tasks",
        tasks.to_str().unwrap(),
        "--constructions",
        "cat,dyn",
        "--steps",
        "6",
        "--eval-interval",
        "3",
        "--eval-group-size",
        "8",
        "--group-size",
        "4",
        "--thresholds",
        "0.1",
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_code(&output, 0);
    let table = fs::read_to_string(out.join("steps_to_threshold.csv")).unwrap();
    assert!(table.starts_with("threshold,cat,dyn,speedup\n"), "{table}");
    assert!(out.join("trajectory_dyn.csv").exists());
    let dispersion = fs::read_to_string(out.join("factor_dispersion.csv")).unwrap();
    assert!(dispersion.starts_with("category,mean_variance,alpha_std,criteria\n"));
    assert!(dispersion.contains("perception,"));
}

#[test]
fn config_file_feeds_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = write(dir.path(), "tasks.jsonl", TASKS);
    let verdicts = write(dir.path(), "verdicts.jsonl", VERDICTS);
    // alpha_min 0.9 from the file tightens the clip; observable in the store
    let config = write(dir.path(), "config.json", r#"{"alpha_min": 0.9, "beta_ema": 1.0}"#);
    let out = dir.path().join("out");
    assert_code(
        &run(&[
            "update-factors",
            "--tasks",
            tasks.to_str().unwrap(),
            "--verdicts",
            verdicts.to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]),
        0,
    );
    let store: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("factors.json")).unwrap()).unwrap();
    let min_alpha = store["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["alpha"].as_f64().unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!(min_alpha >= 0.9, "file alpha_min should clip at 0.9, saw {min_alpha}");

    // a flag overrides the file
    let out2 = dir.path().join("out2");
    assert_code(
        &run(&[
            "update-factors",
            "--tasks",
            tasks.to_str().unwrap(),
            "--verdicts",
            verdicts.to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
            "--alpha-min",
            "0.95",
            "--out",
            out2.to_str().unwrap(),
        ]),
        0,
    );
    let store2: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out2.join("factors.json")).unwrap()).unwrap();
    let min_alpha2 = store2["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["alpha"].as_f64().unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!(min_alpha2 >= 0.95, "flag should override the file, saw {min_alpha2}");
}

#[test]
fn diagnose_with_factors_emits_spread_files() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = write(dir.path(), "tasks.jsonl", TASKS);
    let verdicts = write(dir.path(), "verdicts.jsonl", VERDICTS);
    let factors_out = dir.path().join("f");
    assert_code(
        &run(&[
            "update-factors",
            "--tasks",
            tasks.to_str().unwrap(),
            "--verdicts",
            verdicts.to_str().unwrap(),
            "--out",
            factors_out.to_str().unwrap(),
        ]),
        0,
    );
    let out = dir.path().join("out");
    assert_code(
        &run(&[
            "diagnose",
            "--tasks",
            tasks.to_str().unwrap(),
            "--verdicts",
            verdicts.to_str().unwrap(),
            "--factors",
            factors_out.join("factors.json").to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]),
        0,
    );
    assert!(out.join("spread_pairs.csv").exists());
    assert!(out.join("plot_spread_scatter.csv").exists());
    let zero = fs::read_to_string(out.join("zero_signal_pressure.csv")).unwrap();
    assert!(zero.contains("static,"));
    assert!(zero.contains("dynamic,"));
}
