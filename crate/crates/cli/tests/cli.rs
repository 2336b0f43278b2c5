use std::path::Path;
use std::process::{Command, Output};

fn pilot(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pilot"))
        .args(args)
        .current_dir(dir)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn run_writes_a_successful_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = pilot(dir.path(), &["run", "--world", "synthshop", "--task", "T1", "--out", "t1.jsonl"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let body = std::fs::read_to_string(dir.path().join("t1.jsonl")).unwrap();
    assert_eq!(body.lines().count(), 1);
    let traj: serde_json::Value = serde_json::from_str(body.trim()).unwrap();
    assert_eq!(traj["success"], true);
    assert_eq!(traj["task"]["task_id"], "T1");
}

#[test]
fn same_seed_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.jsonl", "b.jsonl"] {
        let out = pilot(dir.path(), &["run", "--world", "synthshop", "--task", "T3", "--seed", "4", "--out", name]);
        assert!(out.status.success(), "{}", text(&out.stderr));
    }
    let a = std::fs::read(dir.path().join("a.jsonl")).unwrap();
    let b = std::fs::read(dir.path().join("b.jsonl")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn training_is_reproducible_under_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    for (i, name) in ["a.jsonl", "b.jsonl"].iter().enumerate() {
        let jobs = if i == 0 { "1" } else { "3" };
        let out = pilot(
            dir.path(),
            &["train", "--iters", "4", "--seed", "11", "--jobs", jobs, "--out", name],
        );
        assert!(out.status.success(), "{}", text(&out.stderr));
    }
    let a = std::fs::read_to_string(dir.path().join("a.jsonl")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("b.jsonl")).unwrap();
    assert_eq!(a.lines().count(), 4);
    assert_eq!(a, b);
}

#[test]
fn train_help_lists_every_knob() {
    let out = pilot(Path::new("."), &["train", "--help"]);
    assert!(out.status.success());
    let help = text(&out.stdout);
    for flag in [
        "--group-size",
        "--batch",
        "--kl",
        "--lr",
        "--temperature",
        "--iters",
        "--ref-refresh-every",
        "--epochs",
        "--votes",
        "--std",
        "--clip",
        "--weighting",
        "--max-steps",
        "--parse-retries",
        "--history-window",
        "--seed",
        "--jobs",
        "--config",
    ] {
        assert!(help.contains(flag), "missing {flag}");
    }
}

#[test]
fn fitscale_rejects_a_single_point() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("one.csv"), "component,params_billions,success_pct\nall,1,20\n").unwrap();
    let out = pilot(dir.path(), &["fitscale", "--points", "one.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("at least 2 points"), "{}", text(&out.stderr));
}

#[test]
fn fitscale_reports_and_predicts() {
    let dir = tempfile::tempdir().unwrap();
    let csv = "component_label,params_billions,success_pct\nall,1,10\nall,10,20\nall,100,30\n";
    std::fs::write(dir.path().join("pts.csv"), csv).unwrap();
    let out = pilot(
        dir.path(),
        &["fitscale", "--points", "pts.csv", "--report", "--out", "fits.csv", "--predict", "1000"],
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("all at 1000B: 40.00%"), "{stdout}");
    assert!(dir.path().join("fits.csv").is_file());
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(pilot(dir.path(), &["frobnicate"]).status.code(), Some(2));
    let missing = pilot(dir.path(), &["judge", "--trajectories", "absent.jsonl"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(text(&missing.stderr).contains("absent.jsonl"));
    let config = pilot(dir.path(), &["--config", "absent.toml", "run", "--task", "T1"]);
    assert_eq!(config.status.code(), Some(2));
    let world = pilot(dir.path(), &["run", "--world", "nowhere.json", "--task", "T1"]);
    assert_eq!(world.status.code(), Some(2));
}

#[test]
fn unknown_task_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = pilot(dir.path(), &["run", "--world", "synthshop", "--task", "T99"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("T99"));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("pilot.toml"), "seed = 3\n[train]\niterations = 2\n").unwrap();
    let out = pilot(dir.path(), &["--config", "pilot.toml", "train", "--out", "a.jsonl"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let a = std::fs::read_to_string(dir.path().join("a.jsonl")).unwrap();
    assert_eq!(a.lines().count(), 2);
    let out = pilot(dir.path(), &["--config", "pilot.toml", "train", "--iters", "3", "--out", "b.jsonl"]);
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(dir.path().join("b.jsonl")).unwrap().lines().count(), 3);

    std::fs::write(dir.path().join("bad.toml"), "[train]\nbogus = 1\n").unwrap();
    let out = pilot(dir.path(), &["--config", "bad.toml", "train"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn pipeline_round_trip_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for task in ["T1", "T3"] {
        let name = format!("{task}.jsonl");
        assert!(pilot(d, &["run", "--world", "synthshop", "--task", task, "--out", &name]).status.success());
    }
    let joined = std::fs::read_to_string(d.join("T1.jsonl")).unwrap() + &std::fs::read_to_string(d.join("T3.jsonl")).unwrap();
    std::fs::write(d.join("trajs.jsonl"), joined).unwrap();

    let out = pilot(d, &["judge", "--trajectories", "trajs.jsonl", "--out", "r.jsonl"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let rewards: Vec<serde_json::Value> = std::fs::read_to_string(d.join("r.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rewards.len(), 2);
    assert!(rewards.iter().all(|r| r["reward"] == 5 && r["votes"].as_array().unwrap().len() == 3));

    let out = pilot(d, &["memory-build", "--from", "trajs.jsonl", "--out", "bank"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(d.join("bank/slots.bin").is_file());
    let out = pilot(
        d,
        &["run", "--world", "synthshop", "--task", "T3", "--memory-bank", "bank", "--out", "m.jsonl"],
    );
    assert!(out.status.success(), "{}", text(&out.stderr));

    let out = pilot(d, &["filter-tasks", "--world", "synthshop", "--page", "home", "--n", "2"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(d.join("tasks.jsonl").is_file());
    assert!(d.join("filter_report.jsonl").is_file());
}
