//! End-to-end checks of the `qseq` binary: flag handling, artifact layout,
//! exit codes, and output determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn qseq() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qseq"))
}

fn run(args: &[&str]) -> Output {
    qseq().args(args).output().expect("binary runs")
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qseq-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn enumerate_lists_space_and_baselines_deterministically() {
    let a = run(&["enumerate"]);
    assert!(a.status.success());
    let text = stdout_of(&a);
    let lines: Vec<&str> = text.lines().collect();
    let space_rows = lines
        .iter()
        .skip_while(|l| !l.starts_with("# search space"))
        .skip(1)
        .take_while(|l| !l.starts_with('#'))
        .count();
    assert_eq!(space_rows, 36);
    let baseline_rows = lines
        .iter()
        .skip_while(|l| !l.starts_with("# baselines"))
        .skip(1)
        .count();
    assert_eq!(baseline_rows, 6);
    assert!(text.contains("config1 H+|RY|ring|RY"));
    assert!(text.contains("config3 H+|RZ|ring|RZ"));
    assert!(text.contains("config6 H+|RX|ring|RY"));

    let b = run(&["enumerate"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn train_writes_all_artifacts() {
    let dir = tempdir("train");
    let out = run(&[
        "train",
        "--task",
        "narma5",
        "--mode",
        "config4",
        "--epochs",
        "30",
        "--seed",
        "1",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    for artifact in [
        "history.csv",
        "weights.csv",
        "series.csv",
        "checkpoint.json",
        "manifest.json",
        "rollout_epoch1.csv",
        "rollout_epoch30.csv",
    ] {
        assert!(dir.join(artifact).exists(), "missing {artifact}");
    }
    let history = std::fs::read_to_string(dir.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 31, "header + 30 epochs");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    let mse = manifest["final_test_mse"].as_f64().unwrap();
    assert!(mse.is_finite());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn history_row_count_matches_epochs() {
    let dir = tempdir("rows");
    let out = run(&[
        "train",
        "--task",
        "bessel",
        "--mode",
        "config1",
        "--epochs",
        "5",
        "--seed",
        "2",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let history = std::fs::read_to_string(dir.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 6);
    assert!(history.starts_with("epoch,train_mse,test_mse\n"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn invalid_flags_exit_2() {
    let out = run(&[
        "train", "--task", "bessel", "--mode", "nope", "--out", "/tmp/x",
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["train", "--mode", "config1", "--out", "/tmp/x"]);
    assert_eq!(out.status.code(), Some(2), "missing --task");

    let out = run(&[
        "train",
        "--task",
        "unknown-task",
        "--mode",
        "config1",
        "--out",
        "/tmp/x",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // Unknown subcommand and unknown flag are clap usage errors.
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["enumerate", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_layers_under_flags() {
    let dir = tempdir("cfgfile");
    let cfg_path = dir.join("run.json");
    std::fs::write(
        &cfg_path,
        r#"{"task":"narma5","mode":"config2","epochs":4,"seed":9}"#,
    )
    .unwrap();
    // Flag overrides the file's epochs; task/mode come from the file.
    let out = run(&[
        "train",
        "--config",
        cfg_path.to_str().unwrap(),
        "--epochs",
        "2",
        "--out",
        dir.join("run").to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("run/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["config"]["epochs"], 2);
    assert_eq!(manifest["config"]["seed"], 9);
    assert_eq!(manifest["config"]["task"], "Narma5");

    // Unknown config-file fields are usage errors.
    std::fs::write(&cfg_path, r#"{"task":"narma5","mode":"config2","bogus":1}"#).unwrap();
    let out = run(&[
        "train",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        dir.join("run2").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn evaluate_round_trips_and_checks_task() {
    let dir = tempdir("eval");
    let out = run(&[
        "train",
        "--task",
        "damped-shm",
        "--mode",
        "config2",
        "--epochs",
        "2",
        "--seed",
        "3",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();

    let eval_dir = dir.join("eval");
    let checkpoint = dir.join("checkpoint.json");
    let out = run(&[
        "evaluate",
        "--checkpoint",
        checkpoint.to_str().unwrap(),
        "--out",
        eval_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let eval: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval_dir.join("eval.json")).unwrap())
            .unwrap();
    assert_eq!(
        eval["test_mse"].as_f64().unwrap(),
        manifest["final_test_mse"].as_f64().unwrap(),
        "reloaded checkpoint must reproduce the recorded MSE exactly"
    );
    assert!(eval_dir.join("rollout_eval.csv").exists());

    // Task mismatch is a usage error.
    let out = run(&[
        "evaluate",
        "--checkpoint",
        checkpoint.to_str().unwrap(),
        "--task",
        "bessel",
        "--out",
        eval_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn plot_renders_one_svg_per_rollout() {
    let dir = tempdir("plot");
    let out = run(&[
        "train",
        "--task",
        "bessel",
        "--mode",
        "config1",
        "--epochs",
        "3",
        "--seed",
        "4",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let out = run(&["plot", "--run", dir.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    for epoch in 1..=3 {
        let svg_path = dir.join(format!("rollout_epoch{epoch}.svg"));
        let svg = std::fs::read_to_string(&svg_path).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("stroke=\"red\""), "split line present");
    }

    // Identical CSV -> byte-identical SVG.
    let before = std::fs::read(dir.join("rollout_epoch2.svg")).unwrap();
    let out = run(&["plot", "--run", dir.to_str().unwrap()]);
    assert!(out.status.success());
    let after = std::fs::read(dir.join("rollout_epoch2.svg")).unwrap();
    assert_eq!(before, after);

    // A directory without rollouts is a usage error.
    let empty = tempdir("plot-empty");
    let out = run(&["plot", "--run", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
    std::fs::remove_dir_all(&empty).ok();
}

#[test]
fn summary_collates_runs_into_table() {
    let root = tempdir("summary");
    for (task, mode, seed) in [
        ("bessel", "config1", "1"),
        ("bessel", "config1", "2"),
        ("narma5", "config2", "1"),
    ] {
        let out = run(&[
            "train",
            "--task",
            task,
            "--mode",
            mode,
            "--epochs",
            "1",
            "--seed",
            seed,
            "--out",
            root.join(format!("{task}-{mode}-{seed}")).to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let out = run(&["summary", "--root", root.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(root.join("summary.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "model,bessel,damped-shm,delayed-qc,narma5,narma10"
    );
    let config1_row = csv
        .lines()
        .find(|l| l.starts_with("config1,"))
        .expect("config1 row");
    let bessel_cell = config1_row.split(',').nth(1).unwrap();
    assert!(bessel_cell.parse::<f64>().unwrap().is_finite());
    assert!(csv.lines().any(|l| l.starts_with("config2,")));

    // Empty root is a usage error.
    let empty = tempdir("summary-empty");
    let out = run(&["summary", "--root", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&root).ok();
    std::fs::remove_dir_all(&empty).ok();
}

/// Runs outside --out never touch the working directory.
#[test]
fn train_writes_only_into_out_dir() {
    let dir = tempdir("contained");
    let work = tempdir("cwd");
    let before = std::fs::read_dir(&work).unwrap().count();
    let out = qseq()
        .current_dir(&work)
        .args([
            "train",
            "--task",
            "narma5",
            "--mode",
            "config1",
            "--epochs",
            "1",
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let after = std::fs::read_dir(&work).unwrap().count();
    assert_eq!(before, after, "working directory gained files");
    assert!(dir.join("history.csv").exists());
    std::fs::remove_dir_all(&dir).ok();
    std::fs::remove_dir_all(&work).ok();
}
