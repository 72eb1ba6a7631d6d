//! Command-line front end: enumerate the search space, train any regime or
//! baseline on any task, re-evaluate checkpoints, render rollout charts, and
//! collate results across runs.

mod plot;
mod summary;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use qseq_core::ansatz::{baseline_configs, enumerate_space};
use qseq_core::checkpoint;
use qseq_core::datasets::SeriesKind;
use qseq_core::error::CoreError;
use qseq_core::trainer::{self, RunMode, TrainConfig};

const USAGE_EXIT: u8 = 2;
const NUMERIC_EXIT: u8 = 3;

#[derive(Parser)]
#[command(name = "qseq", version, about = "Quantum sequence learning workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the 36 candidate circuit configurations and the 6 baselines.
    Enumerate,
    /// Train a model and write metrics, rollouts, and a checkpoint to --out.
    Train(TrainArgs),
    /// Re-evaluate a saved checkpoint on its task.
    Evaluate(EvaluateArgs),
    /// Render every rollout CSV in a run directory to SVG.
    Plot(PlotArgs),
    /// Collate final test MSEs from run manifests into one CSV table.
    Summary(SummaryArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Task: bessel | damped-shm | delayed-qc | narma5 | narma10
    #[arg(long)]
    task: Option<String>,
    /// Mode: nonshared | shared | reservoir-nonshared | reservoir-shared | config1..config6
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Optional max-norm gradient clip.
    #[arg(long)]
    clip: Option<f64>,
    /// Mix candidates with raw structural weights instead of softmax.
    #[arg(long)]
    raw_weights: bool,
    /// Output directory for all artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON config file; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Must match the checkpoint's task when given.
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Run directory containing rollout_epoch*.csv files.
    #[arg(long)]
    run: PathBuf,
}

#[derive(Args)]
struct SummaryArgs {
    /// Directory whose immediate subdirectories are run directories.
    #[arg(long)]
    root: PathBuf,
    /// Output CSV path (defaults to <root>/summary.csv).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Partial config file: any subset of TrainConfig fields.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    task: Option<String>,
    mode: Option<String>,
    epochs: Option<usize>,
    learning_rate: Option<f64>,
    batch_size: Option<usize>,
    seed: Option<u64>,
    clip_norm: Option<f64>,
    raw_weights: Option<bool>,
    hidden_size: Option<usize>,
    n_layers: Option<usize>,
    series_points: Option<usize>,
    window_len: Option<usize>,
}

/// Everything a run directory needs to be reproduced.
#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    version: String,
    config: TrainConfig,
    artifacts: ManifestArtifacts,
    started_unix: u64,
    finished_unix: u64,
    train_wallclock_s: f64,
    final_train_mse: f64,
    final_test_mse: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestArtifacts {
    history: String,
    weights: String,
    series: String,
    checkpoint: String,
    rollouts: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Enumerate => cmd_enumerate(),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Plot(args) => cmd_plot(args),
        Command::Summary(args) => summary::cmd_summary(args.root, args.out),
    }
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(USAGE_EXIT)
}

fn cmd_enumerate() -> ExitCode {
    use std::io::Write;
    // Ignore write failures so `qseq enumerate | head` exits quietly.
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let space = enumerate_space(4, 2).expect("static space");
    let _ = writeln!(out, "# search space ({} configs)", space.len());
    for (j, config) in space.configs.iter().enumerate() {
        let _ = writeln!(out, "{j:02} {config}");
    }
    let _ = writeln!(out, "# baselines");
    for (i, config) in baseline_configs().iter().enumerate() {
        let _ = writeln!(out, "config{} {config}", i + 1);
    }
    ExitCode::SUCCESS
}

fn parse_task(s: &str) -> Result<SeriesKind, String> {
    SeriesKind::from_label(s).ok_or_else(|| {
        format!("unknown task {s:?}; expected bessel|damped-shm|delayed-qc|narma5|narma10")
    })
}

fn parse_mode(s: &str) -> Result<RunMode, String> {
    RunMode::from_label(s).ok_or_else(|| {
        format!(
            "unknown mode {s:?}; expected nonshared|shared|reservoir-nonshared|reservoir-shared|config1..config6"
        )
    })
}

fn resolve_config(args: &TrainArgs) -> Result<TrainConfig, String> {
    let file: FileConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => FileConfig::default(),
    };

    let task_label = args
        .task
        .clone()
        .or(file.task.clone())
        .ok_or("missing --task (or task in --config file)")?;
    let mode_label = args
        .mode
        .clone()
        .or(file.mode.clone())
        .ok_or("missing --mode (or mode in --config file)")?;
    let mut config = TrainConfig::new(parse_task(&task_label)?, parse_mode(&mode_label)?);

    // File overrides defaults; flags override the file.
    if let Some(v) = file.epochs {
        config.epochs = v;
    }
    if let Some(v) = file.learning_rate {
        config.learning_rate = v;
    }
    if let Some(v) = file.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = file.seed {
        config.seed = v;
    }
    if let Some(v) = file.clip_norm {
        config.clip_norm = Some(v);
    }
    if let Some(v) = file.raw_weights {
        config.raw_weights = v;
    }
    if let Some(v) = file.hidden_size {
        config.hidden_size = v;
    }
    if let Some(v) = file.n_layers {
        config.n_layers = v;
    }
    if let Some(v) = file.series_points {
        config.series_points = v;
    }
    if let Some(v) = file.window_len {
        config.window_len = v;
    }

    if let Some(v) = args.epochs {
        config.epochs = v;
    }
    if let Some(v) = args.lr {
        config.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.clip {
        config.clip_norm = Some(v);
    }
    if args.raw_weights {
        config.raw_weights = true;
    }

    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn cmd_train(args: TrainArgs) -> ExitCode {
    let config = match resolve_config(&args) {
        Ok(c) => c,
        Err(msg) => return usage_error(&msg),
    };
    let out = &args.out;
    if let Err(e) = std::fs::create_dir_all(out) {
        eprintln!("error: cannot create {}: {e}", out.display());
        return ExitCode::FAILURE;
    }

    let started_unix = unix_now();
    let outcome = match trainer::train(&config, Some(out)) {
        Ok(o) => o,
        Err(e @ CoreError::Numeric { .. }) => {
            let diagnostic = out.join("diagnostic.txt");
            let _ = std::fs::write(&diagnostic, format!("{e}\n"));
            eprintln!("error: training aborted: {e}");
            eprintln!("diagnostic written to {}", diagnostic.display());
            return ExitCode::from(NUMERIC_EXIT);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };

    let checkpoint_path = out.join("checkpoint.json");
    if let Err(e) = checkpoint::save(&checkpoint_path, &outcome.model, &config) {
        eprintln!("error: cannot write checkpoint: {e}");
        return ExitCode::FAILURE;
    }

    let manifest = RunManifest {
        version: format!("qseq {}", env!("CARGO_PKG_VERSION")),
        config: config.clone(),
        artifacts: ManifestArtifacts {
            history: "history.csv".into(),
            weights: "weights.csv".into(),
            series: "series.csv".into(),
            checkpoint: "checkpoint.json".into(),
            rollouts: outcome.history.len(),
        },
        started_unix,
        finished_unix: unix_now(),
        train_wallclock_s: outcome.history.iter().map(|r| r.wallclock_s).sum(),
        final_train_mse: outcome.final_train_mse(),
        final_test_mse: outcome.final_test_mse(),
    };
    if let Err(e) = write_manifest_atomically(out, &manifest) {
        eprintln!("error: cannot write manifest: {e}");
        return ExitCode::FAILURE;
    }

    println!(
        "{} {} seed {}: final train mse {} test mse {} ({} epochs)",
        config.task.label(),
        config.mode.label(),
        config.seed,
        outcome.final_train_mse(),
        outcome.final_test_mse(),
        config.epochs,
    );
    ExitCode::SUCCESS
}

fn write_manifest_atomically(out: &Path, manifest: &RunManifest) -> std::io::Result<()> {
    let body = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    let tmp = out.join("manifest.json.tmp");
    std::fs::write(&tmp, body)?;
    std::fs::rename(&tmp, out.join("manifest.json"))
}

fn cmd_evaluate(args: EvaluateArgs) -> ExitCode {
    let (model, config) = match checkpoint::load(&args.checkpoint) {
        Ok(pair) => pair,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(USAGE_EXIT);
        }
    };
    if let Some(task) = &args.task {
        match parse_task(task) {
            Ok(kind) if kind == config.task => {}
            Ok(kind) => {
                return usage_error(&format!(
                    "checkpoint was trained on {} but --task asked for {}",
                    config.task.label(),
                    kind.label()
                ));
            }
            Err(msg) => return usage_error(&msg),
        }
    }
    if let Err(e) = std::fs::create_dir_all(&args.out) {
        eprintln!("error: cannot create {}: {e}", args.out.display());
        return ExitCode::FAILURE;
    }
    let (train_mse, test_mse, rows) = match trainer::evaluate(&model, &config) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let rollout_path = args.out.join("rollout_eval.csv");
    if let Err(e) = std::fs::write(&rollout_path, trainer::rollout_csv(&rows)) {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    let report = serde_json::json!({
        "task": config.task.label(),
        "mode": config.mode.label(),
        "seed": config.seed,
        "train_mse": train_mse,
        "test_mse": test_mse,
    });
    if let Err(e) = std::fs::write(
        args.out.join("eval.json"),
        serde_json::to_string_pretty(&report).expect("report serializes"),
    ) {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    println!(
        "{} {}: train mse {} test mse {}",
        config.task.label(),
        config.mode.label(),
        train_mse,
        test_mse
    );
    ExitCode::SUCCESS
}

fn cmd_plot(args: PlotArgs) -> ExitCode {
    match plot::plot_run_dir(&args.run) {
        Ok(rendered) => {
            for name in rendered {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Err(msg) => usage_error(&msg),
    }
}
