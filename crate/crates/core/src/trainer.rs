//! Training loop: batched squared-error minimization with Adam, per-epoch
//! rollouts, and metric/artifact emission.
//!
//! One run is sequential over batches; within a batch the per-window
//! forward/backward evaluations run in parallel, with gradients accumulated
//! in fixed window order so the result is identical to a sequential run.

use std::collections::HashMap;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{self, SeriesKind, SplitTag, WindowedSeries};
use crate::diffqas::SharingRegime;
use crate::error::{CoreError, Result};
use crate::graddiff::{Grad, ParamId, ParamStore};
use crate::qlstm::{GateBlock, ModelMode, QlstmModel};

/// Which model a run trains: one of the four search regimes or a fixed
/// hand-picked configuration 1..=6.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunMode {
    Regime(SharingRegime),
    Baseline(usize),
}

impl RunMode {
    pub fn label(self) -> String {
        match self {
            RunMode::Regime(r) => r.label().to_string(),
            RunMode::Baseline(i) => format!("config{i}"),
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "nonshared" => Some(RunMode::Regime(SharingRegime::NonShared)),
            "shared" => Some(RunMode::Regime(SharingRegime::Shared)),
            "reservoir-nonshared" => Some(RunMode::Regime(SharingRegime::ReservoirNonShared)),
            "reservoir-shared" => Some(RunMode::Regime(SharingRegime::ReservoirShared)),
            _ => s
                .strip_prefix("config")
                .and_then(|i| i.parse::<usize>().ok())
                .filter(|&i| (1..=6).contains(&i))
                .map(RunMode::Baseline),
        }
    }

    pub fn to_model_mode(self, raw_weights: bool) -> ModelMode {
        match self {
            RunMode::Regime(regime) => ModelMode::Search {
                regime,
                raw_weights,
            },
            RunMode::Baseline(index) => ModelMode::Baseline { index },
        }
    }
}

/// Everything that determines a run. Identical configs give identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub task: SeriesKind,
    pub mode: RunMode,
    #[serde(default = "defaults::epochs")]
    pub epochs: usize,
    #[serde(default = "defaults::learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    #[serde(default)]
    pub clip_norm: Option<f64>,
    #[serde(default)]
    pub raw_weights: bool,
    #[serde(default = "defaults::hidden_size")]
    pub hidden_size: usize,
    #[serde(default = "defaults::n_layers")]
    pub n_layers: usize,
    #[serde(default = "defaults::series_points")]
    pub series_points: usize,
    #[serde(default = "defaults::window_len")]
    pub window_len: usize,
}

mod defaults {
    pub fn epochs() -> usize {
        30
    }
    pub fn learning_rate() -> f64 {
        0.02
    }
    pub fn batch_size() -> usize {
        2
    }
    pub fn seed() -> u64 {
        1
    }
    pub fn hidden_size() -> usize {
        3
    }
    pub fn n_layers() -> usize {
        2
    }
    pub fn series_points() -> usize {
        90
    }
    pub fn window_len() -> usize {
        4
    }
}

impl TrainConfig {
    pub fn new(task: SeriesKind, mode: RunMode) -> Self {
        TrainConfig {
            task,
            mode,
            epochs: defaults::epochs(),
            learning_rate: defaults::learning_rate(),
            batch_size: defaults::batch_size(),
            seed: defaults::seed(),
            clip_norm: None,
            raw_weights: false,
            hidden_size: defaults::hidden_size(),
            n_layers: defaults::n_layers(),
            series_points: defaults::series_points(),
            window_len: defaults::window_len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(CoreError::config("epochs must be >= 1"));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(CoreError::config("learning rate must be positive"));
        }
        if self.batch_size < 1 {
            return Err(CoreError::config("batch size must be >= 1"));
        }
        if let Some(c) = self.clip_norm {
            if !c.is_finite() || c <= 0.0 {
                return Err(CoreError::config("clip norm must be positive"));
            }
        }
        Ok(())
    }
}

/// Per-epoch metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub test_mse: f64,
    pub wallclock_s: f64,
}

/// One rollout point: a window's target and the model's prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutRow {
    pub t: usize,
    pub target: f64,
    pub prediction: f64,
    pub split: SplitTag,
}

/// Mean squared error by straightforward accumulation.
pub fn mse_loss(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != targets.len() {
        return Err(CoreError::config(format!(
            "mse needs equal nonempty lengths, got {} vs {}",
            predictions.len(),
            targets.len()
        )));
    }
    let mut acc = 0.0;
    for (p, t) in predictions.iter().zip(targets) {
        let d = p - t;
        acc += d * d;
    }
    Ok(acc / predictions.len() as f64)
}

/// Adam moment buffers, keyed by parameter id.
#[derive(Debug, Clone)]
pub struct AdamState {
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: u64,
    m: HashMap<ParamId, Vec<f64>>,
    v: HashMap<ParamId, Vec<f64>>,
}

impl Default for AdamState {
    fn default() -> Self {
        AdamState {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: HashMap::new(),
            v: HashMap::new(),
        }
    }
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update over `trainable` with optional global-norm gradient
/// clipping. Parameters without a gradient entry are treated as zero-gradient
/// (their moments decay).
pub fn adam_step(
    store: &mut ParamStore,
    grad: &Grad,
    state: &mut AdamState,
    lr: f64,
    clip_norm: Option<f64>,
    trainable: &[ParamId],
) -> Result<()> {
    for &id in trainable {
        if let Some(g) = grad.get(id) {
            if g.iter().any(|x| !x.is_finite()) {
                return Err(CoreError::numeric(format!(
                    "gradient of parameter {}",
                    store.get(id).name
                )));
            }
        }
    }
    let clip_factor = match clip_norm {
        Some(limit) => {
            let norm = grad.global_norm();
            if norm > limit {
                limit / norm
            } else {
                1.0
            }
        }
        None => 1.0,
    };
    state.step += 1;
    let bias1 = 1.0 - state.beta1.powi(state.step as i32);
    let bias2 = 1.0 - state.beta2.powi(state.step as i32);
    for &id in trainable {
        let len = store.values(id).len();
        let m = state.m.entry(id).or_insert_with(|| vec![0.0; len]);
        let v = state.v.entry(id).or_insert_with(|| vec![0.0; len]);
        let g = grad.get(id);
        let values = store.values_mut(id);
        for k in 0..len {
            let gk = g.map(|g| g[k] * clip_factor).unwrap_or(0.0);
            m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * gk;
            v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * gk * gk;
            let m_hat = m[k] / bias1;
            let v_hat = v[k] / bias2;
            values[k] -= lr * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}

/// Generate and window the series a config asks for.
pub fn build_task_data(config: &TrainConfig) -> Result<WindowedSeries> {
    let n = config.series_points;
    let series = match config.task {
        SeriesKind::Bessel => datasets::gen_bessel(n, 20.0)?,
        SeriesKind::DampedShm => datasets::gen_damped_shm(n, 0.1, 1.0, 20.0)?,
        SeriesKind::DelayedControl => datasets::gen_delayed_quantum_control(n)?,
        SeriesKind::Narma5 => datasets::gen_narma(5, n, config.seed)?,
        SeriesKind::Narma10 => datasets::gen_narma(10, n, config.seed)?,
    };
    datasets::scale_and_window(series, config.window_len)
}

/// A finished training run.
pub struct TrainOutcome {
    pub model: QlstmModel,
    pub config: TrainConfig,
    pub history: Vec<EpochRecord>,
    pub data: WindowedSeries,
    pub final_rollout: Vec<RolloutRow>,
}

impl TrainOutcome {
    pub fn final_test_mse(&self) -> f64 {
        self.history.last().map(|r| r.test_mse).unwrap_or(f64::NAN)
    }

    pub fn final_train_mse(&self) -> f64 {
        self.history.last().map(|r| r.train_mse).unwrap_or(f64::NAN)
    }
}

fn rollout(model: &QlstmModel, data: &WindowedSeries) -> Result<Vec<RolloutRow>> {
    let rows: Result<Vec<RolloutRow>> = data
        .windows
        .par_iter()
        .map(|w| {
            Ok(RolloutRow {
                t: w.target_index,
                target: w.target,
                prediction: model.predict(&w.inputs)?,
                split: w.split,
            })
        })
        .collect();
    rows
}

fn split_mse(rows: &[RolloutRow], split: SplitTag) -> Result<f64> {
    let (preds, targets): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.split == split)
        .map(|r| (r.prediction, r.target))
        .unzip();
    mse_loss(&preds, &targets)
}

/// Evaluate a model on its task: per-window one-step-ahead predictions over
/// the full series plus both split MSEs. Deterministic; reuses the exact
/// forward path the trainer records.
pub fn evaluate(model: &QlstmModel, config: &TrainConfig) -> Result<(f64, f64, Vec<RolloutRow>)> {
    let data = build_task_data(config)?;
    let rows = rollout(model, &data)?;
    let train_mse = split_mse(&rows, SplitTag::Train)?;
    let test_mse = split_mse(&rows, SplitTag::Test)?;
    Ok((train_mse, test_mse, rows))
}

/// Salt so the shuffle stream differs from the model-init stream that also
/// derives from the user seed.
const SHUFFLE_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Train a model per `config`. When `out_dir` is given, per-epoch rollout
/// CSVs, `history.csv`, `weights.csv`, and `series.csv` are written there.
pub fn train(config: &TrainConfig, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    config.validate()?;
    let data = build_task_data(config)?;
    let mut model = QlstmModel::build(
        config.mode.to_model_mode(config.raw_weights),
        config.hidden_size,
        config.n_layers,
        config.seed,
    )?;
    let trainable = model.trainable_parameters();
    let frozen_before: Vec<(ParamId, Vec<f64>)> = model
        .store
        .tensors()
        .iter()
        .filter(|t| !t.trainable)
        .map(|t| (t.id, t.values.clone()))
        .collect();

    let mut adam = AdamState::new();
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed ^ SHUFFLE_SALT);
    let train_indices: Vec<usize> = data
        .windows
        .iter()
        .enumerate()
        .filter(|(_, w)| w.split == SplitTag::Train)
        .map(|(i, _)| i)
        .collect();
    if train_indices.is_empty() {
        return Err(CoreError::config("no training windows"));
    }

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("series.csv"), data.to_csv())?;
    }

    let mut history = Vec::with_capacity(config.epochs);
    let mut final_rollout = Vec::new();
    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let mut order = train_indices.clone();
        order.shuffle(&mut rng);

        for (batch_index, batch) in order.chunks(config.batch_size).enumerate() {
            let per_window: Result<Vec<(f64, Grad)>> = batch
                .par_iter()
                .map(|&wi| {
                    let w = &data.windows[wi];
                    model.window_loss_and_grad(&w.inputs, w.target)
                })
                .collect();
            let per_window = per_window
                .map_err(|e| diagnostic_error(e, epoch, batch_index, &model.store, &trainable))?;

            let mut batch_loss = 0.0;
            let mut grad = Grad::default();
            for (loss, g) in &per_window {
                batch_loss += loss;
                grad.accumulate(g);
            }
            let scale = 1.0 / per_window.len() as f64;
            batch_loss *= scale;
            grad.scale(scale);
            if !batch_loss.is_finite() {
                return Err(diagnostic_error(
                    CoreError::numeric("batch loss"),
                    epoch,
                    batch_index,
                    &model.store,
                    &trainable,
                ));
            }
            adam_step(
                &mut model.store,
                &grad,
                &mut adam,
                config.learning_rate,
                config.clip_norm,
                &trainable,
            )?;
        }

        let rows = rollout(&model, &data)?;
        let train_mse = split_mse(&rows, SplitTag::Train)?;
        let test_mse = split_mse(&rows, SplitTag::Test)?;
        if let Some(dir) = out_dir {
            std::fs::write(
                dir.join(format!("rollout_epoch{epoch}.csv")),
                rollout_csv(&rows),
            )?;
        }
        history.push(EpochRecord {
            epoch,
            train_mse,
            test_mse,
            wallclock_s: started.elapsed().as_secs_f64(),
        });
        if epoch == config.epochs {
            final_rollout = rows;
        }
    }

    // Frozen tensors must come out of training bit-identical.
    for (id, before) in &frozen_before {
        let after = model.store.values(*id);
        let unchanged = before.len() == after.len()
            && before
                .iter()
                .zip(after)
                .all(|(a, b)| a.to_bits() == b.to_bits());
        if !unchanged {
            return Err(CoreError::config(format!(
                "frozen parameter {} changed during training",
                model.store.get(*id).name
            )));
        }
    }

    if let Some(dir) = out_dir {
        std::fs::write(dir.join("history.csv"), history_csv(&history))?;
        std::fs::write(dir.join("weights.csv"), weights_csv(&model))?;
    }

    Ok(TrainOutcome {
        model,
        config: config.clone(),
        history,
        data,
        final_rollout,
    })
}

fn diagnostic_error(
    cause: CoreError,
    epoch: usize,
    batch_index: usize,
    store: &ParamStore,
    trainable: &[ParamId],
) -> CoreError {
    let mut norms = String::new();
    for &id in trainable.iter().take(8) {
        let t = store.get(id);
        let norm: f64 = t.values.iter().map(|x| x * x).sum::<f64>().sqrt();
        norms.push_str(&format!(" {}={norm:.3e}", t.name));
    }
    CoreError::numeric(format!(
        "epoch {epoch} batch {batch_index}: {cause}; parameter norms:{norms}"
    ))
}

/// `history.csv` body: epoch plus both MSEs. Wallclock stays out of this file
/// so identical runs produce identical bytes; it is reported in the run
/// manifest instead.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_mse,test_mse\n");
    for r in history {
        out.push_str(&format!("{},{},{}\n", r.epoch, r.train_mse, r.test_mse));
    }
    out
}

/// `rollout_epoch<k>.csv` body.
pub fn rollout_csv(rows: &[RolloutRow]) -> String {
    let mut out = String::from("t,target,prediction,split_tag\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.t,
            r.target,
            r.prediction,
            r.split.label()
        ));
    }
    out
}

/// `weights.csv` body: per gate block, every candidate's config string and its
/// current structural weight (fixed-ansatz gates report weight 1).
pub fn weights_csv(model: &QlstmModel) -> String {
    let mut out = String::from("gate_role,config,weight\n");
    for (gate, role) in model.gates.iter().zip(crate::qlstm::GATE_ROLES) {
        match gate {
            GateBlock::Fixed { config, .. } => {
                out.push_str(&format!("{},{},1\n", role.label(), config));
            }
            GateBlock::Search(block) => {
                let weights = block.mixture_weights(&model.store);
                for (config, w) in block.space.configs.iter().zip(weights) {
                    out.push_str(&format!("{},{},{}\n", role.label(), config, w));
                }
            }
        }
    }
    out
}
