//! Exact model serialization.
//!
//! A checkpoint holds the full training config, the RNG seed, and every
//! parameter tensor (angles, structural logits, projections, head). JSON
//! float round-tripping is exact for finite values, so a reload is
//! bit-identical; a test asserts that on raw bits.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::graddiff::ParamStore;
use crate::qlstm::{GateBlock, QlstmModel};
use crate::trainer::TrainConfig;

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: TrainConfig,
    /// Gate config strings per role, recorded for inspection.
    pub gate_configs: Vec<Vec<String>>,
    pub store: ParamStore,
}

impl Checkpoint {
    pub fn from_model(model: &QlstmModel, config: &TrainConfig) -> Self {
        let gate_configs = model
            .gates
            .iter()
            .map(|g| match g {
                GateBlock::Fixed { config, .. } => vec![config.to_canonical_string()],
                GateBlock::Search(block) => block
                    .space
                    .configs
                    .iter()
                    .map(|c| c.to_canonical_string())
                    .collect(),
            })
            .collect();
        Checkpoint {
            format_version: FORMAT_VERSION,
            config: config.clone(),
            gate_configs,
            store: model.store.clone(),
        }
    }

    /// Rebuild the model: reconstruct the architecture from the config, then
    /// splice in the stored tensors after verifying they line up.
    pub fn into_model(self) -> Result<(QlstmModel, TrainConfig)> {
        if self.format_version != FORMAT_VERSION {
            return Err(CoreError::Checkpoint(format!(
                "unsupported format version {}",
                self.format_version
            )));
        }
        let config = self.config;
        let mut model = QlstmModel::build(
            config.mode.to_model_mode(config.raw_weights),
            config.hidden_size,
            config.n_layers,
            config.seed,
        )?;
        if model.store.len() != self.store.len() {
            return Err(CoreError::Checkpoint(format!(
                "tensor count mismatch: rebuilt {} vs stored {}",
                model.store.len(),
                self.store.len()
            )));
        }
        for (fresh, stored) in model.store.tensors().iter().zip(self.store.tensors()) {
            if fresh.name != stored.name
                || fresh.rows != stored.rows
                || fresh.cols != stored.cols
                || fresh.trainable != stored.trainable
            {
                return Err(CoreError::Checkpoint(format!(
                    "tensor layout mismatch at {}",
                    stored.name
                )));
            }
        }
        model.store = self.store;
        Ok((model, config))
    }
}

pub fn save(path: &Path, model: &QlstmModel, config: &TrainConfig) -> Result<()> {
    let checkpoint = Checkpoint::from_model(model, config);
    let json = serde_json::to_string_pretty(&checkpoint)
        .map_err(|e| CoreError::Checkpoint(e.to_string()))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(QlstmModel, TrainConfig)> {
    let json = std::fs::read_to_string(path)?;
    let checkpoint: Checkpoint =
        serde_json::from_str(&json).map_err(|e| CoreError::Checkpoint(e.to_string()))?;
    checkpoint.into_model()
}
