//! Differentiable architecture search over candidate circuits.
//!
//! A [`DiffQasBlock`] evaluates every candidate configuration on the same
//! input and combines the outputs with trainable structural weights:
//! `f(v) = sum_j w_j f_j(v)` with `w = softmax(logits)` by default, so the
//! output is a convex combination of bounded vectors and itself stays in
//! [-1, 1] per component. A `raw_weights` flag switches to the literal
//! unconstrained sum `w = logits` for comparison.
//!
//! The four parameter-sharing regimes control who owns rotation angles and
//! whether those angles train; structural logits are always trainable.

use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::SearchSpace;
use crate::error::Result;
use crate::graddiff::{NodeId, ParamId, ParamStore, Tape};
use crate::qnn::{qnn_forward, InitScheme, QnnParams};

/// Who owns rotation angles, and whether they train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SharingRegime {
    /// Every candidate keeps its own trainable angle set.
    NonShared,
    /// All candidates share a single trainable angle set.
    Shared,
    /// Every candidate keeps its own frozen random angle set.
    ReservoirNonShared,
    /// All candidates share one frozen random angle set.
    ReservoirShared,
}

impl SharingRegime {
    pub fn shares_params(self) -> bool {
        matches!(self, SharingRegime::Shared | SharingRegime::ReservoirShared)
    }

    pub fn is_reservoir(self) -> bool {
        matches!(
            self,
            SharingRegime::ReservoirNonShared | SharingRegime::ReservoirShared
        )
    }

    pub fn label(self) -> &'static str {
        match self {
            SharingRegime::NonShared => "nonshared",
            SharingRegime::Shared => "shared",
            SharingRegime::ReservoirNonShared => "reservoir-nonshared",
            SharingRegime::ReservoirShared => "reservoir-shared",
        }
    }
}

/// All candidates of one search space plus their structural logits and angles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiffQasBlock {
    pub space: SearchSpace,
    pub logits: ParamId,
    /// One id per candidate in the non-shared regimes, a single id otherwise.
    pub thetas: Vec<ParamId>,
    pub regime: SharingRegime,
    pub raw_weights: bool,
}

impl DiffQasBlock {
    /// Register angles and logits in `store` and assemble the block.
    ///
    /// Angles are drawn uniform on (-pi, pi) and marked frozen in the
    /// reservoir regimes; logits start at zero (a uniform mixture) and are
    /// trainable in every regime.
    pub fn new(
        space: SearchSpace,
        regime: SharingRegime,
        raw_weights: bool,
        name_prefix: &str,
        store: &mut ParamStore,
        rng: &mut ChaCha12Rng,
    ) -> Self {
        let trainable = !regime.is_reservoir();
        let n_angles = space.n_layers * space.n_qubits;
        let thetas = if regime.shares_params() {
            let p = QnnParams::init(rng, InitScheme::Uniform, space.n_layers, space.n_qubits);
            vec![store.add_vector(format!("{name_prefix}.theta"), p.flat().to_vec(), trainable)]
        } else {
            (0..space.len())
                .map(|j| {
                    let p =
                        QnnParams::init(rng, InitScheme::Uniform, space.n_layers, space.n_qubits);
                    debug_assert_eq!(p.flat().len(), n_angles);
                    store.add_vector(
                        format!("{name_prefix}.theta.{j:02}"),
                        p.flat().to_vec(),
                        trainable,
                    )
                })
                .collect()
        };
        let logits = store.add_vector(
            format!("{name_prefix}.logits"),
            vec![0.0; space.len()],
            true,
        );
        DiffQasBlock {
            space,
            logits,
            thetas,
            regime,
            raw_weights,
        }
    }

    /// Angle tensor backing candidate `j`.
    pub fn theta_id(&self, candidate: usize) -> ParamId {
        if self.thetas.len() == 1 {
            self.thetas[0]
        } else {
            self.thetas[candidate]
        }
    }

    /// Current mixture weights: `softmax(logits)`, or the logits themselves
    /// under `raw_weights`.
    pub fn mixture_weights(&self, store: &ParamStore) -> Vec<f64> {
        let logits = store.values(self.logits);
        if self.raw_weights {
            logits.to_vec()
        } else {
            crate::graddiff::softmax(logits)
        }
    }

    /// Trainable ids owned by this block: angle tensors (outside reservoir
    /// regimes) followed by the logits.
    pub fn trainable_parameters(&self, store: &ParamStore) -> Vec<ParamId> {
        let mut ids: Vec<ParamId> = self
            .thetas
            .iter()
            .copied()
            .filter(|&id| store.get(id).trainable)
            .collect();
        ids.push(self.logits);
        ids
    }

    /// Weighted combination over all candidates, summed in ascending candidate
    /// order for numeric determinism.
    pub fn block_forward(&self, store: &ParamStore, v: &[f64]) -> Result<Vec<f64>> {
        let weights = self.mixture_weights(store);
        let mut acc = vec![0.0; self.space.n_qubits];
        for (j, config) in self.space.configs.iter().enumerate() {
            let theta = QnnParams::from_flat(
                self.space.n_layers,
                self.space.n_qubits,
                store.values(self.theta_id(j)).to_vec(),
            )?;
            let out = qnn_forward(config, &theta, v)?;
            for (slot, z) in acc.iter_mut().zip(&out) {
                *slot += z * weights[j];
            }
        }
        Ok(acc)
    }

    /// Record the mixture on a tape so both angles and logits receive
    /// gradients.
    pub fn forward_on_tape(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        v: NodeId,
    ) -> Result<NodeId> {
        let logits = tape.param(store, self.logits);
        let weights = if self.raw_weights {
            logits
        } else {
            tape.softmax(logits)?
        };
        let mut acc: Option<NodeId> = None;
        for (j, config) in self.space.configs.iter().enumerate() {
            let theta = tape.param(store, self.theta_id(j));
            let out = tape.quantum(config, self.space.n_layers, theta, v)?;
            let scaled = tape.scale(out, weights, j)?;
            acc = Some(match acc {
                None => scaled,
                Some(prev) => tape.add(prev, scaled)?,
            });
        }
        Ok(acc.expect("search space is never empty"))
    }
}
