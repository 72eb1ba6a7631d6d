//! The QLSTM cell: an LSTM whose four gate transformations are quantum
//! circuit blocks.
//!
//! Per step, the previous hidden state and the scalar input are concatenated
//! into `v_t` (so the register width is `hidden + 1`), each gate block maps
//! `v_t` to one `<Z>` per wire, a per-gate affine projection reshapes that to
//! the hidden size, and the classical LSTM recurrences combine the results:
//!
//! ```text
//! f_t = sigmoid(P_f Q_f(v_t))        i_t = sigmoid(P_i Q_i(v_t))
//! g_t = tanh(P_g Q_g(v_t))           o_t = sigmoid(P_o Q_o(v_t))
//! c_t = f_t . c_{t-1} + i_t . g_t    h_t = o_t . tanh(c_t)
//! ```
//!
//! A zero-initialized affine head maps the final hidden state to the scalar
//! one-step-ahead prediction.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::{baseline_configs, enumerate_space, CircuitConfig};
use crate::diffqas::{DiffQasBlock, SharingRegime};
use crate::error::{CoreError, Result};
use crate::graddiff::{Grad, NodeId, ParamId, ParamStore, Tape};

/// Scalar input per time step.
pub const INPUT_SIZE: usize = 1;

/// Hidden and cell vectors of one recurrence step.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl CellState {
    pub fn zeros(hidden_size: usize) -> Self {
        CellState {
            h: vec![0.0; hidden_size],
            c: vec![0.0; hidden_size],
        }
    }
}

/// The four gate roles in recurrence order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateRole {
    Forget,
    Input,
    Candidate,
    Output,
}

pub const GATE_ROLES: [GateRole; 4] = [
    GateRole::Forget,
    GateRole::Input,
    GateRole::Candidate,
    GateRole::Output,
];

impl GateRole {
    pub fn label(self) -> &'static str {
        match self {
            GateRole::Forget => "f",
            GateRole::Input => "i",
            GateRole::Candidate => "g",
            GateRole::Output => "o",
        }
    }
}

/// One gate's circuit block: a fixed configuration or a searched mixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum GateBlock {
    Fixed {
        config: CircuitConfig,
        theta: ParamId,
    },
    Search(DiffQasBlock),
}

/// Affine map parameters (weight + bias ids).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AffineParams {
    pub weight: ParamId,
    pub bias: ParamId,
}

/// How a model's gate blocks are built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelMode {
    /// Four independent searched mixtures.
    Search {
        regime: SharingRegime,
        raw_weights: bool,
    },
    /// Four copies of one hand-picked configuration, index 1..=6.
    Baseline { index: usize },
}

impl ModelMode {
    pub fn label(self) -> String {
        match self {
            ModelMode::Search { regime, .. } => regime.label().to_string(),
            ModelMode::Baseline { index } => format!("config{index}"),
        }
    }
}

/// A full QLSTM model: four gate blocks, four projections, and the output head.
#[derive(Debug, Clone)]
pub struct QlstmModel {
    pub hidden_size: usize,
    pub n_qubits: usize,
    pub n_layers: usize,
    pub mode: ModelMode,
    pub gates: Vec<GateBlock>,
    pub projections: Vec<AffineParams>,
    pub head: AffineParams,
    pub store: ParamStore,
}

impl QlstmModel {
    /// Build a model for `mode` with every random draw taken from a
    /// `ChaCha12` stream seeded by `seed`, so identical arguments produce an
    /// identical model.
    pub fn build(mode: ModelMode, hidden_size: usize, n_layers: usize, seed: u64) -> Result<Self> {
        if hidden_size == 0 {
            return Err(CoreError::config("hidden size must be positive"));
        }
        let n_qubits = hidden_size + INPUT_SIZE;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();

        let mut gates = Vec::with_capacity(4);
        for role in GATE_ROLES {
            let gate = match mode {
                ModelMode::Search {
                    regime,
                    raw_weights,
                } => {
                    let space = enumerate_space(n_qubits, n_layers)?;
                    GateBlock::Search(DiffQasBlock::new(
                        space,
                        regime,
                        raw_weights,
                        role.label(),
                        &mut store,
                        &mut rng,
                    ))
                }
                ModelMode::Baseline { index } => {
                    let configs = baseline_configs();
                    if index == 0 || index > configs.len() {
                        return Err(CoreError::config(format!(
                            "baseline index {index} outside 1..={}",
                            configs.len()
                        )));
                    }
                    let init = crate::qnn::QnnParams::init(
                        &mut rng,
                        crate::qnn::InitScheme::Uniform,
                        n_layers,
                        n_qubits,
                    );
                    let theta = store.add_vector(
                        format!("{}.theta", role.label()),
                        init.flat().to_vec(),
                        true,
                    );
                    GateBlock::Fixed {
                        config: configs[index - 1],
                        theta,
                    }
                }
            };
            gates.push(gate);
        }

        // Projections pass the first H wire readouts through unchanged at
        // initialization; the head starts all-zero so initial predictions are 0.
        let mut projections = Vec::with_capacity(4);
        for role in GATE_ROLES {
            let mut w = vec![0.0; hidden_size * n_qubits];
            for i in 0..hidden_size {
                w[i * n_qubits + i] = 1.0;
            }
            let weight = store.add_tensor(
                format!("proj.{}.w", role.label()),
                w,
                hidden_size,
                n_qubits,
                true,
            );
            let bias = store.add_vector(
                format!("proj.{}.b", role.label()),
                vec![0.0; hidden_size],
                true,
            );
            projections.push(AffineParams { weight, bias });
        }
        let head_w = store.add_tensor("head.w", vec![0.0; hidden_size], 1, hidden_size, true);
        let head_b = store.add_vector("head.b", vec![0.0], true);

        Ok(QlstmModel {
            hidden_size,
            n_qubits,
            n_layers,
            mode,
            gates,
            projections,
            head: AffineParams {
                weight: head_w,
                bias: head_b,
            },
            store,
        })
    }

    /// Trainable parameter ids in registration order: gate blocks first, then
    /// projections and head.
    pub fn trainable_parameters(&self) -> Vec<ParamId> {
        let mut ids = Vec::new();
        for gate in &self.gates {
            match gate {
                GateBlock::Fixed { theta, .. } => {
                    if self.store.get(*theta).trainable {
                        ids.push(*theta);
                    }
                }
                GateBlock::Search(block) => ids.extend(block.trainable_parameters(&self.store)),
            }
        }
        for proj in &self.projections {
            ids.push(proj.weight);
            ids.push(proj.bias);
        }
        ids.push(self.head.weight);
        ids.push(self.head.bias);
        ids
    }

    fn gate_forward(&self, tape: &mut Tape, gate_index: usize, v: NodeId) -> Result<NodeId> {
        match &self.gates[gate_index] {
            GateBlock::Fixed { config, theta } => {
                let theta_node = tape.param(&self.store, *theta);
                tape.quantum(config, self.n_layers, theta_node, v)
            }
            GateBlock::Search(block) => block.forward_on_tape(tape, &self.store, v),
        }
    }

    fn projected(&self, tape: &mut Tape, gate_index: usize, raw: NodeId) -> Result<NodeId> {
        let proj = self.projections[gate_index];
        let w = tape.param(&self.store, proj.weight);
        let b = tape.param(&self.store, proj.bias);
        tape.affine(w, raw, b, self.hidden_size, self.n_qubits)
    }

    fn check_finite(&self, tape: &Tape, node: NodeId, role: GateRole) -> Result<()> {
        if tape.value(node).iter().any(|x| !x.is_finite()) {
            return Err(CoreError::numeric(format!("{:?} gate activation", role)));
        }
        Ok(())
    }

    /// One recurrence step with the input already on the tape.
    pub fn cell_step_on_tape(
        &self,
        tape: &mut Tape,
        x: NodeId,
        h: NodeId,
        c: NodeId,
    ) -> Result<(NodeId, NodeId)> {
        let v = tape.concat(h, x);

        let f_raw = self.gate_forward(tape, 0, v)?;
        let f_pre = self.projected(tape, 0, f_raw)?;
        let f = tape.sigmoid(f_pre);
        self.check_finite(tape, f, GateRole::Forget)?;

        let i_raw = self.gate_forward(tape, 1, v)?;
        let i_pre = self.projected(tape, 1, i_raw)?;
        let i = tape.sigmoid(i_pre);
        self.check_finite(tape, i, GateRole::Input)?;

        let g_raw = self.gate_forward(tape, 2, v)?;
        let g_pre = self.projected(tape, 2, g_raw)?;
        let g = tape.tanh(g_pre);
        self.check_finite(tape, g, GateRole::Candidate)?;

        let keep = tape.mul(f, c)?;
        let write = tape.mul(i, g)?;
        let c_next = tape.add(keep, write)?;

        let o_raw = self.gate_forward(tape, 3, v)?;
        let o_pre = self.projected(tape, 3, o_raw)?;
        let o = tape.sigmoid(o_pre);
        self.check_finite(tape, o, GateRole::Output)?;

        let c_tanh = tape.tanh(c_next);
        let h_next = tape.mul(o, c_tanh)?;
        Ok((h_next, c_next))
    }

    /// One recurrence step from plain values.
    pub fn cell_step(&self, x: f64, prev: &CellState) -> Result<CellState> {
        if prev.h.len() != self.hidden_size || prev.c.len() != self.hidden_size {
            return Err(CoreError::config(format!(
                "cell state of length {} does not match hidden size {}",
                prev.h.len(),
                self.hidden_size
            )));
        }
        let mut tape = Tape::new();
        let h = tape.constant(prev.h.clone());
        let c = tape.constant(prev.c.clone());
        let x_node = tape.constant_scalar(x);
        let (h_next, c_next) = self.cell_step_on_tape(&mut tape, x_node, h, c)?;
        Ok(CellState {
            h: tape.value(h_next).to_vec(),
            c: tape.value(c_next).to_vec(),
        })
    }

    /// Unroll the cell over `window` (chronological order, `h0 = c0 = 0`) and
    /// record the head output; returns the scalar prediction node.
    pub fn unroll_on_tape(&self, tape: &mut Tape, window: &[f64]) -> Result<NodeId> {
        if window.is_empty() {
            return Err(CoreError::config("cannot unroll an empty window"));
        }
        let mut h = tape.constant(vec![0.0; self.hidden_size]);
        let mut c = tape.constant(vec![0.0; self.hidden_size]);
        for &x in window {
            let x_node = tape.constant_scalar(x);
            let (h_next, c_next) = self.cell_step_on_tape(tape, x_node, h, c)?;
            h = h_next;
            c = c_next;
        }
        let w = tape.param(&self.store, self.head.weight);
        let b = tape.param(&self.store, self.head.bias);
        tape.affine(w, h, b, 1, self.hidden_size)
    }

    /// One-step-ahead prediction for a single window.
    pub fn predict(&self, window: &[f64]) -> Result<f64> {
        let mut tape = Tape::new();
        let pred = self.unroll_on_tape(&mut tape, window)?;
        Ok(tape.value(pred)[0])
    }

    /// Squared prediction error for one window plus its gradient with respect
    /// to every trainable parameter.
    pub fn window_loss_and_grad(&self, window: &[f64], target: f64) -> Result<(f64, Grad)> {
        let mut tape = Tape::new();
        let pred = self.unroll_on_tape(&mut tape, window)?;
        let neg_target = tape.constant_scalar(-target);
        let diff = tape.add(pred, neg_target)?;
        let loss = tape.mul(diff, diff)?;
        let value = tape.value(loss)[0];
        if !value.is_finite() {
            return Err(CoreError::numeric("window squared error"));
        }
        let grad = tape.backward(loss)?;
        Ok((value, grad))
    }
}
