//! A single candidate circuit evaluated as a vector-valued function:
//! `f(v; theta) = (<Z_0>, ..., <Z_{n-1}>)`.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::{self, CircuitConfig, Instruction};
use crate::error::{CoreError, Result};
use crate::statevector::Statevector;

/// Trainable rotation angles for one candidate circuit, shaped layers x qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QnnParams {
    n_layers: usize,
    n_qubits: usize,
    angles: Vec<f64>,
}

/// Angle initialization schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitScheme {
    /// Each angle i.i.d. uniform on (-pi, pi).
    Uniform,
    Zeros,
}

impl QnnParams {
    pub fn zeros(n_layers: usize, n_qubits: usize) -> Self {
        QnnParams {
            n_layers,
            n_qubits,
            angles: vec![0.0; n_layers * n_qubits],
        }
    }

    /// Deterministic given the rng state; `Uniform` draws in layer-major order.
    pub fn init(
        rng: &mut ChaCha12Rng,
        scheme: InitScheme,
        n_layers: usize,
        n_qubits: usize,
    ) -> Self {
        let angles = match scheme {
            InitScheme::Zeros => vec![0.0; n_layers * n_qubits],
            InitScheme::Uniform => (0..n_layers * n_qubits)
                .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
                .collect(),
        };
        QnnParams {
            n_layers,
            n_qubits,
            angles,
        }
    }

    pub fn from_flat(n_layers: usize, n_qubits: usize, angles: Vec<f64>) -> Result<Self> {
        if angles.len() != n_layers * n_qubits {
            return Err(CoreError::config(format!(
                "angle vector of length {} cannot be shaped {n_layers}x{n_qubits}",
                angles.len()
            )));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(CoreError::numeric("qnn angles"));
        }
        Ok(QnnParams {
            n_layers,
            n_qubits,
            angles,
        })
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Angles flattened row-major as layers x qubits.
    pub fn flat(&self) -> &[f64] {
        &self.angles
    }

    pub fn get(&self, layer: usize, qubit: usize) -> f64 {
        self.angles[layer * self.n_qubits + qubit]
    }
}

/// Run `config` from `|0...0>` with explicit encoding angles (no arctan
/// squashing) and flat variational angles. This is the primitive both the
/// forward pass and the parameter-shift rule evaluate.
pub(crate) fn eval_with_angles(
    config: &CircuitConfig,
    enc_angles: &[f64],
    thetas: &[f64],
    n_layers: usize,
) -> Result<Vec<f64>> {
    let mut state = Statevector::new_zero_state(enc_angles.len())?;
    let mut failure = None;
    ansatz::for_each_instruction(config, enc_angles, thetas, n_layers, |instr| {
        if failure.is_some() {
            return;
        }
        let outcome = match instr {
            Instruction::Single { gate, target } => state.apply_1q(&gate, target),
            Instruction::Cnot(c) => state.apply_cnot(c),
        };
        if let Err(e) = outcome {
            failure = Some(e);
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(state.expect_z_all())
}

/// Evaluate one candidate: encode `v` (as `arctan(v_q)` per wire), apply the
/// variational layers, and read out `<Z_q>` for every qubit. Every output
/// component lies in [-1, 1].
pub fn qnn_forward(config: &CircuitConfig, theta: &QnnParams, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != theta.n_qubits() {
        return Err(CoreError::config(format!(
            "input of length {} does not match {} qubits",
            v.len(),
            theta.n_qubits()
        )));
    }
    let enc_angles: Vec<f64> = v.iter().map(|x| x.atan()).collect();
    eval_with_angles(config, &enc_angles, theta.flat(), theta.n_layers())
}
