//! The circuit architecture search space.
//!
//! A candidate circuit is described by four independent choices: whether the
//! encoding starts from `|+>^n` (a Hadamard on every wire) or `|0>^n`, which
//! rotation axis encodes the inputs, which CNOT pattern entangles the wires,
//! and which rotation axis carries the trainable angles. That is
//! 2 x 3 x 2 x 3 = 36 distinct configurations.
//!
//! [`build_circuit`] compiles one configuration plus inputs plus angles into a
//! flat [`GateSequence`]: optional Hadamard column, one encoding rotation
//! `R(arctan(v_q))` per wire, then per layer the entangling CNOTs followed by
//! one trainable rotation per wire.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::qnn::QnnParams;
use crate::statevector::{Cnot, Gate1Q, GateKind};

/// Start the encoding from `|0>^n` or from `|+>^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EncodingInit {
    None,
    HadamardAll,
}

/// Rotation axis used for encoding or trainable layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RotationAxis {
    Rx,
    Ry,
    Rz,
}

impl RotationAxis {
    pub fn gate_kind(self) -> GateKind {
        match self {
            RotationAxis::Rx => GateKind::Rx,
            RotationAxis::Ry => GateKind::Ry,
            RotationAxis::Rz => GateKind::Rz,
        }
    }

    fn label(self) -> &'static str {
        match self {
            RotationAxis::Rx => "RX",
            RotationAxis::Ry => "RY",
            RotationAxis::Rz => "RZ",
        }
    }

    fn from_label(s: &str) -> Option<Self> {
        match s {
            "RX" => Some(RotationAxis::Rx),
            "RY" => Some(RotationAxis::Ry),
            "RZ" => Some(RotationAxis::Rz),
            _ => None,
        }
    }
}

/// CNOT layout per entangling layer.
///
/// `Chain` is `CNOT(q, q+1)` for `q = 0..n-2`; `Ring` closes the chain with
/// `CNOT(n-1, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntanglePattern {
    Chain,
    Ring,
}

/// One point in the architecture search space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CircuitConfig {
    pub encoding_init: EncodingInit,
    pub encoding_rot: RotationAxis,
    pub entangle_pattern: EntanglePattern,
    pub variational_rot: RotationAxis,
}

impl CircuitConfig {
    /// Canonical string form, e.g. `H+|RY|ring|RZ`.
    pub fn to_canonical_string(&self) -> String {
        format!(
            "{}|{}|{}|{}",
            match self.encoding_init {
                EncodingInit::None => "H0",
                EncodingInit::HadamardAll => "H+",
            },
            self.encoding_rot.label(),
            match self.entangle_pattern {
                EntanglePattern::Chain => "chain",
                EntanglePattern::Ring => "ring",
            },
            self.variational_rot.label(),
        )
    }

    pub fn from_canonical_string(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('|').collect();
        let bad = || CoreError::config(format!("bad circuit config string {s:?}"));
        if parts.len() != 4 {
            return Err(bad());
        }
        Ok(CircuitConfig {
            encoding_init: match parts[0] {
                "H0" => EncodingInit::None,
                "H+" => EncodingInit::HadamardAll,
                _ => return Err(bad()),
            },
            encoding_rot: RotationAxis::from_label(parts[1]).ok_or_else(bad)?,
            entangle_pattern: match parts[2] {
                "chain" => EntanglePattern::Chain,
                "ring" => EntanglePattern::Ring,
                _ => return Err(bad()),
            },
            variational_rot: RotationAxis::from_label(parts[3]).ok_or_else(bad)?,
        })
    }
}

impl std::fmt::Display for CircuitConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_canonical_string())
    }
}

/// All candidate configurations plus the register shape they compile for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub configs: Vec<CircuitConfig>,
    pub n_qubits: usize,
    pub n_layers: usize,
}

impl SearchSpace {
    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }
}

/// Enumerate the full 36-configuration space in lexicographic order over
/// (encoding_init, encoding_rot, entangle_pattern, variational_rot).
pub fn enumerate_space(n_qubits: usize, n_layers: usize) -> Result<SearchSpace> {
    if n_qubits < 2 {
        return Err(CoreError::config(format!(
            "search space needs >= 2 qubits, got {n_qubits}"
        )));
    }
    if n_layers < 1 {
        return Err(CoreError::config("search space needs >= 1 layer"));
    }
    let axes = [RotationAxis::Rx, RotationAxis::Ry, RotationAxis::Rz];
    let mut configs = Vec::with_capacity(36);
    for init in [EncodingInit::None, EncodingInit::HadamardAll] {
        for enc in axes {
            for pattern in [EntanglePattern::Chain, EntanglePattern::Ring] {
                for var in axes {
                    configs.push(CircuitConfig {
                        encoding_init: init,
                        encoding_rot: enc,
                        entangle_pattern: pattern,
                        variational_rot: var,
                    });
                }
            }
        }
    }
    Ok(SearchSpace {
        configs,
        n_qubits,
        n_layers,
    })
}

/// The six hand-crafted reference circuits, indexed 1..=6 by convention.
///
/// Only the encoding and trainable rotation axes vary; all six start from
/// `|+>^n` and entangle in a ring.
pub fn baseline_configs() -> Vec<CircuitConfig> {
    let pairs = [
        (RotationAxis::Ry, RotationAxis::Ry),
        (RotationAxis::Rz, RotationAxis::Ry),
        (RotationAxis::Rz, RotationAxis::Rz),
        (RotationAxis::Ry, RotationAxis::Rz),
        (RotationAxis::Rx, RotationAxis::Rz),
        (RotationAxis::Rx, RotationAxis::Ry),
    ];
    pairs
        .iter()
        .map(|&(enc, var)| CircuitConfig {
            encoding_init: EncodingInit::HadamardAll,
            encoding_rot: enc,
            entangle_pattern: EntanglePattern::Ring,
            variational_rot: var,
        })
        .collect()
}

/// One tagged gate instruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Instruction {
    Single { gate: Gate1Q, target: usize },
    Cnot(Cnot),
}

/// A compiled circuit: a flat, ordered list of instructions.
pub type GateSequence = Vec<Instruction>;

/// Walk the instructions of `config` for explicit encoding angles, without
/// materializing a sequence. `thetas` is the variational matrix flattened
/// row-major as layers x qubits. This is the single source of gate ordering;
/// both compilation and direct execution go through it.
pub(crate) fn for_each_instruction<F: FnMut(Instruction)>(
    config: &CircuitConfig,
    enc_angles: &[f64],
    thetas: &[f64],
    n_layers: usize,
    mut emit: F,
) -> Result<()> {
    let n = enc_angles.len();
    if thetas.len() != n_layers * n {
        return Err(CoreError::config(format!(
            "theta length {} does not match {n_layers} layers x {n} qubits",
            thetas.len()
        )));
    }
    if config.encoding_init == EncodingInit::HadamardAll {
        for q in 0..n {
            emit(Instruction::Single {
                gate: Gate1Q::new(GateKind::H, 0.0)?,
                target: q,
            });
        }
    }
    let enc_kind = config.encoding_rot.gate_kind();
    for (q, &angle) in enc_angles.iter().enumerate() {
        emit(Instruction::Single {
            gate: Gate1Q::new(enc_kind, angle)?,
            target: q,
        });
    }
    let var_kind = config.variational_rot.gate_kind();
    for layer in 0..n_layers {
        for q in 0..n.saturating_sub(1) {
            emit(Instruction::Cnot(Cnot {
                control: q,
                target: q + 1,
            }));
        }
        if config.entangle_pattern == EntanglePattern::Ring && n >= 2 {
            emit(Instruction::Cnot(Cnot {
                control: n - 1,
                target: 0,
            }));
        }
        for q in 0..n {
            emit(Instruction::Single {
                gate: Gate1Q::new(var_kind, thetas[layer * n + q])?,
                target: q,
            });
        }
    }
    Ok(())
}

/// Compile `config` for inputs `v` (encoded as `arctan(v_q)` per wire) and
/// trainable angles `theta`.
pub fn build_circuit(
    config: &CircuitConfig,
    v: &[f64],
    theta: &QnnParams,
    n_layers: usize,
) -> Result<GateSequence> {
    if theta.n_layers() != n_layers || theta.n_qubits() != v.len() {
        return Err(CoreError::config(format!(
            "params shaped {}x{} do not match {} layers x {} qubits",
            theta.n_layers(),
            theta.n_qubits(),
            n_layers,
            v.len()
        )));
    }
    let enc_angles: Vec<f64> = v.iter().map(|x| x.atan()).collect();
    let mut seq = Vec::new();
    for_each_instruction(config, &enc_angles, theta.flat(), n_layers, |instr| {
        seq.push(instr)
    })?;
    Ok(seq)
}
