//! Hybrid gradient engine.
//!
//! A [`Tape`] records vector-valued operations in topological order. Classical
//! operations (sigmoid, tanh, add, mul, scale, dot, softmax, affine, concat)
//! backpropagate analytically; quantum circuit evaluations backpropagate with
//! the parameter-shift rule, which is exact here because every parameterized
//! gate is a single-axis rotation: for `R_a(theta) = exp(-i theta sigma_a / 2)`,
//!
//! ```text
//! d<B>/d theta = [<B>(theta + pi/2) - <B>(theta - pi/2)] / 2
//! ```
//!
//! The rule is applied both to variational angles and to encoding angles; for
//! the latter the chain rule through the `arctan` input squashing contributes
//! a factor `1 / (1 + v^2)`, which lets gradients flow through the recurrent
//! hidden state (full backpropagation through time).

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::ansatz::CircuitConfig;
use crate::error::{CoreError, Result};
use crate::qnn;

/// Handle of one registered parameter tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// A named parameter tensor: a flat value buffer plus a rows x cols shape
/// (vectors are `len x 1`). Frozen tensors participate in forward passes but
/// never receive gradients or optimizer updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamTensor {
    pub id: ParamId,
    pub name: String,
    pub values: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    pub trainable: bool,
}

/// Registry of every tensor owned by a model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    tensors: Vec<ParamTensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_tensor(
        &mut self,
        name: impl Into<String>,
        values: Vec<f64>,
        rows: usize,
        cols: usize,
        trainable: bool,
    ) -> ParamId {
        assert_eq!(values.len(), rows * cols, "tensor shape mismatch");
        let id = ParamId(self.tensors.len());
        self.tensors.push(ParamTensor {
            id,
            name: name.into(),
            values,
            rows,
            cols,
            trainable,
        });
        id
    }

    pub fn add_vector(
        &mut self,
        name: impl Into<String>,
        values: Vec<f64>,
        trainable: bool,
    ) -> ParamId {
        let rows = values.len();
        self.add_tensor(name, values, rows, 1, trainable)
    }

    pub fn get(&self, id: ParamId) -> &ParamTensor {
        &self.tensors[id.0]
    }

    pub fn values(&self, id: ParamId) -> &[f64] {
        &self.tensors[id.0].values
    }

    pub fn values_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.tensors[id.0].values
    }

    pub fn tensors(&self) -> &[ParamTensor] {
        &self.tensors
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn trainable_ids(&self) -> Vec<ParamId> {
        self.tensors
            .iter()
            .filter(|t| t.trainable)
            .map(|t| t.id)
            .collect()
    }
}

/// Index of a recorded node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    /// Input or parameter leaf; `param` keys gradient collection.
    Leaf {
        param: Option<ParamId>,
    },
    Sigmoid(NodeId),
    Tanh(NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    /// `vec * coeff[index]`, the coefficient read from another node.
    Scale {
        vec: NodeId,
        coeff: NodeId,
        index: usize,
    },
    Dot(NodeId, NodeId),
    Softmax(NodeId),
    /// `W x + b` with `W` flattened row-major.
    Affine {
        weight: NodeId,
        input: NodeId,
        bias: NodeId,
        rows: usize,
        cols: usize,
    },
    Concat(NodeId, NodeId),
    /// Candidate circuit evaluation; `enc_angles = arctan(input)` saved for
    /// the backward shift evaluations.
    Quantum {
        config: CircuitConfig,
        n_layers: usize,
        theta: NodeId,
        input: NodeId,
        enc_angles: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Vec<f64>,
    requires_grad: bool,
}

/// Gradients keyed by parameter id, as produced by [`Tape::backward`].
#[derive(Debug, Clone, Default)]
pub struct Grad {
    by_param: HashMap<ParamId, Vec<f64>>,
}

impl Grad {
    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.by_param.get(&id).map(|v| v.as_slice())
    }

    pub fn param_ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.by_param.keys().copied()
    }

    /// `self += other`, elementwise per parameter.
    pub fn accumulate(&mut self, other: &Grad) {
        for (id, g) in &other.by_param {
            match self.by_param.get_mut(id) {
                Some(acc) => {
                    for (a, b) in acc.iter_mut().zip(g) {
                        *a += b;
                    }
                }
                None => {
                    self.by_param.insert(*id, g.clone());
                }
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.by_param.values_mut() {
            for x in g.iter_mut() {
                *x *= factor;
            }
        }
    }

    pub fn global_norm(&self) -> f64 {
        let mut ids: Vec<ParamId> = self.by_param.keys().copied().collect();
        ids.sort();
        let mut acc = 0.0;
        for id in ids {
            for &x in &self.by_param[&id] {
                acc += x * x;
            }
        }
        acc.sqrt()
    }
}

/// Reverse-mode tape over vector-valued nodes.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    param_leaves: HashMap<ParamId, NodeId>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Vec<f64>, requires_grad: bool) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        id
    }

    fn rg(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Constant leaf; never receives gradient.
    pub fn constant(&mut self, values: Vec<f64>) -> NodeId {
        self.push(Op::Leaf { param: None }, values, false)
    }

    pub fn constant_scalar(&mut self, value: f64) -> NodeId {
        self.constant(vec![value])
    }

    /// Parameter leaf, snapshotting the store's current values. Repeated calls
    /// for the same id return the same node so gradients from every use site
    /// accumulate together.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        if let Some(&node) = self.param_leaves.get(&id) {
            return node;
        }
        let tensor = store.get(id);
        let node = self.push(
            Op::Leaf { param: Some(id) },
            tensor.values.clone(),
            tensor.trainable,
        );
        self.param_leaves.insert(id, node);
        node
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let value: Vec<f64> = self.nodes[x.0].value.iter().map(|&v| sigmoid(v)).collect();
        let rg = self.rg(x);
        self.push(Op::Sigmoid(x), value, rg)
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let value: Vec<f64> = self.nodes[x.0].value.iter().map(|v| v.tanh()).collect();
        let rg = self.rg(x);
        self.push(Op::Tanh(x), value, rg)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if va.len() != vb.len() {
            return Err(CoreError::config(format!(
                "add shape mismatch: {} vs {}",
                va.len(),
                vb.len()
            )));
        }
        let value: Vec<f64> = va.iter().zip(vb).map(|(x, y)| x + y).collect();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Add(a, b), value, rg))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if va.len() != vb.len() {
            return Err(CoreError::config(format!(
                "mul shape mismatch: {} vs {}",
                va.len(),
                vb.len()
            )));
        }
        let value: Vec<f64> = va.iter().zip(vb).map(|(x, y)| x * y).collect();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Mul(a, b), value, rg))
    }

    /// Multiply a vector node by one component of another node.
    pub fn scale(&mut self, vec: NodeId, coeff: NodeId, index: usize) -> Result<NodeId> {
        if index >= self.nodes[coeff.0].value.len() {
            return Err(CoreError::config(format!(
                "scale coefficient index {index} out of range"
            )));
        }
        let c = self.nodes[coeff.0].value[index];
        let value: Vec<f64> = self.nodes[vec.0].value.iter().map(|&x| x * c).collect();
        let rg = self.rg(vec) || self.rg(coeff);
        Ok(self.push(Op::Scale { vec, coeff, index }, value, rg))
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if va.len() != vb.len() {
            return Err(CoreError::config(format!(
                "dot shape mismatch: {} vs {}",
                va.len(),
                vb.len()
            )));
        }
        let value = va.iter().zip(vb).map(|(x, y)| x * y).sum();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Dot(a, b), vec![value], rg))
    }

    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let v = &self.nodes[x.0].value;
        if v.is_empty() {
            return Err(CoreError::config("softmax of empty vector"));
        }
        let value = softmax(v);
        let rg = self.rg(x);
        Ok(self.push(Op::Softmax(x), value, rg))
    }

    /// `W x + b` where `weight` holds `rows * cols` entries row-major.
    pub fn affine(
        &mut self,
        weight: NodeId,
        input: NodeId,
        bias: NodeId,
        rows: usize,
        cols: usize,
    ) -> Result<NodeId> {
        let w = &self.nodes[weight.0].value;
        let x = &self.nodes[input.0].value;
        let b = &self.nodes[bias.0].value;
        if w.len() != rows * cols || x.len() != cols || b.len() != rows {
            return Err(CoreError::config(format!(
                "affine shape mismatch: weight {} input {} bias {} for {rows}x{cols}",
                w.len(),
                x.len(),
                b.len()
            )));
        }
        let value = affine(w, x, b, rows, cols);
        let rg = self.rg(weight) || self.rg(input) || self.rg(bias);
        Ok(self.push(
            Op::Affine {
                weight,
                input,
                bias,
                rows,
                cols,
            },
            value,
            rg,
        ))
    }

    pub fn concat(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let mut value = self.nodes[a.0].value.clone();
        value.extend_from_slice(&self.nodes[b.0].value);
        let rg = self.rg(a) || self.rg(b);
        self.push(Op::Concat(a, b), value, rg)
    }

    /// Record one candidate circuit evaluation: `theta` holds the flat
    /// variational angles, `input` the raw (pre-arctan) wire inputs. The value
    /// is `<Z_q>` per qubit; the backward pass contributes shift-rule VJPs for
    /// both `theta` and `input`.
    pub fn quantum(
        &mut self,
        config: &CircuitConfig,
        n_layers: usize,
        theta: NodeId,
        input: NodeId,
    ) -> Result<NodeId> {
        let v = &self.nodes[input.0].value;
        let thetas = &self.nodes[theta.0].value;
        if thetas.len() != n_layers * v.len() {
            return Err(CoreError::config(format!(
                "quantum node: {} angles for {n_layers} layers x {} wires",
                thetas.len(),
                v.len()
            )));
        }
        let enc_angles: Vec<f64> = v.iter().map(|x| x.atan()).collect();
        let value = qnn::eval_with_angles(config, &enc_angles, thetas, n_layers)?;
        let rg = self.rg(theta) || self.rg(input);
        Ok(self.push(
            Op::Quantum {
                config: *config,
                n_layers,
                theta,
                input,
                enc_angles,
            },
            value,
            rg,
        ))
    }

    /// Reverse accumulation from a scalar loss node. Returns partials for
    /// every parameter leaf that requires gradient; recorded forward values
    /// are left untouched.
    pub fn backward(&self, loss: NodeId) -> Result<Grad> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(CoreError::config(format!(
                "backward needs a scalar loss node, got length {}",
                self.nodes[loss.0].value.len()
            )));
        }
        let mut adjoints: Vec<Vec<f64>> = self
            .nodes
            .iter()
            .map(|n| vec![0.0; n.value.len()])
            .collect();
        adjoints[loss.0][0] = 1.0;

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            // Split so the node's own adjoint can be read while upstream
            // adjoints are written; the adjoint is moved out and restored
            // after the node is processed.
            let (before, rest) = adjoints.split_at_mut(idx);
            let grad_out = std::mem::take(&mut rest[0]);
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf { .. } => {}
                Op::Sigmoid(x) => {
                    for (slot, (g, y)) in
                        before[x.0].iter_mut().zip(grad_out.iter().zip(&node.value))
                    {
                        *slot += g * y * (1.0 - y);
                    }
                }
                Op::Tanh(x) => {
                    for (slot, (g, y)) in
                        before[x.0].iter_mut().zip(grad_out.iter().zip(&node.value))
                    {
                        *slot += g * (1.0 - y * y);
                    }
                }
                Op::Add(a, b) => {
                    for (slot, g) in before[a.0].iter_mut().zip(&grad_out) {
                        *slot += g;
                    }
                    for (slot, g) in before[b.0].iter_mut().zip(&grad_out) {
                        *slot += g;
                    }
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    for (slot, (g, y)) in before[a.0].iter_mut().zip(grad_out.iter().zip(vb)) {
                        *slot += g * y;
                    }
                    for (slot, (g, x)) in before[b.0].iter_mut().zip(grad_out.iter().zip(va)) {
                        *slot += g * x;
                    }
                }
                Op::Scale { vec, coeff, index } => {
                    let c = self.nodes[coeff.0].value[*index];
                    let vv = &self.nodes[vec.0].value;
                    for (slot, g) in before[vec.0].iter_mut().zip(&grad_out) {
                        *slot += g * c;
                    }
                    let inner: f64 = grad_out.iter().zip(vv).map(|(g, x)| g * x).sum();
                    before[coeff.0][*index] += inner;
                }
                Op::Dot(a, b) => {
                    let g = grad_out[0];
                    let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    for (slot, y) in before[a.0].iter_mut().zip(vb) {
                        *slot += g * y;
                    }
                    for (slot, x) in before[b.0].iter_mut().zip(va) {
                        *slot += g * x;
                    }
                }
                Op::Softmax(x) => {
                    let y = &node.value;
                    let inner: f64 = grad_out.iter().zip(y).map(|(g, yi)| g * yi).sum();
                    for (slot, (g, yi)) in before[x.0].iter_mut().zip(grad_out.iter().zip(y)) {
                        *slot += yi * (g - inner);
                    }
                }
                Op::Affine {
                    weight,
                    input,
                    bias,
                    rows,
                    cols,
                } => {
                    let w = &self.nodes[weight.0].value;
                    let x = &self.nodes[input.0].value;
                    for i in 0..*rows {
                        let g = grad_out[i];
                        if g == 0.0 {
                            continue;
                        }
                        for j in 0..*cols {
                            before[input.0][j] += g * w[i * cols + j];
                            before[weight.0][i * cols + j] += g * x[j];
                        }
                        before[bias.0][i] += g;
                    }
                }
                Op::Concat(a, b) => {
                    let na = self.nodes[a.0].value.len();
                    for (slot, g) in before[a.0].iter_mut().zip(&grad_out[..na]) {
                        *slot += g;
                    }
                    for (slot, g) in before[b.0].iter_mut().zip(&grad_out[na..]) {
                        *slot += g;
                    }
                }
                Op::Quantum {
                    config,
                    n_layers,
                    theta,
                    input,
                    enc_angles,
                } if grad_out.iter().any(|&g| g != 0.0) => {
                    let thetas = &self.nodes[theta.0].value;
                    if self.rg(*theta) {
                        let mut shifted = thetas.clone();
                        for k in 0..thetas.len() {
                            let orig = shifted[k];
                            shifted[k] = orig + FRAC_PI_2;
                            let plus =
                                qnn::eval_with_angles(config, enc_angles, &shifted, *n_layers)?;
                            shifted[k] = orig - FRAC_PI_2;
                            let minus =
                                qnn::eval_with_angles(config, enc_angles, &shifted, *n_layers)?;
                            shifted[k] = orig;
                            let vjp: f64 = grad_out
                                .iter()
                                .zip(plus.iter().zip(&minus))
                                .map(|(g, (p, m))| g * (p - m) / 2.0)
                                .sum();
                            before[theta.0][k] += vjp;
                        }
                    }
                    if self.rg(*input) {
                        let raw = &self.nodes[input.0].value;
                        let mut shifted = enc_angles.clone();
                        for q in 0..enc_angles.len() {
                            let orig = shifted[q];
                            shifted[q] = orig + FRAC_PI_2;
                            let plus = qnn::eval_with_angles(config, &shifted, thetas, *n_layers)?;
                            shifted[q] = orig - FRAC_PI_2;
                            let minus = qnn::eval_with_angles(config, &shifted, thetas, *n_layers)?;
                            shifted[q] = orig;
                            let d_angle: f64 = grad_out
                                .iter()
                                .zip(plus.iter().zip(&minus))
                                .map(|(g, (p, m))| g * (p - m) / 2.0)
                                .sum();
                            // d arctan(v)/dv
                            before[input.0][q] += d_angle / (1.0 + raw[q] * raw[q]);
                        }
                    }
                }
                Op::Quantum { .. } => {}
            }
            rest[0] = grad_out;
        }

        let mut grad = Grad::default();
        for (idx, node) in self.nodes.iter().enumerate() {
            if let Op::Leaf { param: Some(pid) } = node.op {
                if node.requires_grad {
                    grad.by_param.insert(pid, adjoints[idx].clone());
                }
            }
        }
        Ok(grad)
    }
}

/// Exact derivative of a scalar circuit expectation with respect to one
/// rotation angle: two evaluations at +-pi/2 shifts, prefactor 1/2.
pub fn param_shift_derivative<F>(eval: F, angles: &[f64], index: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if index >= angles.len() {
        return Err(CoreError::config(format!(
            "shift index {index} out of range for {} angles",
            angles.len()
        )));
    }
    let mut shifted = angles.to_vec();
    shifted[index] = angles[index] + FRAC_PI_2;
    let plus = eval(&shifted)?;
    shifted[index] = angles[index] - FRAC_PI_2;
    let minus = eval(&shifted)?;
    let derivative = (plus - minus) / 2.0;
    if !derivative.is_finite() {
        return Err(CoreError::numeric("parameter-shift evaluation"));
    }
    Ok(derivative)
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub(crate) fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub(crate) fn affine(w: &[f64], x: &[f64], b: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows);
    for i in 0..rows {
        let mut acc = b[i];
        for j in 0..cols {
            acc += w[i * cols + j] * x[j];
        }
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{CircuitConfig, EncodingInit, EntanglePattern, RotationAxis};
    use crate::qnn::{qnn_forward, InitScheme, QnnParams};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn ry_expectation(angles: &[f64]) -> Result<f64> {
        let theta = QnnParams::from_flat(1, 1, angles.to_vec())?;
        let cfg = CircuitConfig {
            encoding_init: EncodingInit::None,
            encoding_rot: RotationAxis::Ry,
            entangle_pattern: EntanglePattern::Chain,
            variational_rot: RotationAxis::Ry,
        };
        Ok(qnn_forward(&cfg, &theta, &[0.0])?[0])
    }

    fn rz_expectation(angles: &[f64]) -> Result<f64> {
        let theta = QnnParams::from_flat(1, 1, angles.to_vec())?;
        let cfg = CircuitConfig {
            encoding_init: EncodingInit::None,
            encoding_rot: RotationAxis::Rz,
            entangle_pattern: EntanglePattern::Chain,
            variational_rot: RotationAxis::Rz,
        };
        Ok(qnn_forward(&cfg, &theta, &[0.0])?[0])
    }

    #[test]
    fn shift_rule_on_single_rotation() {
        // d/dtheta cos(theta) = -sin(theta)
        let d = param_shift_derivative(ry_expectation, &[std::f64::consts::FRAC_PI_2], 0).unwrap();
        assert!((d + 1.0).abs() < 1e-12);

        let d = param_shift_derivative(ry_expectation, &[0.0], 0).unwrap();
        assert!(d.abs() < 1e-12);

        for theta in [0.3, -1.2, 2.9] {
            let d = param_shift_derivative(rz_expectation, &[theta], 0).unwrap();
            assert!(d.abs() < 1e-12, "z rotation leaves |0> population fixed");
        }

        assert!(param_shift_derivative(ry_expectation, &[0.0], 1).is_err());
    }

    #[test]
    fn shift_rule_matches_finite_difference() {
        let d = param_shift_derivative(ry_expectation, &[0.7], 0).unwrap();
        let h = 1e-5;
        let fd =
            (ry_expectation(&[0.7 + h]).unwrap() - ry_expectation(&[0.7 - h]).unwrap()) / (2.0 * h);
        assert!((d - fd).abs() < 1e-8);
    }

    #[test]
    fn classical_op_values() {
        let mut tape = Tape::new();
        let x = tape.constant(vec![0.0]);
        let s = tape.sigmoid(x);
        assert_eq!(tape.value(s), &[0.5]);
        let t = tape.tanh(x);
        assert_eq!(tape.value(t), &[0.0]);
        let logits = tape.constant(vec![0.0, 0.0, 0.0]);
        let w = tape.softmax(logits).unwrap();
        for &wi in tape.value(w) {
            assert!((wi - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_mismatches_are_config_errors() {
        let mut tape = Tape::new();
        let a = tape.constant(vec![1.0, 2.0]);
        let b = tape.constant(vec![1.0]);
        assert!(tape.add(a, b).is_err());
        assert!(tape.mul(a, b).is_err());
        assert!(tape.dot(a, b).is_err());
        assert!(tape.scale(a, b, 3).is_err());
        assert!(tape.affine(a, a, b, 2, 2).is_err());
    }

    #[test]
    fn chain_rule_by_hand() {
        // loss = sigmoid(p)^2 at p = 0: dL/dp = 2 * 0.5 * 0.25 = 0.25
        let mut store = ParamStore::new();
        let p = store.add_vector("p", vec![0.0], true);
        let mut tape = Tape::new();
        let leaf = tape.param(&store, p);
        let s = tape.sigmoid(leaf);
        let loss = tape.mul(s, s).unwrap();
        let grad = tape.backward(loss).unwrap();
        assert!((grad.get(p).unwrap()[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn constant_loss_has_zero_partials() {
        let mut store = ParamStore::new();
        let p = store.add_vector("p", vec![0.4, -0.2], true);
        let mut tape = Tape::new();
        let leaf = tape.param(&store, p);
        let _ = tape.sigmoid(leaf);
        let loss = tape.constant_scalar(3.0);
        let grad = tape.backward(loss).unwrap();
        // The constant does not depend on p; p never reaches the loss.
        assert!(grad.get(p).unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut tape = Tape::new();
        let x = tape.constant(vec![1.0, 2.0]);
        assert!(tape.backward(x).is_err());
    }

    #[test]
    fn backward_leaves_forward_values_intact() {
        let mut store = ParamStore::new();
        let p = store.add_vector("p", vec![0.3, 0.8], true);
        let mut tape = Tape::new();
        let leaf = tape.param(&store, p);
        let s = tape.sigmoid(leaf);
        let d = tape.dot(s, s).unwrap();
        let before: Vec<f64> = tape.value(s).to_vec();
        tape.backward(d).unwrap();
        assert_eq!(tape.value(s), before.as_slice());
    }

    #[test]
    fn quantum_node_zero_angles_identity() {
        let cfg = CircuitConfig {
            encoding_init: EncodingInit::None,
            encoding_rot: RotationAxis::Ry,
            entangle_pattern: EntanglePattern::Chain,
            variational_rot: RotationAxis::Ry,
        };
        let mut store = ParamStore::new();
        let theta = store.add_vector("theta", vec![0.0, 0.0], true);
        let mut tape = Tape::new();
        let theta_leaf = tape.param(&store, theta);
        let v = tape.constant(vec![0.0, 0.0]);
        let q = tape.quantum(&cfg, 1, theta_leaf, v).unwrap();
        assert_eq!(tape.value(q), &[1.0, 1.0]);
    }

    /// Central finite difference of a scalar-valued closure.
    fn central_fd<F: Fn(&[f64]) -> f64>(f: F, at: &[f64], i: usize, h: f64) -> f64 {
        let mut plus = at.to_vec();
        let mut minus = at.to_vec();
        plus[i] += h;
        minus[i] -= h;
        (f(&plus) - f(&minus)) / (2.0 * h)
    }

    #[test]
    fn quantum_gradients_match_finite_difference() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let space = crate::ansatz::enumerate_space(4, 2).unwrap();
        for trial in 0..6 {
            let cfg = space.configs[(trial * 7) % 36];
            let theta0: Vec<f64> = (0..8).map(|_| rng.random_range(-3.0..3.0)).collect();
            let v0: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();

            let mut store = ParamStore::new();
            let theta = store.add_vector("theta", theta0.clone(), true);
            let vp = store.add_vector("v", v0.clone(), true);

            let mut tape = Tape::new();
            let theta_leaf = tape.param(&store, theta);
            let v_leaf = tape.param(&store, vp);
            let q = tape.quantum(&cfg, 2, theta_leaf, v_leaf).unwrap();
            // Scalar loss: dot the circuit output with fixed weights.
            let weights = tape.constant(vec![0.9, -0.4, 0.25, 0.6]);
            let loss = tape.dot(q, weights).unwrap();
            let grad = tape.backward(loss).unwrap();

            let loss_at = |th: &[f64], vv: &[f64]| {
                let p = QnnParams::from_flat(2, 4, th.to_vec()).unwrap();
                let out = qnn_forward(&cfg, &p, vv).unwrap();
                0.9 * out[0] - 0.4 * out[1] + 0.25 * out[2] + 0.6 * out[3]
            };

            let g_theta = grad.get(theta).unwrap();
            for (i, g) in g_theta.iter().enumerate() {
                let fd = central_fd(|th| loss_at(th, &v0), &theta0, i, 1e-5);
                let err = (g - fd).abs();
                assert!(
                    err < 1e-6 || err / fd.abs().max(1e-12) < 1e-4,
                    "theta[{i}]: shift {g} vs fd {fd}"
                );
            }
            let g_v = grad.get(vp).unwrap();
            for (i, g) in g_v.iter().enumerate() {
                let fd = central_fd(|vv| loss_at(&theta0, vv), &v0, i, 1e-5);
                let err = (g - fd).abs();
                assert!(
                    err < 1e-6 || err / fd.abs().max(1e-12) < 1e-4,
                    "v[{i}]: shift {g} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn frozen_theta_receives_no_gradient() {
        let cfg = crate::ansatz::baseline_configs()[0];
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let mut store = ParamStore::new();
        let theta_vals = QnnParams::init(&mut rng, InitScheme::Uniform, 2, 4);
        let theta = store.add_vector("theta", theta_vals.flat().to_vec(), false);
        let logits = store.add_vector("logits", vec![0.0; 4], true);

        let mut tape = Tape::new();
        let theta_leaf = tape.param(&store, theta);
        let v = tape.constant(vec![0.2, -0.4, 0.6, 0.1]);
        let q = tape.quantum(&cfg, 2, theta_leaf, v).unwrap();
        let w_leaf = tape.param(&store, logits);
        let w = tape.softmax(w_leaf).unwrap();
        let loss = tape.dot(q, w).unwrap();
        let grad = tape.backward(loss).unwrap();
        assert!(grad.get(theta).is_none());
        assert!(grad.get(logits).is_some());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        // Gradient of a sum equals the sum of the gradients.
        #[test]
        fn gradient_is_linear_over_losses(
            xs in proptest::collection::vec(-2.0f64..2.0, 3),
            ws in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let mut store = ParamStore::new();
            let p = store.add_vector("p", xs.clone(), true);

            let grad_of = |combine: &dyn Fn(&mut Tape, NodeId, NodeId) -> NodeId| -> Vec<f64> {
                let mut tape = Tape::new();
                let leaf = tape.param(&store, p);
                let w = tape.constant(ws.clone());
                let s = tape.sigmoid(leaf);
                let t = tape.tanh(leaf);
                let l1 = tape.dot(s, w).unwrap();
                let l2 = tape.dot(t, w).unwrap();
                let loss = combine(&mut tape, l1, l2);
                tape.backward(loss).unwrap().get(p).unwrap().to_vec()
            };

            let g_sum = grad_of(&|tape, l1, l2| tape.add(l1, l2).unwrap());
            let g1 = grad_of(&|_tape, l1, _l2| l1);
            let g2 = grad_of(&|_tape, _l1, l2| l2);
            for i in 0..3 {
                prop_assert!((g_sum[i] - (g1[i] + g2[i])).abs() < 1e-12);
            }
        }

        #[test]
        fn softmax_backward_matches_finite_difference(
            logits in proptest::collection::vec(-3.0f64..3.0, 4),
            probe in proptest::collection::vec(-1.0f64..1.0, 4),
        ) {
            let mut store = ParamStore::new();
            let p = store.add_vector("logits", logits.clone(), true);
            let mut tape = Tape::new();
            let leaf = tape.param(&store, p);
            let sm = tape.softmax(leaf).unwrap();
            let w = tape.constant(probe.clone());
            let loss = tape.dot(sm, w).unwrap();
            let grad = tape.backward(loss).unwrap();
            let g = grad.get(p).unwrap();

            let f = |v: &[f64]| -> f64 {
                softmax(v).iter().zip(&probe).map(|(s, w)| s * w).sum()
            };
            for (i, gi) in g.iter().enumerate() {
                let fd = central_fd(f, &logits, i, 1e-6);
                prop_assert!((gi - fd).abs() < 1e-6);
            }
        }
    }
}
