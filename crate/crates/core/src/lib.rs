//! Quantum sequence learning with differentiable architecture search.
//!
//! This crate trains QLSTM cells — LSTM cells whose four gate transformations
//! are variational quantum circuits — on one-step-ahead time-series prediction.
//! Each gate circuit is either a fixed hand-picked ansatz or a differentiable
//! mixture over the full 36-configuration search space, with structural weights
//! and rotation angles optimized jointly by gradient descent.
//!
//! Modules, roughly bottom-up:
//!
//! - [`statevector`]: dense exact n-qubit simulation with Pauli-Z readout.
//! - [`ansatz`]: the circuit search space and gate-sequence compilation.
//! - [`qnn`]: a single candidate circuit as a differentiable vector function.
//! - [`graddiff`]: reverse-mode tape with parameter-shift quantum gradients.
//! - [`diffqas`]: softmax mixtures over candidates and parameter-sharing regimes.
//! - [`qlstm`]: the recurrent cell, sequence unrolling, and output head.
//! - [`datasets`]: benchmark series generators, scaling, and windowing.
//! - [`trainer`]: Adam training loop, metrics, and rollouts.
//! - [`checkpoint`]: exact (bit-identical) model serialization.

pub mod ansatz;
pub mod checkpoint;
pub mod datasets;
pub mod diffqas;
pub mod error;
pub mod graddiff;
pub mod qlstm;
pub mod qnn;
pub mod statevector;
pub mod trainer;

pub use error::{CoreError, Result};
