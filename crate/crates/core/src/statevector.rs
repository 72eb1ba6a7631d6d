//! Dense, exact simulation of n-qubit pure states.
//!
//! Amplitudes are stored densely; a single-qubit gate is applied as a
//! stride-based 2x2 update in O(2^n), never by tensoring the gate up to the
//! full dimension. Global phase is not tracked; only expectation values are
//! contractual.
//!
//! # Qubit-index convention
//!
//! Qubit 0 is the **most significant bit** of the amplitude index. For a
//! 2-qubit register, `|10>` (qubit 0 set, qubit 1 clear) lives at index
//! `0b10 = 2`. Every operation in this crate, including [`Statevector::expect_z`],
//! uses this convention.

use num_complex::Complex64;

use crate::error::{CoreError, Result};

/// Hard cap on register width; 2^12 amplitudes keeps a single state under 64 KiB.
pub const MAX_QUBITS: usize = 12;

/// The single-qubit gate alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    H,
    Rx,
    Ry,
    Rz,
}

/// A single-qubit gate: its kind, angle, and realized 2x2 unitary.
///
/// Rotations use the half-angle convention `R_a(theta) = exp(-i theta sigma_a / 2)`,
/// so `R_y(theta) = [[cos t/2, -sin t/2], [sin t/2, cos t/2]]`. The angle is
/// ignored for `H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gate1Q {
    pub kind: GateKind,
    pub angle: f64,
    pub matrix: [[Complex64; 2]; 2],
}

impl Gate1Q {
    pub fn new(kind: GateKind, angle: f64) -> Result<Self> {
        if !angle.is_finite() {
            return Err(CoreError::numeric(format!("gate angle for {kind:?}")));
        }
        let matrix = match kind {
            GateKind::H => {
                let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                [[s, s], [s, -s]]
            }
            GateKind::Rx => {
                let (c, s) = half_angle(angle);
                [
                    [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
                    [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
                ]
            }
            GateKind::Ry => {
                let (c, s) = half_angle(angle);
                [
                    [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                    [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
                ]
            }
            GateKind::Rz => {
                let (c, s) = half_angle(angle);
                [
                    [Complex64::new(c, -s), Complex64::new(0.0, 0.0)],
                    [Complex64::new(0.0, 0.0), Complex64::new(c, s)],
                ]
            }
        };
        Ok(Gate1Q {
            kind,
            angle,
            matrix,
        })
    }
}

fn half_angle(theta: f64) -> (f64, f64) {
    let h = theta / 2.0;
    (h.cos(), h.sin())
}

/// A CNOT between two distinct wires.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cnot {
    pub control: usize,
    pub target: usize,
}

impl Cnot {
    pub fn new(control: usize, target: usize) -> Result<Self> {
        if control == target {
            return Err(CoreError::config(format!(
                "cnot control and target both {control}"
            )));
        }
        Ok(Cnot { control, target })
    }
}

/// Dense state of an n-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    /// `|0...0>` on `n` qubits.
    pub fn new_zero_state(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(CoreError::QubitCount {
                requested: n,
                max: MAX_QUBITS,
            });
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Statevector {
            n_qubits: n,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(Complex64::norm_sqr).sum()
    }

    /// Reset to `|0...0>` without reallocating.
    pub fn reset(&mut self) {
        self.amplitudes.fill(Complex64::new(0.0, 0.0));
        self.amplitudes[0] = Complex64::new(1.0, 0.0);
    }

    fn check_qubit(&self, index: usize) -> Result<()> {
        if index >= self.n_qubits {
            return Err(CoreError::QubitIndex {
                index,
                n_qubits: self.n_qubits,
            });
        }
        Ok(())
    }

    /// Bit mask selecting `qubit` under the MSB-first convention.
    #[inline]
    fn mask(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    /// Apply a 2x2 unitary to `target`, updating amplitudes in place.
    pub fn apply_1q(&mut self, gate: &Gate1Q, target: usize) -> Result<()> {
        self.check_qubit(target)?;
        let m = gate.matrix;
        let step = self.mask(target);
        let len = self.amplitudes.len();
        let mut base = 0;
        while base < len {
            for low in base..base + step {
                let high = low + step;
                let a = self.amplitudes[low];
                let b = self.amplitudes[high];
                self.amplitudes[low] = m[0][0] * a + m[0][1] * b;
                self.amplitudes[high] = m[1][0] * a + m[1][1] * b;
            }
            base += 2 * step;
        }
        Ok(())
    }

    /// Swap the target bit on every amplitude whose control bit is set.
    pub fn apply_cnot(&mut self, cnot: Cnot) -> Result<()> {
        if cnot.control == cnot.target {
            return Err(CoreError::config(format!(
                "cnot control and target both {}",
                cnot.control
            )));
        }
        self.check_qubit(cnot.control)?;
        self.check_qubit(cnot.target)?;
        let cmask = self.mask(cnot.control);
        let tmask = self.mask(cnot.target);
        for i in 0..self.amplitudes.len() {
            if i & cmask != 0 && i & tmask == 0 {
                self.amplitudes.swap(i, i | tmask);
            }
        }
        Ok(())
    }

    /// `<Z_qubit>`: signed probability mass, +1 for bit clear, -1 for bit set.
    pub fn expect_z(&self, qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        let mask = self.mask(qubit);
        let mut acc = 0.0;
        for (i, amp) in self.amplitudes.iter().enumerate() {
            let p = amp.norm_sqr();
            if i & mask == 0 {
                acc += p;
            } else {
                acc -= p;
            }
        }
        Ok(acc)
    }

    /// `<Z_q>` for every qubit in one pass over the amplitudes.
    pub fn expect_z_all(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_qubits];
        for (i, amp) in self.amplitudes.iter().enumerate() {
            let p = amp.norm_sqr();
            for (q, slot) in acc.iter_mut().enumerate() {
                if i & (1 << (self.n_qubits - 1 - q)) == 0 {
                    *slot += p;
                } else {
                    *slot -= p;
                }
            }
        }
        acc
    }
}
