//! Small dense operators on one or two qubits, stored inline.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pauli::PauliString;
use crate::state::StateVector;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Row-major `2^k x 2^k` matrix for `k` in `{1, 2}`; local bit `j` is the
/// `j`-th qubit of whatever support it is applied to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalOp {
    k: usize,
    m: [Complex64; 16],
}

impl LocalOp {
    pub fn identity(k: usize) -> Self {
        let mut m = [ZERO; 16];
        let dim = 1 << k;
        for i in 0..dim {
            m[i * dim + i] = ONE;
        }
        Self { k, m }
    }

    pub fn num_qubits(&self) -> usize {
        self.k
    }

    fn dim(&self) -> usize {
        1 << self.k
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.m[r * self.dim() + c]
    }

    pub fn from_dmatrix(matrix: &DMatrix<Complex64>) -> Result<Self> {
        let k = match matrix.nrows() {
            2 => 1,
            4 => 2,
            d => return Err(Error::Dimension(format!("{d}x{d} is not a one- or two-qubit operator"))),
        };
        if matrix.ncols() != matrix.nrows() {
            return Err(Error::Dimension("non-square operator".into()));
        }
        let dim = 1 << k;
        let mut m = [ZERO; 16];
        for r in 0..dim {
            for c in 0..dim {
                m[r * dim + c] = matrix[(r, c)];
            }
        }
        Ok(Self { k, m })
    }

    pub fn to_dmatrix(&self) -> DMatrix<Complex64> {
        let dim = self.dim();
        DMatrix::from_fn(dim, dim, |r, c| self.get(r, c))
    }

    pub fn pauli(s: &PauliString) -> Self {
        let k = s.num_qubits();
        let dim = 1 << k;
        let mut m = [ZERO; 16];
        for c in 0..dim {
            let (r, phase) = s.apply_to_basis(c as u64);
            m[r as usize * dim + c] = phase;
        }
        Self { k, m }
    }

    /// `exp(i theta S) = cos(theta) Id + i sin(theta) S`.
    pub fn pauli_rotation(s: &PauliString, theta: f64) -> Self {
        let (sin, cos) = theta.sin_cos();
        let p = Self::pauli(s);
        let mut out = Self::identity(s.num_qubits());
        for (o, v) in out.m.iter_mut().zip(p.m) {
            *o = *o * cos + v * Complex64::new(0.0, sin);
        }
        out
    }

    /// `self * rhs`.
    pub fn mul(&self, rhs: &LocalOp) -> LocalOp {
        debug_assert_eq!(self.k, rhs.k);
        let dim = self.dim();
        let mut m = [ZERO; 16];
        for r in 0..dim {
            for c in 0..dim {
                let mut acc = ZERO;
                for j in 0..dim {
                    acc += self.m[r * dim + j] * rhs.m[j * dim + c];
                }
                m[r * dim + c] = acc;
            }
        }
        LocalOp { k: self.k, m }
    }

    pub fn scaled(&self, factor: f64) -> LocalOp {
        let mut out = *self;
        out.m.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// `self + c * other`.
    pub fn plus_scaled(&self, other: &LocalOp, c: Complex64) -> LocalOp {
        let mut out = *self;
        for (o, v) in out.m.iter_mut().zip(other.m) {
            *o += c * v;
        }
        out
    }

    pub fn is_diagonal(&self) -> bool {
        let dim = self.dim();
        (0..dim).all(|r| (0..dim).all(|c| r == c || self.m[r * dim + c] == ZERO))
    }

    /// Largest singular value of `self - Id`.
    pub fn identity_deviation(&self) -> f64 {
        let dim = self.dim();
        let d = DMatrix::from_fn(dim, dim, |r, c| {
            self.get(r, c) - if r == c { ONE } else { ZERO }
        });
        d.singular_values().iter().fold(0.0f64, |m, v| m.max(*v))
    }

    /// Applies to `qubits` (length `k`), choosing a diagonal kernel when possible.
    /// Caller guarantees the qubits are distinct and in range.
    pub fn apply(&self, state: &mut StateVector, qubits: &[usize]) {
        debug_assert_eq!(qubits.len(), self.k);
        let diag = self.is_diagonal();
        match (self.k, diag) {
            (1, true) => state.apply_diag_1q(&[self.m[0], self.m[3]], qubits[0]),
            (1, false) => state.apply_1q(&[self.m[0], self.m[1], self.m[2], self.m[3]], qubits[0]),
            (_, true) => state.apply_diag_2q(
                &[self.m[0], self.m[5], self.m[10], self.m[15]],
                qubits[0],
                qubits[1],
            ),
            (_, false) => state.apply_2q(&self.m, qubits[0], qubits[1]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::pauli_rotation_matrix;

    #[test]
    fn matches_dense_construction() {
        for s in ["X", "Y", "Z", "XY", "ZZ", "YI"] {
            let s: PauliString = s.parse().unwrap();
            let op = LocalOp::pauli_rotation(&s, 0.37);
            let dense = pauli_rotation_matrix(&s, 0.37);
            assert!((op.to_dmatrix() - &dense).norm() < 1e-15);
            assert_eq!(LocalOp::from_dmatrix(&dense).unwrap(), op);
            let a = LocalOp::pauli(&s);
            assert!((a.mul(&op).to_dmatrix() - s.to_matrix() * dense).norm() < 1e-14);
        }
    }

    #[test]
    fn identity_deviation_examples() {
        let x: PauliString = "X".parse().unwrap();
        assert!((LocalOp::pauli(&x).identity_deviation() - 2.0).abs() < 1e-14);
        let t = 0.3f64;
        let d = LocalOp::pauli_rotation(&x, t).identity_deviation();
        assert!((d - 2.0 * (t / 2.0).sin().abs()).abs() < 1e-14);
        assert_eq!(LocalOp::identity(2).identity_deviation(), 0.0);
    }

    #[test]
    fn diagonal_kernels_agree_with_general() {
        let zz: PauliString = "ZZ".parse().unwrap();
        let op = LocalOp::pauli_rotation(&zz, 0.4);
        assert!(op.is_diagonal());
        let amps: Vec<Complex64> = (0..8)
            .map(|i| Complex64::new(i as f64 + 1.0, 0.5 - i as f64))
            .collect();
        let mut a = StateVector::from_amplitudes(amps.clone()).unwrap();
        let mut b = StateVector::from_amplitudes(amps).unwrap();
        op.apply(&mut a, &[2, 0]);
        b.apply_gate(&op.to_dmatrix(), &[2, 0]).unwrap();
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!((x - y).norm() < 1e-13);
        }
    }
}
