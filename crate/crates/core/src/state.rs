//! Dense statevector with in-place gate kernels.
//!
//! Amplitude index bit `q` holds qubit `q`. Text bitstrings are written
//! with qubit 0 leftmost, matching the Pauli text form.

use nalgebra::DMatrix;
use num_complex::Complex64;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::PauliString;

/// Default cap on statevector size (2^26 amplitudes = 1 GiB).
pub const DEFAULT_MAX_QUBITS: usize = 26;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Inserts a zero bit at position `bit` of `r`.
#[inline(always)]
fn insert_zero(r: usize, bit: usize) -> usize {
    let low = r & ((1usize << bit) - 1);
    ((r >> bit) << (bit + 1)) | low
}

/// Parses a bitstring with qubit 0 leftmost into an amplitude index.
pub fn bitstring_to_index(bits: &str) -> Result<u64> {
    if bits.len() > 64 {
        return Err(Error::Parse(format!("bitstring {bits:?} longer than 64")));
    }
    bits.chars().enumerate().try_fold(0u64, |acc, (j, c)| match c {
        '0' => Ok(acc),
        '1' => Ok(acc | (1 << j)),
        other => Err(Error::Parse(format!("invalid bit {other:?} in {bits:?}"))),
    })
}

/// Inverse of [`bitstring_to_index`].
pub fn index_to_bitstring(index: u64, num_qubits: usize) -> String {
    (0..num_qubits)
        .map(|j| if (index >> j) & 1 == 1 { '1' } else { '0' })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
    num_qubits: usize,
}

impl StateVector {
    /// `|0...0>` on `num_qubits` qubits, subject to [`DEFAULT_MAX_QUBITS`].
    pub fn zero(num_qubits: usize) -> Result<Self> {
        Self::zero_with_limit(num_qubits, DEFAULT_MAX_QUBITS)
    }

    pub fn zero_with_limit(num_qubits: usize, max_qubits: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > max_qubits || num_qubits >= 64 {
            return Err(Error::Capacity(format!(
                "statevector on {num_qubits} qubits (cap {max_qubits})"
            )));
        }
        let mut amps = vec![ZERO; 1 << num_qubits];
        amps[0] = ONE;
        Ok(Self { amps, num_qubits })
    }

    pub fn basis(num_qubits: usize, index: u64) -> Result<Self> {
        let mut s = Self::zero(num_qubits)?;
        if index >= s.amps.len() as u64 {
            return Err(Error::Dimension(format!(
                "basis index {index} for {num_qubits} qubits"
            )));
        }
        s.amps[0] = ZERO;
        s.amps[index as usize] = ONE;
        Ok(s)
    }

    /// `|+...+>`.
    pub fn plus(num_qubits: usize) -> Result<Self> {
        let mut s = Self::zero(num_qubits)?;
        let a = Complex64::new((s.amps.len() as f64).sqrt().recip(), 0.0);
        s.amps.iter_mut().for_each(|x| *x = a);
        Ok(s)
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Dimension(format!(
                "amplitude vector of length {len} is not 2^N with N >= 1"
            )));
        }
        Ok(Self {
            num_qubits: len.trailing_zeros() as usize,
            amps,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Copies `other` into `self` without reallocating.
    pub fn copy_from(&mut self, other: &StateVector) {
        self.num_qubits = other.num_qubits;
        self.amps.clear();
        self.amps.extend_from_slice(&other.amps);
    }

    pub fn scale(&mut self, factor: f64) {
        self.amps.iter_mut().for_each(|a| *a *= factor);
    }

    fn check_qubits(&self, qubits: &[usize]) -> Result<()> {
        for (j, &q) in qubits.iter().enumerate() {
            if q >= self.num_qubits {
                return Err(Error::Dimension(format!(
                    "qubit {q} out of range for {} qubits",
                    self.num_qubits
                )));
            }
            if qubits[..j].contains(&q) {
                return Err(Error::Dimension(format!("repeated qubit {q}")));
            }
        }
        Ok(())
    }

    /// Applies an arbitrary (possibly non-unitary) `2^k x 2^k` matrix to
    /// `qubits`. Local index bit `j` corresponds to `qubits[j]`.
    pub fn apply_gate(&mut self, matrix: &DMatrix<Complex64>, qubits: &[usize]) -> Result<()> {
        self.check_qubits(qubits)?;
        let dim = 1usize << qubits.len();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::Dimension(format!(
                "{}x{} matrix on {} qubits",
                matrix.nrows(),
                matrix.ncols(),
                qubits.len()
            )));
        }
        match qubits.len() {
            1 => {
                let m = [matrix[(0, 0)], matrix[(0, 1)], matrix[(1, 0)], matrix[(1, 1)]];
                self.apply_1q(&m, qubits[0]);
            }
            2 => {
                let mut m = [ZERO; 16];
                for r in 0..4 {
                    for c in 0..4 {
                        m[4 * r + c] = matrix[(r, c)];
                    }
                }
                self.apply_2q(&m, qubits[0], qubits[1]);
            }
            _ => self.apply_kq(matrix, qubits),
        }
        Ok(())
    }

    /// Row-major 2x2 kernel. Caller guarantees `q` is in range.
    pub fn apply_1q(&mut self, m: &[Complex64; 4], q: usize) {
        let stride = 1usize << q;
        for r in 0..self.amps.len() / 2 {
            let i0 = insert_zero(r, q);
            let i1 = i0 | stride;
            let (a0, a1) = (self.amps[i0], self.amps[i1]);
            self.amps[i0] = m[0] * a0 + m[1] * a1;
            self.amps[i1] = m[2] * a0 + m[3] * a1;
        }
    }

    /// Row-major 4x4 kernel; local bit 0 is `q0`, local bit 1 is `q1`.
    pub fn apply_2q(&mut self, m: &[Complex64; 16], q0: usize, q1: usize) {
        let (lo, hi) = if q0 < q1 { (q0, q1) } else { (q1, q0) };
        let (s0, s1) = (1usize << q0, 1usize << q1);
        for r in 0..self.amps.len() / 4 {
            let base = insert_zero(insert_zero(r, lo), hi);
            let idx = [base, base | s0, base | s1, base | s0 | s1];
            let v = [
                self.amps[idx[0]],
                self.amps[idx[1]],
                self.amps[idx[2]],
                self.amps[idx[3]],
            ];
            for row in 0..4 {
                let m = &m[4 * row..4 * row + 4];
                self.amps[idx[row]] = m[0] * v[0] + m[1] * v[1] + m[2] * v[2] + m[3] * v[3];
            }
        }
    }

    /// Diagonal single-qubit kernel.
    pub fn apply_diag_1q(&mut self, d: &[Complex64; 2], q: usize) {
        for (i, a) in self.amps.iter_mut().enumerate() {
            *a *= d[(i >> q) & 1];
        }
    }

    /// Diagonal two-qubit kernel; local bit 0 is `q0`.
    pub fn apply_diag_2q(&mut self, d: &[Complex64; 4], q0: usize, q1: usize) {
        for (i, a) in self.amps.iter_mut().enumerate() {
            *a *= d[((i >> q0) & 1) | (((i >> q1) & 1) << 1)];
        }
    }

    fn apply_kq(&mut self, matrix: &DMatrix<Complex64>, qubits: &[usize]) {
        let k = qubits.len();
        let dim = 1usize << k;
        let mut sorted = qubits.to_vec();
        sorted.sort_unstable();
        let offsets: Vec<usize> = (0..dim)
            .map(|local| {
                qubits
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| (local >> j) & 1 == 1)
                    .map(|(_, &q)| 1usize << q)
                    .sum()
            })
            .collect();
        let mut buf = vec![ZERO; dim];
        for r in 0..self.amps.len() >> k {
            let base = sorted.iter().fold(r, |acc, &q| insert_zero(acc, q));
            for (b, off) in buf.iter_mut().zip(&offsets) {
                *b = self.amps[base | off];
            }
            for (row, off) in offsets.iter().enumerate() {
                let mut acc = ZERO;
                for (col, b) in buf.iter().enumerate() {
                    acc += matrix[(row, col)] * b;
                }
                self.amps[base | off] = acc;
            }
        }
    }

    /// Applies a full-register Pauli string.
    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<()> {
        self.check_register(p)?;
        let (x, z) = (p.x_bits() as usize, p.z_bits() as usize);
        let y_phase = crate::pauli::phase_i_pow(p.y_count());
        let sign = |i: usize| if (i & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        if x == 0 {
            for (i, a) in self.amps.iter_mut().enumerate() {
                *a *= sign(i);
            }
            return Ok(());
        }
        for i in 0..self.amps.len() {
            let j = i ^ x;
            if i < j {
                let (ai, aj) = (self.amps[i], self.amps[j]);
                // P|i> = y_phase * sign(i) |j>
                self.amps[j] = y_phase * sign(i) * ai;
                self.amps[i] = y_phase * sign(j) * aj;
            }
        }
        Ok(())
    }

    fn check_register(&self, p: &PauliString) -> Result<()> {
        if p.num_qubits() != self.num_qubits {
            return Err(Error::Dimension(format!(
                "{}-qubit Pauli string on {}-qubit state",
                p.num_qubits(),
                self.num_qubits
            )));
        }
        Ok(())
    }

    /// `state <- (cos(theta) Id + i sin(theta) S) state` for the local string
    /// `s` placed on `qubits`.
    pub fn apply_pauli_rotation(
        &mut self,
        s: &PauliString,
        qubits: &[usize],
        theta: f64,
    ) -> Result<()> {
        let full = s.embed(qubits, self.num_qubits)?;
        self.apply_pauli_rotation_full(&full, theta)
    }

    /// Rotation `exp(i theta P)` for a full-register string `P`.
    pub fn apply_pauli_rotation_full(&mut self, p: &PauliString, theta: f64) -> Result<()> {
        self.check_register(p)?;
        let (c, s) = (theta.cos(), theta.sin());
        let (x, z) = (p.x_bits() as usize, p.z_bits() as usize);
        if x == 0 {
            let plus = Complex64::new(c, s);
            let minus = Complex64::new(c, -s);
            for (i, a) in self.amps.iter_mut().enumerate() {
                *a *= if (i & z).count_ones() % 2 == 0 { plus } else { minus };
            }
            return Ok(());
        }
        let is = Complex64::new(0.0, s) * crate::pauli::phase_i_pow(p.y_count());
        let sign = |i: usize| if (i & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        for i in 0..self.amps.len() {
            let j = i ^ x;
            if i < j {
                let (ai, aj) = (self.amps[i], self.amps[j]);
                self.amps[i] = c * ai + is * sign(j) * aj;
                self.amps[j] = c * aj + is * sign(i) * ai;
            }
        }
        Ok(())
    }

    /// `<psi|P|psi>` for a full-register Pauli string, not normalized.
    pub fn pauli_expectation(&self, p: &PauliString) -> Result<Complex64> {
        self.check_register(p)?;
        let mut acc = ZERO;
        for (i, a) in self.amps.iter().enumerate() {
            let (j, phase) = p.apply_to_basis(i as u64);
            acc += self.amps[j as usize].conj() * phase * a;
        }
        Ok(acc)
    }

    /// `<psi|O|psi>` without dividing by `<psi|psi>`.
    pub fn expectation(&self, obs: &Observable) -> Result<f64> {
        Ok(self.expectation_complex(obs)?.re)
    }

    /// Like [`expectation`](Self::expectation) but keeps the imaginary part,
    /// which vanishes for Hermitian observables.
    pub fn expectation_complex(&self, obs: &Observable) -> Result<Complex64> {
        match obs {
            Observable::PauliSum(terms) => terms.iter().try_fold(ZERO, |acc, (c, p)| {
                Ok(acc + *c * self.pauli_expectation(p)?)
            }),
            Observable::SectorProjector { total_z } => {
                let n = self.num_qubits as i64;
                Ok(Complex64::new(
                    self.amps
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| n - 2 * i.count_ones() as i64 == *total_z)
                        .map(|(_, a)| a.norm_sqr())
                        .sum(),
                    0.0,
                ))
            }
        }
    }

    fn require_normalized(&self) -> Result<()> {
        let norm = self.norm_sqr();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Contract(format!(
                "state norm^2 is {norm}, expected 1 within 1e-9"
            )));
        }
        Ok(())
    }

    pub fn bitstring_probability(&self, index: u64) -> Result<f64> {
        self.require_normalized()?;
        self.amps
            .get(index as usize)
            .map(|a| a.norm_sqr())
            .ok_or_else(|| Error::Dimension(format!("bitstring index {index}")))
    }

    /// All `2^N` probabilities `|amplitude|^2`.
    pub fn probabilities(&self) -> Result<Vec<f64>> {
        self.require_normalized()?;
        Ok(self.amps.iter().map(|a| a.norm_sqr()).collect())
    }

    /// The `k` most likely bitstrings, descending; ties by lower index.
    pub fn top_k_probabilities(&self, k: usize) -> Result<Vec<(u64, f64)>> {
        Ok(top_k(&self.probabilities()?, k))
    }

    /// Von Neumann entropy (natural log) of qubits `0..k`.
    pub fn bipartite_entropy(&self, k: usize) -> Result<f64> {
        if k == 0 || k >= self.num_qubits {
            return Err(Error::Dimension(format!(
                "entropy cut {k} outside [1, {}]",
                self.num_qubits - 1
            )));
        }
        self.require_normalized()?;
        let rows = 1usize << k;
        let cols = 1usize << (self.num_qubits - k);
        let a = DMatrix::from_fn(rows, cols, |r, c| self.amps[r + (c << k)]);
        let sv = a.singular_values();
        let total: f64 = sv.iter().map(|s| s * s).sum();
        Ok(sv
            .iter()
            .map(|s| s * s / total)
            .filter(|&p| p > 1e-300)
            .map(|p| -p * p.ln())
            .sum())
    }
}

/// Indices of the `k` largest entries, descending; ties broken by index.
pub fn top_k(probs: &[f64], k: usize) -> Vec<(u64, f64)> {
    let mut idx: Vec<usize> = (0..probs.len()).collect();
    let cmp = |a: &usize, b: &usize| probs[*b].total_cmp(&probs[*a]).then(a.cmp(b));
    let k = k.min(probs.len());
    if k < idx.len() && k > 0 {
        idx.select_nth_unstable_by(k - 1, cmp);
        idx.truncate(k);
    }
    idx.sort_by(cmp);
    idx.truncate(k);
    idx.into_iter().map(|i| (i as u64, probs[i])).collect()
}

/// Observables evaluated on trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// `sum_k c_k P_k` with full-register strings.
    PauliSum(Vec<(f64, PauliString)>),
    /// Projector onto computational states with `sum_j Z_j = total_z`.
    SectorProjector { total_z: i64 },
}

impl Observable {
    /// `S_x = (1/N) sum_j X_j`.
    pub fn magnetization_x(num_qubits: usize) -> Self {
        Self::uniform_single_site(num_qubits, crate::pauli::Pauli::X, |_| 1.0)
    }

    /// `(1/N) sum_j Z_j`.
    pub fn magnetization_z(num_qubits: usize) -> Self {
        Self::uniform_single_site(num_qubits, crate::pauli::Pauli::Z, |_| 1.0)
    }

    /// Staggered magnetization `(1/N) sum_j (-1)^j Z_j`; qubit 0 carries `+1`.
    pub fn staggered_z(num_qubits: usize) -> Self {
        Self::uniform_single_site(num_qubits, crate::pauli::Pauli::Z, |j| {
            if j % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        })
    }

    fn uniform_single_site(
        n: usize,
        p: crate::pauli::Pauli,
        sign: impl Fn(usize) -> f64,
    ) -> Self {
        let c = 1.0 / n as f64;
        Observable::PauliSum(
            (0..n)
                .map(|j| (sign(j) * c, PauliString::single(n, j, p)))
                .collect(),
        )
    }

    /// Largest qubit count this observable needs, if it is tied to one.
    pub fn register_size(&self) -> Option<usize> {
        match self {
            Observable::PauliSum(t) => t.first().map(|(_, p)| p.num_qubits()),
            Observable::SectorProjector { .. } => None,
        }
    }
}
