//! Pauli strings in the symplectic `(x, z)` bit encoding.
//!
//! Qubit `j` of a string occupies bit `j` of both masks: `(0,0) = I`,
//! `(1,0) = X`, `(0,1) = Z`, `(1,1) = Y`. Product phases are not tracked.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest register a [`PauliString`] can describe.
pub const MAX_PAULI_QUBITS: usize = 64;

/// Largest `M` accepted by [`enumerate_strings`].
pub const MAX_ENUMERATION_QUBITS: usize = 8;

/// Single-qubit Pauli factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// An `M`-qubit Pauli operator without phase.
///
/// Ordering is lexicographic on `(x_bits, z_bits)`, which is also the
/// enumeration order of [`enumerate_strings`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    x: u64,
    z: u64,
    n: u32,
}

fn mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl PauliString {
    pub fn identity(num_qubits: usize) -> Self {
        assert!(
            (1..=MAX_PAULI_QUBITS).contains(&num_qubits),
            "Pauli strings support 1..=64 qubits"
        );
        Self {
            x: 0,
            z: 0,
            n: num_qubits as u32,
        }
    }

    /// Builds a string from raw masks. Bits above `num_qubits` must be clear.
    pub fn from_bits(x_bits: u64, z_bits: u64, num_qubits: usize) -> Result<Self> {
        if !(1..=MAX_PAULI_QUBITS).contains(&num_qubits) {
            return Err(Error::Capacity(format!(
                "Pauli string on {num_qubits} qubits (supported: 1..={MAX_PAULI_QUBITS})"
            )));
        }
        let m = mask(num_qubits);
        if x_bits & !m != 0 || z_bits & !m != 0 {
            return Err(Error::Dimension(format!(
                "bits set beyond qubit {} in ({x_bits:#x}, {z_bits:#x})",
                num_qubits - 1
            )));
        }
        Ok(Self {
            x: x_bits,
            z: z_bits,
            n: num_qubits as u32,
        })
    }

    /// A string with `p` on `qubit` and identity elsewhere.
    pub fn single(num_qubits: usize, qubit: usize, p: Pauli) -> Self {
        assert!(qubit < num_qubits);
        let (x, z) = p.bits();
        let mut s = Self::identity(num_qubits);
        s.x = (x as u64) << qubit;
        s.z = (z as u64) << qubit;
        s
    }

    pub fn from_paulis(paulis: &[Pauli]) -> Self {
        let mut s = Self::identity(paulis.len());
        for (j, p) in paulis.iter().enumerate() {
            let (x, z) = p.bits();
            s.x |= (x as u64) << j;
            s.z |= (z as u64) << j;
        }
        s
    }

    pub fn x_bits(&self) -> u64 {
        self.x
    }

    pub fn z_bits(&self) -> u64 {
        self.z
    }

    pub fn num_qubits(&self) -> usize {
        self.n as usize
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn get(&self, qubit: usize) -> Pauli {
        Pauli::from_bits((self.x >> qubit) & 1 == 1, (self.z >> qubit) & 1 == 1)
    }

    /// Number of non-identity factors.
    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    /// Number of `Y` factors.
    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// `true` iff the two operators commute.
    pub fn commutes(&self, other: &PauliString) -> Result<bool> {
        if self.n != other.n {
            return Err(Error::Dimension(format!(
                "commutation of {}-qubit and {}-qubit strings",
                self.n, other.n
            )));
        }
        Ok(self.commutes_unchecked(other))
    }

    #[inline]
    pub(crate) fn commutes_unchecked(&self, other: &PauliString) -> bool {
        ((self.x & other.z) ^ (self.z & other.x)).count_ones() % 2 == 0
    }

    /// Product of the two strings with the phase dropped.
    pub fn product(&self, other: &PauliString) -> Result<PauliString> {
        if self.n != other.n {
            return Err(Error::Dimension(format!(
                "product of {}-qubit and {}-qubit strings",
                self.n, other.n
            )));
        }
        Ok(PauliString {
            x: self.x ^ other.x,
            z: self.z ^ other.z,
            n: self.n,
        })
    }

    /// Places this `M`-qubit string onto `qubits` of a `num_qubits` register.
    pub fn embed(&self, qubits: &[usize], num_qubits: usize) -> Result<PauliString> {
        if qubits.len() != self.num_qubits() {
            return Err(Error::Dimension(format!(
                "{}-qubit string placed on {} qubits",
                self.n,
                qubits.len()
            )));
        }
        let mut out = PauliString::from_bits(0, 0, num_qubits)?;
        for (j, &q) in qubits.iter().enumerate() {
            if q >= num_qubits {
                return Err(Error::Dimension(format!(
                    "qubit {q} out of range for {num_qubits} qubits"
                )));
            }
            if out.x & (1 << q) != 0 || out.z & (1 << q) != 0 || qubits[..j].contains(&q) {
                return Err(Error::Dimension(format!("repeated qubit {q}")));
            }
            out.x |= ((self.x >> j) & 1) << q;
            out.z |= ((self.z >> j) & 1) << q;
        }
        Ok(out)
    }

    /// Action on a computational basis state: `P|i> = phase * |j>`.
    ///
    /// Uses `P = i^{#Y} X^x Z^z`, so `phase = i^{#Y} (-1)^{|i & z|}`.
    #[inline]
    pub fn apply_to_basis(&self, index: u64) -> (u64, Complex64) {
        let quarter_turns = 2 * (index & self.z).count_ones() + self.y_count();
        (index ^ self.x, phase_i_pow(quarter_turns))
    }

    /// Dense `2^M x 2^M` matrix, qubit 0 on the least significant index bit.
    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.n;
        let mut m = DMatrix::zeros(dim, dim);
        for col in 0..dim as u64 {
            let (row, phase) = self.apply_to_basis(col);
            m[(row as usize, col as usize)] = phase;
        }
        m
    }
}

/// `i^k`.
#[inline]
pub(crate) fn phase_i_pow(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in 0..self.num_qubits() {
            write!(f, "{}", self.get(j).as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Parses `"XYZI"`-style text, leftmost character = qubit 0.
    fn from_str(s: &str) -> Result<Self> {
        let paulis = s
            .chars()
            .map(|c| match c {
                'I' | 'i' => Ok(Pauli::I),
                'X' | 'x' => Ok(Pauli::X),
                'Y' | 'y' => Ok(Pauli::Y),
                'Z' | 'z' => Ok(Pauli::Z),
                other => Err(Error::Parse(format!(
                    "invalid Pauli character {other:?} in {s:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        if paulis.is_empty() || paulis.len() > MAX_PAULI_QUBITS {
            return Err(Error::Parse(format!("Pauli string {s:?} has bad length")));
        }
        Ok(PauliString::from_paulis(&paulis))
    }
}

impl Serialize for PauliString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// All `4^M` strings on `M` qubits, identity first, ordered by `(x, z)`.
pub fn enumerate_strings(num_qubits: usize) -> Result<Vec<PauliString>> {
    if !(1..=MAX_ENUMERATION_QUBITS).contains(&num_qubits) {
        return Err(Error::Capacity(format!(
            "enumeration of 4^{num_qubits} strings (supported M: 1..={MAX_ENUMERATION_QUBITS})"
        )));
    }
    let side = 1u64 << num_qubits;
    let n = num_qubits as u32;
    Ok((0..side)
        .flat_map(|x| (0..side).map(move |z| PauliString { x, z, n }))
        .collect())
}

/// Strings in `S_M` anticommuting with `s`. The complement is the commutant.
pub fn anticommutant(s: &PauliString) -> Result<Vec<PauliString>> {
    Ok(enumerate_strings(s.num_qubits())?
        .into_iter()
        .filter(|t| !s.commutes_unchecked(t))
        .collect())
}
