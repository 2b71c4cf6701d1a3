//! Helpers shared by the integration tests. Dense reference arithmetic here
//! is built from Kronecker products and does not go through the crate's
//! kernels.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use noisy_traj::channel::PauliMap;
use noisy_traj::circuits::{GateKind, InitialState, NoisyCircuit};
use noisy_traj::oracle::pauli_transfer_matrix;
use noisy_traj::pauli::{enumerate_strings, PauliString};

pub type C = Complex64;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn pauli_2x2(p: char) -> DMatrix<C> {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    match p {
        'I' => DMatrix::from_row_slice(2, 2, &[o, z, z, o]),
        'X' => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        'Y' => DMatrix::from_row_slice(2, 2, &[z, c(0.0, -1.0), c(0.0, 1.0), z]),
        'Z' => DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        _ => panic!("bad pauli {p}"),
    }
}

/// Full `2^n` operator with `locals[j]` on qubit `j`; qubit 0 is the least
/// significant amplitude bit, so it is the rightmost Kronecker factor.
pub fn kron_all(locals: &[DMatrix<C>]) -> DMatrix<C> {
    let mut out = DMatrix::from_element(1, 1, c(1.0, 0.0));
    for m in locals.iter().rev() {
        out = out.kronecker(m);
    }
    out
}

pub fn full_pauli(n: usize, on: &[(usize, char)]) -> DMatrix<C> {
    let mut locals = vec![pauli_2x2('I'); n];
    for &(q, p) in on {
        locals[q] = pauli_2x2(p);
    }
    kron_all(&locals)
}

fn full_gate(n: usize, gate: GateKind, qubits: &[usize], angle: f64) -> DMatrix<C> {
    let p = match gate {
        GateKind::Rx | GateKind::Rxx => 'X',
        GateKind::Ry | GateKind::Ryy => 'Y',
        GateKind::Rz | GateKind::Rzz => 'Z',
        GateKind::H => {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let mut locals = vec![pauli_2x2('I'); n];
            locals[qubits[0]] = (pauli_2x2('X') + pauli_2x2('Z')) * c(h, 0.0);
            return kron_all(&locals);
        }
    };
    let on: Vec<(usize, char)> = qubits.iter().map(|&q| (q, p)).collect();
    let id = DMatrix::<C>::identity(1 << n, 1 << n);
    id * c(angle.cos(), 0.0) + full_pauli(n, &on) * c(0.0, angle.sin())
}

pub fn initial_vector(n: usize, init: InitialState) -> DVector<C> {
    let dim = 1 << n;
    match init {
        InitialState::Plus => DVector::from_element(dim, c((1.0 / dim as f64).sqrt(), 0.0)),
        InitialState::Basis(i) => {
            let mut v = DVector::zeros(dim);
            v[i as usize] = c(1.0, 0.0);
            v
        }
    }
}

/// Noiseless dense evolution; the state at every record point.
pub fn dense_states(circuit: &NoisyCircuit) -> Vec<DVector<C>> {
    let n = circuit.num_qubits;
    let mut psi = initial_vector(n, circuit.initial);
    let mut out = Vec::new();
    for _ in circuit.record_points.iter().filter(|&&p| p == 0) {
        out.push(psi.clone());
    }
    for (i, op) in circuit.ops.iter().enumerate() {
        psi = full_gate(n, op.gate, &op.qubits, op.angle) * psi;
        for _ in circuit.record_points.iter().filter(|&&p| p == i + 1) {
            out.push(psi.clone());
        }
    }
    out
}

pub fn dense_expectation(psi: &DVector<C>, op: &DMatrix<C>) -> f64 {
    (psi.adjoint() * op * psi)[(0, 0)].re
}

/// Von Neumann entropy of the first `k` qubits, from the reduced density
/// matrix rather than singular values.
pub fn dense_entropy(psi: &DVector<C>, k: usize) -> f64 {
    let da = 1 << k;
    let db = psi.len() / da;
    let rho = DMatrix::from_fn(da, da, |a, b| {
        (0..db).map(|j| psi[a + da * j] * psi[b + da * j].conj()).sum::<C>()
    });
    rho.symmetric_eigenvalues()
        .iter()
        .filter(|&&l| l > 1e-15)
        .map(|&l| -l * l.ln())
        .sum()
}

/// Random Pauli map on `m` qubits with non-identity mass `total`.
pub fn random_pauli_map(m: usize, total: f64, rng: &mut ChaCha8Rng) -> PauliMap {
    let strings = enumerate_strings(m).unwrap();
    let w: Vec<f64> = (1..strings.len()).map(|_| rng.random::<f64>()).collect();
    let norm: f64 = w.iter().sum();
    let mut map = PauliMap::new();
    map.insert(strings[0], 1.0 - total);
    for (s, wi) in strings[1..].iter().zip(w) {
        map.insert(*s, total * wi / norm);
    }
    map
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Transfer matrix of `rho -> (1-q) rho + q S rho S`.
pub fn single_string_ptm(s: &PauliString, q: f64) -> DMatrix<f64> {
    let m = s.num_qubits();
    let id = PauliString::identity(m);
    pauli_transfer_matrix(&[(1.0 - q, id.to_matrix()), (q, s.to_matrix())], m).unwrap()
}

pub fn pauli_map_ptm(p: &PauliMap) -> DMatrix<f64> {
    let m = p.keys().next().unwrap().num_qubits();
    let kraus: Vec<(f64, DMatrix<C>)> = p.iter().map(|(s, w)| (*w, s.to_matrix())).collect();
    pauli_transfer_matrix(&kraus, m).unwrap()
}

/// Product of single-string transfer matrices in the given order.
pub fn composed_ptm(factors: &[(PauliString, f64)], m: usize) -> DMatrix<f64> {
    let d = 1 << (2 * m);
    factors
        .iter()
        .fold(DMatrix::identity(d, d), |acc, (s, q)| single_string_ptm(s, *q) * acc)
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).iter().fold(0.0, |m, v| m.max(v.abs()))
}
