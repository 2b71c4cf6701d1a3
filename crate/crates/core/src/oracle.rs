//! Exact density-matrix evolution for small registers.
//!
//! `rho` is stored as a vector on `2N` qubits with `rho[r, c]` at index
//! `r | c << N`, so `U rho U^dag` is `U` on the low half and `conj(U)` on the
//! high half, reusing the statevector kernels.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::NoiseChannel;
use crate::circuits::{InitialState, NoisyCircuit, Quantity};
use crate::error::{Error, Result};
use crate::pauli::{enumerate_strings, PauliString};
use crate::state::{Observable, StateVector};

pub const MAX_ORACLE_QUBITS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    vec: StateVector,
    n: usize,
}

fn conj(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    m.map(|v| v.conj())
}

impl DensityMatrix {
    fn check_size(n: usize) -> Result<()> {
        if n == 0 || n > MAX_ORACLE_QUBITS {
            return Err(Error::Capacity(format!(
                "density matrix on {n} qubits (limit {MAX_ORACLE_QUBITS})"
            )));
        }
        Ok(())
    }

    /// `|psi><psi|`.
    pub fn from_state(psi: &StateVector) -> Result<Self> {
        let n = psi.num_qubits();
        Self::check_size(n)?;
        let dim = 1usize << n;
        let a = psi.amplitudes();
        let mut amps = Vec::with_capacity(dim * dim);
        for c in 0..dim {
            for r in 0..dim {
                amps.push(a[r] * a[c].conj());
            }
        }
        Ok(Self {
            vec: StateVector::from_amplitudes(amps)?,
            n,
        })
    }

    pub fn from_dmatrix(m: &DMatrix<Complex64>) -> Result<Self> {
        let dim = m.nrows();
        if dim < 2 || !dim.is_power_of_two() || m.ncols() != dim {
            return Err(Error::Dimension(format!("{}x{} density matrix", m.nrows(), m.ncols())));
        }
        let n = dim.trailing_zeros() as usize;
        Self::check_size(n)?;
        let mut amps = Vec::with_capacity(dim * dim);
        for c in 0..dim {
            for r in 0..dim {
                amps.push(m[(r, c)]);
            }
        }
        Ok(Self {
            vec: StateVector::from_amplitudes(amps)?,
            n,
        })
    }

    pub fn prepare(initial: InitialState, n: usize) -> Result<Self> {
        Self::check_size(n)?;
        Self::from_state(&initial.prepare(n, MAX_ORACLE_QUBITS)?)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn entry(&self, r: usize, c: usize) -> Complex64 {
        self.vec.amplitudes()[r | (c << self.n)]
    }

    pub fn to_dmatrix(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.n;
        DMatrix::from_fn(dim, dim, |r, c| self.entry(r, c))
    }

    pub fn trace(&self) -> Complex64 {
        (0..1usize << self.n).map(|i| self.entry(i, i)).sum()
    }

    /// `K rho K^dag` for any (not necessarily unitary) `K` on `qubits`.
    pub fn conjugate(&mut self, k: &DMatrix<Complex64>, qubits: &[usize]) -> Result<()> {
        let high: Vec<usize> = qubits.iter().map(|q| q + self.n).collect();
        if qubits.iter().any(|&q| q >= self.n) {
            return Err(Error::Dimension(format!("qubits {qubits:?} on {} qubits", self.n)));
        }
        self.vec.apply_gate(k, qubits)?;
        self.vec.apply_gate(&conj(k), &high)
    }

    pub fn apply_unitary(&mut self, u: &DMatrix<Complex64>, qubits: &[usize]) -> Result<()> {
        self.conjugate(u, qubits)
    }

    /// `rho <- sum_q w_q M_q rho M_q^dag` on the channel's support.
    pub fn apply_channel(&mut self, channel: &NoiseChannel) -> Result<()> {
        let kraus = channel.kraus_operators()?;
        let mut acc = vec![Complex64::new(0.0, 0.0); self.vec.amplitudes().len()];
        let mut work = self.clone();
        for (w, m) in &kraus {
            work.vec.copy_from(&self.vec);
            work.conjugate(m, &channel.support)?;
            for (a, v) in acc.iter_mut().zip(work.vec.amplitudes()) {
                *a += *w * v;
            }
        }
        self.vec = StateVector::from_amplitudes(acc)?;
        Ok(())
    }

    /// `tr(rho P)` for a full-register Pauli string.
    pub fn pauli_expectation(&self, p: &PauliString) -> Result<Complex64> {
        if p.num_qubits() != self.n {
            return Err(Error::Dimension(format!(
                "{}-qubit string on {}-qubit density matrix",
                p.num_qubits(),
                self.n
            )));
        }
        // tr(rho P) = sum_i rho[i, j] <j|P|i> with P|i> = phase |j>
        Ok((0..1u64 << self.n)
            .map(|i| {
                let (j, phase) = p.apply_to_basis(i);
                self.entry(i as usize, j as usize) * phase
            })
            .sum())
    }

    pub fn expectation(&self, obs: &Observable) -> Result<f64> {
        Ok(match obs {
            Observable::PauliSum(terms) => terms.iter().try_fold(0.0, |acc, (c, p)| {
                Ok::<_, Error>(acc + c * self.pauli_expectation(p)?.re)
            })?,
            Observable::SectorProjector { total_z } => {
                let n = self.n as i64;
                (0..1usize << self.n)
                    .filter(|i| n - 2 * i.count_ones() as i64 == *total_z)
                    .map(|i| self.entry(i, i).re)
                    .sum()
            }
        })
    }

    /// Diagonal of `rho`.
    pub fn probabilities(&self) -> Vec<f64> {
        (0..1usize << self.n).map(|i| self.entry(i, i).re).collect()
    }

    /// Reduced state of qubits `0..k`.
    pub fn reduced(&self, k: usize) -> Result<DMatrix<Complex64>> {
        if k == 0 || k > self.n {
            return Err(Error::Dimension(format!("reduction to {k} of {} qubits", self.n)));
        }
        let da = 1usize << k;
        let db = 1usize << (self.n - k);
        Ok(DMatrix::from_fn(da, da, |a, a2| {
            (0..db).map(|b| self.entry(a | (b << k), a2 | (b << k))).sum()
        }))
    }

    /// Von Neumann entropy of qubits `0..k`.
    pub fn bipartite_entropy(&self, k: usize) -> Result<f64> {
        if k == 0 || k >= self.n {
            return Err(Error::Dimension(format!("entropy cut {k} on {} qubits", self.n)));
        }
        let eig = self.reduced(k)?.symmetric_eigenvalues();
        Ok(eig.iter().filter(|&&p| p > 1e-300).map(|p| -p * p.ln()).sum())
    }

    /// `max |rho - rho^dag|` entrywise.
    pub fn hermiticity_residual(&self) -> f64 {
        let dim = 1usize << self.n;
        let mut worst = 0.0f64;
        for r in 0..dim {
            for c in r..dim {
                worst = worst.max((self.entry(r, c) - self.entry(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = self.to_dmatrix();
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().fold(f64::INFINITY, |a, b| a.min(*b))
    }
}

/// Exact values `[record point][quantity]` of a noisy circuit.
pub fn evolve_circuit_dm(circuit: &NoisyCircuit) -> Result<Vec<Vec<f64>>> {
    circuit.validate()?;
    let mut rho = DensityMatrix::prepare(circuit.initial, circuit.num_qubits)?;
    let mut out = Vec::with_capacity(circuit.record_points.len());
    let mut record = circuit.record_points.iter().peekable();
    let snapshot = |rho: &DensityMatrix, out: &mut Vec<Vec<f64>>| -> Result<()> {
        out.push(
            circuit
                .quantities
                .iter()
                .map(|q| match q {
                    Quantity::Observable { observable, .. } => rho.expectation(observable),
                    Quantity::Entropy { cut, .. } => rho.bipartite_entropy(*cut),
                })
                .collect::<Result<_>>()?,
        );
        Ok(())
    };
    while record.next_if_eq(&&0).is_some() {
        snapshot(&rho, &mut out)?;
    }
    for (i, op) in circuit.ops.iter().enumerate() {
        rho.apply_unitary(&op.gate.matrix(op.angle).to_dmatrix(), &op.qubits)?;
        if let Some(ch) = &op.noise {
            rho.apply_channel(ch)?;
        }
        while record.next_if_eq(&&(i + 1)).is_some() {
            snapshot(&rho, &mut out)?;
        }
    }
    Ok(out)
}

/// Final density matrix of a circuit.
pub fn final_density_matrix(circuit: &NoisyCircuit) -> Result<DensityMatrix> {
    circuit.validate()?;
    let mut rho = DensityMatrix::prepare(circuit.initial, circuit.num_qubits)?;
    for op in &circuit.ops {
        rho.apply_unitary(&op.gate.matrix(op.angle).to_dmatrix(), &op.qubits)?;
        if let Some(ch) = &op.noise {
            rho.apply_channel(ch)?;
        }
    }
    Ok(rho)
}

/// Pauli transfer matrix `R[i][j] = tr(P_i E(P_j)) / 2^M` of the map
/// `E(rho) = sum w K rho K^dag`, in [`enumerate_strings`] order.
pub fn pauli_transfer_matrix(
    kraus: &[(f64, DMatrix<Complex64>)],
    num_qubits: usize,
) -> Result<DMatrix<f64>> {
    let strings = enumerate_strings(num_qubits)?;
    let mats: Vec<DMatrix<Complex64>> = strings.iter().map(|s| s.to_matrix()).collect();
    let d = strings.len();
    let norm = (1usize << num_qubits) as f64;
    let mut out = DMatrix::zeros(d, d);
    for (j, pj) in mats.iter().enumerate() {
        let mut image = DMatrix::<Complex64>::zeros(pj.nrows(), pj.ncols());
        for (w, k) in kraus {
            image += k * pj * k.adjoint() * Complex64::new(*w, 0.0);
        }
        for (i, pi) in mats.iter().enumerate() {
            out[(i, j)] = (pi * &image).trace().re / norm;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelKind;
    use crate::circuits::{build_toy_model, GateKind};
    use crate::pauli::Pauli;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rho(n: usize, seed: u64) -> DensityMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = 1 << n;
        let a = DMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let m = &a * a.adjoint();
        let tr = m.trace();
        DensityMatrix::from_dmatrix(&(m / tr)).unwrap()
    }

    #[test]
    fn unitary_examples() {
        let mut rho = DensityMatrix::from_state(&StateVector::zero(1).unwrap()).unwrap();
        let x = PauliString::single(1, 0, Pauli::X).to_matrix();
        rho.apply_unitary(&x, &[0]).unwrap();
        assert_eq!(rho.entry(1, 1).re, 1.0);
        assert_eq!(rho.entry(0, 0).re, 0.0);

        let mut rho = random_rho(3, 1);
        let before = rho.clone();
        rho.apply_unitary(&DMatrix::identity(4, 4), &[0, 2]).unwrap();
        assert_eq!(rho, before);
        let u = GateKind::Rxx.matrix(0.37).to_dmatrix();
        rho.apply_unitary(&u, &[2, 0]).unwrap();
        assert!((rho.trace() - 1.0).norm() < 1e-13);
        assert!(rho.hermiticity_residual() < 1e-13);
        // agrees with dense U rho U^dag
        let full = {
            let mut psi_basis = DMatrix::<Complex64>::zeros(8, 8);
            for c in 0..8 {
                let mut amps = vec![Complex64::new(0.0, 0.0); 8];
                amps[c] = 1.0.into();
                let mut s = StateVector::from_amplitudes(amps).unwrap();
                s.apply_gate(&u, &[2, 0]).unwrap();
                psi_basis.set_column(c, &nalgebra::DVector::from_vec(s.amplitudes().to_vec()));
            }
            psi_basis
        };
        let want = &full * before.to_dmatrix() * full.adjoint();
        assert!((rho.to_dmatrix() - want).norm() < 1e-13);
    }

    #[test]
    fn channel_examples() {
        let zero = DensityMatrix::from_state(&StateVector::zero(1).unwrap()).unwrap();
        let mut rho = zero.clone();
        rho.apply_channel(&NoiseChannel::depolarizing(0.0, vec![0])).unwrap();
        assert_eq!(rho, zero);

        let one = DensityMatrix::from_state(&StateVector::basis(1, 1).unwrap()).unwrap();
        let mut rho = one.clone();
        rho.apply_channel(&NoiseChannel::amplitude_damping(1.0, 0)).unwrap();
        assert!((rho.entry(0, 0).re - 1.0).abs() < 1e-15 && rho.entry(1, 1).re.abs() < 1e-15);

        let q = 0.2;
        let mut rho = zero.clone();
        let x = PauliString::single(1, 0, Pauli::X);
        rho.apply_channel(&NoiseChannel::single_pauli(x, q, vec![0])).unwrap();
        assert!((rho.entry(0, 0).re - (1.0 - q)).abs() < 1e-15);
        assert!((rho.entry(1, 1).re - q).abs() < 1e-15);
    }

    #[test]
    fn channels_preserve_trace_and_hermiticity() {
        let channels = [
            NoiseChannel::depolarizing(0.3, vec![2, 0]),
            NoiseChannel::amplitude_damping(0.4, 1),
            NoiseChannel::coherent("XY".parse().unwrap(), 0.3, 0.2, vec![0, 1]),
        ];
        for ch in channels {
            let mut rho = random_rho(3, 5);
            rho.apply_channel(&ch).unwrap();
            assert!((rho.trace() - 1.0).norm() < 1e-12);
            assert!(rho.hermiticity_residual() < 1e-12);
            assert!(rho.min_eigenvalue() > -1e-10);
        }
    }

    #[test]
    fn toy_model_closed_form() {
        let c = build_toy_model(0.01, 50).unwrap();
        let v = evolve_circuit_dm(&c).unwrap();
        let want = 0.98f64.powi(50);
        assert!((v[0][0] - want).abs() < 1e-12);
        assert!((want - 0.36417).abs() < 1e-5);
    }

    #[test]
    fn entropy_of_bell_pair() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = StateVector::from_amplitudes(vec![s.into(), 0.0.into(), 0.0.into(), s.into()]).unwrap();
        let rho = DensityMatrix::from_state(&bell).unwrap();
        assert!((rho.bipartite_entropy(1).unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn capacity_limit() {
        assert!(matches!(
            DensityMatrix::prepare(InitialState::Plus, 13),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn transfer_matrix_of_depolarizing() {
        let eps = 0.1;
        let ch = NoiseChannel {
            kind: ChannelKind::Depolarizing { epsilon: eps },
            support: vec![0],
        };
        let r = pauli_transfer_matrix(&ch.kraus_operators().unwrap(), 1).unwrap();
        let want = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0 - eps, 1.0 - eps, 1.0 - eps]));
        assert!((r - want).norm() < 1e-15);
    }
}
