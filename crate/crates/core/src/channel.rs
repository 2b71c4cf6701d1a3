//! Declarative noise channels and their Kraus realizations.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{enumerate_strings, PauliString};

/// Sparse probability map over Pauli strings; absent strings have probability 0.
pub type PauliMap = BTreeMap<PauliString, f64>;

/// Tolerance on `sum p_S = 1`.
pub const PROBABILITY_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ChannelKind {
    /// `rho -> sum_S p_S S rho S`.
    Pauli { probabilities: PauliMap },
    /// Uniform Pauli channel of strength `epsilon` on the whole support.
    #[serde(alias = "depol")]
    Depolarizing { epsilon: f64 },
    /// `rho -> (1-q) rho + q e^{i alpha A} rho e^{-i alpha A}`.
    Coherent { axis: PauliString, alpha: f64, q: f64 },
    AmplitudeDamping { gamma: f64 },
}

/// A channel attached to specific circuit qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseChannel {
    #[serde(flatten)]
    pub kind: ChannelKind,
    pub support: Vec<usize>,
}

/// First violated channel constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDiagnostic {
    pub constraint: String,
    pub residual: f64,
}

impl fmt::Display for ChannelDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (residual {:e})", self.constraint, self.residual)
    }
}

/// Sum with Neumaier compensation.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    }
    sum + comp
}

fn out_of_unit(name: &str, v: f64) -> Option<ChannelDiagnostic> {
    if v.is_nan() || !(0.0..=1.0).contains(&v) {
        Some(ChannelDiagnostic {
            constraint: format!("{name} out of range [0, 1]"),
            residual: if v < 0.0 { -v } else { v - 1.0 },
        })
    } else {
        None
    }
}

impl NoiseChannel {
    pub fn pauli(probabilities: PauliMap, support: Vec<usize>) -> Self {
        Self {
            kind: ChannelKind::Pauli { probabilities },
            support,
        }
    }

    pub fn depolarizing(epsilon: f64, support: Vec<usize>) -> Self {
        Self {
            kind: ChannelKind::Depolarizing { epsilon },
            support,
        }
    }

    pub fn coherent(axis: PauliString, alpha: f64, q: f64, support: Vec<usize>) -> Self {
        Self {
            kind: ChannelKind::Coherent { axis, alpha, q },
            support,
        }
    }

    pub fn amplitude_damping(gamma: f64, qubit: usize) -> Self {
        Self {
            kind: ChannelKind::AmplitudeDamping { gamma },
            support: vec![qubit],
        }
    }

    /// Single-string channel `(1-q) rho + q S rho S`.
    pub fn single_pauli(s: PauliString, q: f64, support: Vec<usize>) -> Self {
        let mut probabilities = PauliMap::new();
        probabilities.insert(PauliString::identity(s.num_qubits()), 1.0 - q);
        probabilities.insert(s, q);
        Self::pauli(probabilities, support)
    }

    pub fn num_qubits(&self) -> usize {
        self.support.len()
    }

    pub fn is_pauli(&self) -> bool {
        matches!(
            self.kind,
            ChannelKind::Pauli { .. } | ChannelKind::Depolarizing { .. }
        )
    }

    /// The same channel moved onto another support of equal size.
    pub fn with_support(&self, support: Vec<usize>) -> Self {
        Self {
            kind: self.kind.clone(),
            support,
        }
    }

    /// Checks every channel invariant, reporting the first violation.
    pub fn validate(&self) -> std::result::Result<(), ChannelDiagnostic> {
        let m = self.support.len();
        let shape = |constraint: String| ChannelDiagnostic {
            constraint,
            residual: f64::NAN,
        };
        if m == 0 {
            return Err(shape("empty support".into()));
        }
        for (j, q) in self.support.iter().enumerate() {
            if self.support[..j].contains(q) {
                return Err(shape(format!("repeated support qubit {q}")));
            }
        }
        match &self.kind {
            ChannelKind::Pauli { probabilities } => {
                for (s, &p) in probabilities {
                    if s.num_qubits() != m {
                        return Err(shape(format!(
                            "string {s} has {} qubits but support has {m}",
                            s.num_qubits()
                        )));
                    }
                    if let Some(d) = out_of_unit(&format!("p_{s}"), p) {
                        return Err(d);
                    }
                }
                let sum = compensated_sum(probabilities.values().copied());
                if (sum - 1.0).abs() > PROBABILITY_SUM_TOL {
                    return Err(ChannelDiagnostic {
                        constraint: format!("sum deviates by {:.0e}", (sum - 1.0).abs()),
                        residual: (sum - 1.0).abs(),
                    });
                }
            }
            ChannelKind::Depolarizing { epsilon } => {
                if m > crate::pauli::MAX_ENUMERATION_QUBITS {
                    return Err(shape(format!("depolarizing channel on {m} qubits")));
                }
                if let Some(d) = out_of_unit("epsilon", *epsilon) {
                    return Err(d);
                }
            }
            ChannelKind::Coherent { axis, alpha, q } => {
                if axis.num_qubits() != m {
                    return Err(shape(format!(
                        "axis {axis} has {} qubits but support has {m}",
                        axis.num_qubits()
                    )));
                }
                if axis.is_identity() {
                    return Err(shape("coherent axis is the identity".into()));
                }
                if !alpha.is_finite() {
                    return Err(shape("alpha is not finite".into()));
                }
                if let Some(d) = out_of_unit("q", *q) {
                    return Err(d);
                }
            }
            ChannelKind::AmplitudeDamping { gamma } => {
                if m != 1 {
                    return Err(shape(format!("amplitude damping on {m} qubits")));
                }
                if let Some(mut d) = out_of_unit("gamma", *gamma) {
                    d.constraint = "gamma out of range".into();
                    return Err(d);
                }
            }
        }
        Ok(())
    }

    fn checked(&self) -> Result<()> {
        self.validate()
            .map_err(|d| Error::InvalidChannel(d.to_string()))
    }

    /// Full Pauli probability map. Only defined for Pauli and depolarizing
    /// channels.
    pub fn expand_to_pauli(&self) -> Result<PauliMap> {
        self.checked()?;
        match &self.kind {
            ChannelKind::Pauli { probabilities } => Ok(probabilities.clone()),
            ChannelKind::Depolarizing { epsilon } => {
                let strings = enumerate_strings(self.num_qubits())?;
                let count = strings.len() as f64;
                let each = epsilon / count;
                let identity = 1.0 - epsilon * (count - 1.0) / count;
                Ok(strings
                    .into_iter()
                    .map(|s| (s, if s.is_identity() { identity } else { each }))
                    .filter(|(_, p)| *p != 0.0)
                    .collect())
            }
            _ => Err(Error::InvalidChannel(
                "expand_to_pauli called on a non-Pauli channel".into(),
            )),
        }
    }

    /// Weighted Kraus matrices `(w, M)` with `sum w M^dag M = Id`, in the
    /// local basis of the support (local bit `j` is `support[j]`).
    pub fn kraus_operators(&self) -> Result<Vec<(f64, DMatrix<Complex64>)>> {
        self.checked()?;
        let dim = 1usize << self.num_qubits();
        let id = DMatrix::<Complex64>::identity(dim, dim);
        Ok(match &self.kind {
            ChannelKind::Pauli { .. } | ChannelKind::Depolarizing { .. } => self
                .expand_to_pauli()?
                .into_iter()
                .filter(|(_, p)| *p > 0.0)
                .map(|(s, p)| (p, s.to_matrix()))
                .collect(),
            ChannelKind::Coherent { axis, alpha, q } => {
                let rot = pauli_rotation_matrix(axis, *alpha);
                vec![(1.0 - q, id), (*q, rot)]
            }
            ChannelKind::AmplitudeDamping { gamma } => {
                let (k1, k2) = amplitude_damping_kraus(*gamma);
                vec![(1.0, k1), (1.0, k2)]
            }
        })
    }
}

/// `exp(i theta S) = cos(theta) Id + i sin(theta) S`.
pub fn pauli_rotation_matrix(s: &PauliString, theta: f64) -> DMatrix<Complex64> {
    let dim = 1usize << s.num_qubits();
    DMatrix::<Complex64>::identity(dim, dim) * Complex64::new(theta.cos(), 0.0)
        + s.to_matrix() * Complex64::new(0.0, theta.sin())
}

/// `K1 = diag(1, sqrt(1-gamma))`, `K2 = sqrt(gamma) |0><1|`.
pub fn amplitude_damping_kraus(gamma: f64) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let z = Complex64::new(0.0, 0.0);
    let k1 = DMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(1.0, 0.0),
            z,
            z,
            Complex64::new((1.0 - gamma).sqrt(), 0.0),
        ],
    );
    let k2 = DMatrix::from_row_slice(2, 2, &[z, Complex64::new(gamma.sqrt(), 0.0), z, z]);
    (k1, k2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn completeness_residual(kraus: &[(f64, DMatrix<Complex64>)]) -> f64 {
        let dim = kraus[0].1.nrows();
        let mut acc = DMatrix::<Complex64>::zeros(dim, dim);
        for (w, m) in kraus {
            acc += m.adjoint() * m * Complex64::new(*w, 0.0);
        }
        (acc - DMatrix::identity(dim, dim))
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn depolarizing_expansion() {
        let map = NoiseChannel::depolarizing(0.1, vec![0]).expand_to_pauli().unwrap();
        assert!((map[&p("I")] - 0.925).abs() < 1e-15);
        for s in ["X", "Y", "Z"] {
            assert!((map[&p(s)] - 0.025).abs() < 1e-15);
        }
        let zero = NoiseChannel::depolarizing(0.0, vec![0, 1]).expand_to_pauli().unwrap();
        assert_eq!(zero.len(), 1);
        assert_eq!(zero[&p("II")], 1.0);
    }

    #[test]
    fn depolarizing_expansion_sums_to_one() {
        for m in 1..=3 {
            for eps in [1e-4, 1e-3, 0.01, 0.3, 1.0] {
                let map = NoiseChannel::depolarizing(eps, (0..m).collect())
                    .expand_to_pauli()
                    .unwrap();
                assert!((compensated_sum(map.values().copied()) - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pauli_map_passes_through() {
        let mut map = PauliMap::new();
        map.insert(p("II"), 0.7);
        map.insert(p("XZ"), 0.3);
        let ch = NoiseChannel::pauli(map.clone(), vec![2, 5]);
        assert_eq!(ch.expand_to_pauli().unwrap(), map);
        let ad = NoiseChannel::amplitude_damping(0.1, 0);
        assert!(matches!(ad.expand_to_pauli(), Err(Error::InvalidChannel(_))));
    }

    #[test]
    fn kraus_examples() {
        let q = 0.2;
        let k = NoiseChannel::single_pauli(p("X"), q, vec![0]).kraus_operators().unwrap();
        assert_eq!(k.len(), 2);
        assert!((k[0].0 - (1.0 - q)).abs() < 1e-15);
        assert_eq!(k[0].1, DMatrix::identity(2, 2));
        assert!((k[1].0 - q).abs() < 1e-15);
        assert_eq!(k[1].1, p("X").to_matrix());

        let gamma: f64 = 0.3;
        let k = NoiseChannel::amplitude_damping(gamma, 0).kraus_operators().unwrap();
        assert!((k[0].1[(1, 1)].re - (1.0 - gamma).sqrt()).abs() < 1e-15);
        assert!((k[1].1[(0, 1)].re - gamma.sqrt()).abs() < 1e-15);
        assert_eq!(k[1].1[(1, 0)].norm(), 0.0);

        let (alpha, q) = (0.3, 0.1);
        let k = NoiseChannel::coherent(p("X"), alpha, q, vec![0]).kraus_operators().unwrap();
        assert!((k[1].1[(0, 0)].re - alpha.cos()).abs() < 1e-15);
        assert!((k[1].1[(1, 0)].im - alpha.sin()).abs() < 1e-15);
    }

    #[test]
    fn kraus_completeness() {
        let channels = [
            NoiseChannel::depolarizing(0.37, vec![0, 1]),
            NoiseChannel::depolarizing(0.01, vec![0, 1, 2]),
            NoiseChannel::single_pauli(p("YZ"), 0.2, vec![0, 1]),
            NoiseChannel::coherent(p("ZX"), 1.1, 0.4, vec![0, 1]),
            NoiseChannel::amplitude_damping(0.0, 0),
            NoiseChannel::amplitude_damping(0.77, 0),
            NoiseChannel::amplitude_damping(1.0, 0),
        ];
        for ch in channels {
            assert!(completeness_residual(&ch.kraus_operators().unwrap()) < 1e-12, "{ch:?}");
        }
    }

    #[test]
    fn validation() {
        let mut map = PauliMap::new();
        map.insert(p("I"), 0.899);
        map.insert(p("X"), 0.1);
        let d = NoiseChannel::pauli(map, vec![0]).validate().unwrap_err();
        assert_eq!(d.constraint, "sum deviates by 1e-3");
        assert!((d.residual - 1e-3).abs() < 1e-12);

        let d = NoiseChannel::amplitude_damping(1.2, 0).validate().unwrap_err();
        assert_eq!(d.constraint, "gamma out of range");

        assert!(NoiseChannel::depolarizing(0.001, vec![0, 1]).validate().is_ok());
        assert!(NoiseChannel::depolarizing(0.001, vec![1, 1]).validate().is_err());
        assert!(NoiseChannel::depolarizing(-0.1, vec![0]).validate().is_err());
        assert!(NoiseChannel::coherent(p("I"), 0.3, 0.1, vec![0]).validate().is_err());
        assert!(NoiseChannel::single_pauli(p("XX"), 0.1, vec![0]).validate().is_err());
    }

    #[test]
    fn json_form() {
        let ch: NoiseChannel = serde_json::from_str(
            r#"{"type": "pauli", "support": [3], "probabilities": {"I": 0.9, "X": 0.1}}"#,
        )
        .unwrap();
        assert_eq!(ch, NoiseChannel::single_pauli(p("X"), 0.1, vec![3]));

        let ch: NoiseChannel =
            serde_json::from_str(r#"{"type": "depolarizing", "support": [0, 1], "epsilon": 0.001}"#)
                .unwrap();
        assert_eq!(ch, NoiseChannel::depolarizing(0.001, vec![0, 1]));

        let ch = NoiseChannel::coherent(p("X"), 0.3, 0.1, vec![0]);
        let text = serde_json::to_string(&ch).unwrap();
        assert!(text.contains(r#""type":"coherent""#));
        assert_eq!(serde_json::from_str::<NoiseChannel>(&text).unwrap(), ch);

        let ch: NoiseChannel =
            serde_json::from_str(r#"{"type": "amplitude_damping", "support": [0], "gamma": 0.05}"#)
                .unwrap();
        assert_eq!(ch, NoiseChannel::amplitude_damping(0.05, 0));
    }
}
