//! Factorization of a multi-string Pauli channel into a commuting
//! composition of single-string channels `(1-q_S) rho + q_S S rho S`.
//!
//! Every Pauli channel is diagonal in the Pauli basis with eigenvalues
//! (Pauli fidelities) `lambda_S = 1 - 2 sum_{S' in a(S)} p_{S'}`, where
//! `a(S)` is the anticommutant of `S`. The single-string channel on `T`
//! multiplies `lambda_S` by `1 - 2 q_T` whenever `T` anticommutes with `S`,
//! so the factors must satisfy `lambda_S = prod_{T in a(S)} (1 - 2 q_T)`.
//! Inverting this with the counting identities of the anticommutant gives
//!
//! ```text
//! q_S = 1/2 - 1/2 * ( prod_{T in a(S)} lambda_T / prod_{T in c(S)} lambda_T )^(2 / 4^M)
//! ```

use serde::Serialize;

use crate::channel::{compensated_sum, PauliMap};
use crate::error::{Error, Result};
use crate::pauli::{enumerate_strings, PauliString};

/// Factors with `|q_S|` at or below this are treated as zero, which also
/// absorbs rounding noise in the physicality check.
pub const FACTOR_ZERO_TOL: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorizedChannel {
    /// `q_S` for every `S != I`, in enumeration order.
    pub factors: PauliMap,
    pub source: PauliMap,
    pub num_qubits: usize,
    /// Every `q_S` lies in `[0, 1/2)`.
    pub all_physical: bool,
}

impl FactorizedChannel {
    /// Factors that need an actual rotation, in enumeration order.
    pub fn nonzero_factors(&self) -> impl Iterator<Item = (PauliString, f64)> + '_ {
        self.factors
            .iter()
            .filter(|(_, q)| q.abs() > FACTOR_ZERO_TOL)
            .map(|(s, q)| (*s, *q))
    }

    /// The factor furthest outside `[0, 1/2)`, if any.
    pub fn worst_unphysical(&self) -> Option<(PauliString, f64)> {
        self.factors
            .iter()
            .filter(|(_, &q)| !is_physical(q))
            .map(|(s, q)| (*s, *q))
            .max_by(|a, b| {
                let dist = |q: f64| if q < 0.0 { -q } else { q - 0.5 };
                dist(a.1).total_cmp(&dist(b.1))
            })
    }

    pub fn require_physical(&self) -> Result<()> {
        match self.worst_unphysical() {
            None => Ok(()),
            Some((s, q)) => Err(Error::NonPhysical {
                string: s.to_string(),
                value: q,
            }),
        }
    }
}

fn is_physical(q: f64) -> bool {
    q >= -FACTOR_ZERO_TOL && q < 0.5
}

fn register_size(p: &PauliMap) -> Result<usize> {
    let m = p
        .keys()
        .next()
        .map(|s| s.num_qubits())
        .ok_or_else(|| Error::InvalidChannel("empty Pauli probability map".into()))?;
    if let Some(bad) = p.keys().find(|s| s.num_qubits() != m) {
        return Err(Error::Dimension(format!(
            "mixed string sizes {m} and {} in one channel",
            bad.num_qubits()
        )));
    }
    Ok(m)
}

/// `lambda_S` for every `S` in `S_M`.
pub fn pauli_fidelities(p: &PauliMap) -> Result<PauliMap> {
    let m = register_size(p)?;
    Ok(enumerate_strings(m)?
        .into_iter()
        .map(|s| {
            let anti = compensated_sum(
                p.iter()
                    .filter(|(t, _)| !s.commutes_unchecked(t))
                    .map(|(_, &v)| v),
            );
            (s, 1.0 - 2.0 * anti)
        })
        .collect())
}

/// Solves for the single-string factors `q_S`.
///
/// Non-physical solutions (some `q_S < 0`) are returned with
/// `all_physical = false`; only a non-positive fidelity is an error.
pub fn factorize(p: &PauliMap) -> Result<FactorizedChannel> {
    let m = register_size(p)?;
    let fidelities = pauli_fidelities(p)?;
    if let Some((s, &l)) = fidelities.iter().find(|(_, &l)| !(l > 0.0)) {
        return Err(Error::SingularChannel {
            string: s.to_string(),
            value: l,
        });
    }
    let logs: Vec<(PauliString, f64)> = fidelities.iter().map(|(s, l)| (*s, l.ln())).collect();
    let exponent = 2.0 / (1u64 << (2 * m)) as f64;

    let factors: PauliMap = logs
        .iter()
        .filter(|(s, _)| !s.is_identity())
        .map(|(s, _)| {
            let signed = logs.iter().map(|(t, lt)| {
                if s.commutes_unchecked(t) {
                    -lt
                } else {
                    *lt
                }
            });
            let log_ratio = compensated_sum(signed);
            // 1/2 - 1/2 e^x without cancellation at small x
            // (adding 0.0 turns -0.0 into 0.0)
            (*s, -0.5 * (exponent * log_ratio).exp_m1() + 0.0)
        })
        .collect();

    let all_physical = factors.values().all(|&q| is_physical(q));
    Ok(FactorizedChannel {
        factors,
        source: p.clone(),
        num_qubits: m,
        all_physical,
    })
}

/// `max_S | lambda_S - prod_{T in a(S)} (1 - 2 q_T) |`, absent factors = 0.
pub fn verify_factorization(p: &PauliMap, factors: &PauliMap) -> Result<f64> {
    let fidelities = pauli_fidelities(p)?;
    let mut worst = 0.0f64;
    for (s, lambda) in &fidelities {
        let product: f64 = factors
            .iter()
            .filter(|(t, _)| !s.commutes_unchecked(t))
            .map(|(_, q)| 1.0 - 2.0 * q)
            .product();
        worst = worst.max((lambda - product).abs());
    }
    Ok(worst)
}

/// `q_S = 1/2 - 1/2 (1 - epsilon)^{2/4^M}`, the common factor of a depolarizing channel.
pub fn depolarizing_factor(num_qubits: usize, epsilon: f64) -> f64 {
    0.5 - 0.5 * (1.0 - epsilon).powf(2.0 / (1u64 << (2 * num_qubits)) as f64)
}
