//! Random noise operators `W` whose average `E[W rho W^dag]` reproduces a channel.
//!
//! Digital samplers insert a whole Kraus operator with its probability.
//! Analog samplers insert small random rotations whose angle law is tuned so
//! that the average matches the channel exactly.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::angles::{AngleDistribution, AngleKind};
use crate::channel::{amplitude_damping_kraus, ChannelKind, NoiseChannel};
use crate::error::{Error, Result};
use crate::factorize::{factorize, verify_factorization, FACTOR_ZERO_TOL};
use crate::local::LocalOp;
use crate::pauli::PauliString;
use crate::state::StateVector;

/// Residual allowed when a factorization is compiled.
pub const FACTOR_RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerMethod {
    Digital,
    #[serde(alias = "analog")]
    AnalogFactorized,
    AnalogRandomRotation,
}

impl SamplerMethod {
    pub fn name(self) -> &'static str {
        match self {
            SamplerMethod::Digital => "digital",
            SamplerMethod::AnalogFactorized => "analog",
            SamplerMethod::AnalogRandomRotation => "analog-random-rotation",
        }
    }

    pub fn is_analog(self) -> bool {
        self != SamplerMethod::Digital
    }
}

impl fmt::Display for SamplerMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "digital" => Ok(SamplerMethod::Digital),
            "analog" | "analog-factorized" => Ok(SamplerMethod::AnalogFactorized),
            "analog-random-rotation" => Ok(SamplerMethod::AnalogRandomRotation),
            _ => Err(Error::Parse(format!("unknown sampler {s:?}"))),
        }
    }
}

/// Law of the analog amplitude-damping angle: symmetric, unit second moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DampingAngles {
    /// `theta = +-1`.
    #[default]
    Discrete,
    /// `theta ~ N(0, 1)`.
    Gaussian,
}

impl FromStr for DampingAngles {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "discrete" => Ok(DampingAngles::Discrete),
            "gaussian" => Ok(DampingAngles::Gaussian),
            _ => Err(Error::Parse(format!("unknown damping angle law {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub method: SamplerMethod,
    #[serde(default = "default_angle_kind")]
    pub angle_dist: AngleKind,
    #[serde(default)]
    pub damping_angles: DampingAngles,
}

fn default_angle_kind() -> AngleKind {
    AngleKind::Gaussian
}

impl SamplerSpec {
    pub fn digital() -> Self {
        Self {
            method: SamplerMethod::Digital,
            angle_dist: AngleKind::Gaussian,
            damping_angles: DampingAngles::Discrete,
        }
    }

    pub fn analog(angle_dist: AngleKind) -> Self {
        Self {
            method: SamplerMethod::AnalogFactorized,
            angle_dist,
            damping_angles: DampingAngles::Discrete,
        }
    }

    pub fn random_rotation(angle_dist: AngleKind) -> Self {
        Self {
            method: SamplerMethod::AnalogRandomRotation,
            ..Self::analog(angle_dist)
        }
    }
}

/// One primitive noise action on the channel's local support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseAction {
    PauliFlip(PauliString),
    PauliRotation(PauliString, f64),
    MatrixOp(LocalOp),
}

impl NoiseAction {
    fn operator(&self) -> LocalOp {
        match self {
            NoiseAction::PauliFlip(s) => LocalOp::pauli(s),
            NoiseAction::PauliRotation(s, t) => LocalOp::pauli_rotation(s, *t),
            NoiseAction::MatrixOp(m) => *m,
        }
    }
}

/// Ordered actions making up one draw of `W`; applied first to last.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NoiseEvent {
    pub actions: Vec<NoiseAction>,
}

impl NoiseEvent {
    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn clear(&mut self) {
        self.actions.clear();
    }

    /// The composed operator `W` on a `k`-qubit support (`k <= 2`).
    pub fn operator(&self, k: usize) -> LocalOp {
        self.actions
            .iter()
            .fold(LocalOp::identity(k), |acc, a| a.operator().mul(&acc))
    }

    /// Operator-norm distance of `W` from the identity.
    pub fn max_identity_deviation(&self, k: usize) -> f64 {
        match self.actions[..] {
            [] => 0.0,
            // a non-identity Pauli string has eigenvalue -1
            [NoiseAction::PauliFlip(s)] if !s.is_identity() => 2.0,
            _ => self.operator(k).identity_deviation(),
        }
    }

    /// Applies the actions to `support` qubits of `state`, one at a time.
    pub fn apply(&self, state: &mut StateVector, support: &[usize]) -> Result<()> {
        for a in &self.actions {
            match a {
                NoiseAction::PauliFlip(s) => {
                    state.apply_pauli(&s.embed(support, state.num_qubits())?)?
                }
                NoiseAction::PauliRotation(s, t) => state.apply_pauli_rotation(s, support, *t)?,
                NoiseAction::MatrixOp(m) => m.apply(state, support),
            }
        }
        Ok(())
    }
}

/// Inverse-CDF draw over a cumulative table; `None` means "no string".
fn pick(cumulative: &[f64], u: f64) -> Option<usize> {
    let i = cumulative.partition_point(|&c| c <= u);
    (i < cumulative.len()).then_some(i)
}

/// Per-channel precomputation for one sampler method.
#[derive(Debug, Clone, PartialEq)]
pub enum CompiledChannel {
    Identity,
    PauliDigital {
        strings: Vec<PauliString>,
        cumulative: Vec<f64>,
    },
    Factorized {
        rotations: Vec<(PauliString, AngleDistribution)>,
    },
    RandomRotation {
        strings: Vec<PauliString>,
        /// Cumulative `p_S / q`, ending at 1.
        cumulative: Vec<f64>,
        dist: AngleDistribution,
    },
    CoherentDigital {
        rotation: LocalOp,
        q: f64,
    },
    CoherentAnalog {
        axis: PauliString,
        dist: AngleDistribution,
    },
    DampingDigital {
        k1: LocalOp,
        k2: LocalOp,
    },
    DampingAnalog {
        k1: LocalOp,
        k2: LocalOp,
        angles: DampingAngles,
    },
}

impl CompiledChannel {
    pub fn compile(channel: &NoiseChannel, spec: &SamplerSpec) -> Result<Self> {
        channel
            .validate()
            .map_err(|d| Error::InvalidChannel(d.to_string()))?;
        match &channel.kind {
            ChannelKind::Pauli { .. } | ChannelKind::Depolarizing { .. } => {
                let p = channel.expand_to_pauli()?;
                match spec.method {
                    SamplerMethod::Digital => {
                        let mut strings = Vec::new();
                        let mut cumulative = Vec::new();
                        let mut acc = 0.0;
                        for (s, &w) in p.iter().filter(|(s, &w)| !s.is_identity() && w > 0.0) {
                            acc += w;
                            strings.push(*s);
                            cumulative.push(acc);
                        }
                        if strings.is_empty() {
                            return Ok(CompiledChannel::Identity);
                        }
                        Ok(CompiledChannel::PauliDigital {
                            strings,
                            cumulative,
                        })
                    }
                    SamplerMethod::AnalogFactorized => {
                        let f = factorize(&p)?;
                        f.require_physical()?;
                        let residual = verify_factorization(&p, &f.factors)?;
                        if residual > FACTOR_RESIDUAL_TOL {
                            return Err(Error::InvalidChannel(format!(
                                "factorization residual {residual:e} exceeds {FACTOR_RESIDUAL_TOL:e}"
                            )));
                        }
                        let rotations = f
                            .nonzero_factors()
                            .map(|(s, q)| {
                                Ok((s, AngleDistribution::for_probability(spec.angle_dist, q.max(0.0))?))
                            })
                            .collect::<Result<Vec<_>>>()?;
                        if rotations.is_empty() {
                            return Ok(CompiledChannel::Identity);
                        }
                        Ok(CompiledChannel::Factorized { rotations })
                    }
                    SamplerMethod::AnalogRandomRotation => {
                        let flips: Vec<(PauliString, f64)> = p
                            .iter()
                            .filter(|(s, &w)| !s.is_identity() && w > 0.0)
                            .map(|(s, w)| (*s, *w))
                            .collect();
                        let q: f64 = flips.iter().map(|(_, w)| w).sum();
                        if q <= FACTOR_ZERO_TOL {
                            return Ok(CompiledChannel::Identity);
                        }
                        let dist = AngleDistribution::for_probability(spec.angle_dist, q)?;
                        let mut acc = 0.0;
                        let mut cumulative: Vec<f64> = flips
                            .iter()
                            .map(|(_, w)| {
                                acc += w / q;
                                acc
                            })
                            .collect();
                        *cumulative.last_mut().unwrap() = 1.0;
                        Ok(CompiledChannel::RandomRotation {
                            strings: flips.into_iter().map(|(s, _)| s).collect(),
                            cumulative,
                            dist,
                        })
                    }
                }
            }
            ChannelKind::Coherent { axis, alpha, q } => {
                if *q == 0.0 || alpha.sin() == 0.0 {
                    return Ok(CompiledChannel::Identity);
                }
                match spec.method {
                    SamplerMethod::Digital => Ok(CompiledChannel::CoherentDigital {
                        rotation: LocalOp::pauli_rotation(axis, *alpha),
                        q: *q,
                    }),
                    _ => {
                        let (mu, sigma) = coherent_parameters(*alpha, *q)?;
                        Ok(CompiledChannel::CoherentAnalog {
                            axis: *axis,
                            dist: AngleDistribution::gaussian(mu, sigma),
                        })
                    }
                }
            }
            ChannelKind::AmplitudeDamping { gamma } => {
                if *gamma == 0.0 {
                    return Ok(CompiledChannel::Identity);
                }
                let (k1, k2) = amplitude_damping_kraus(*gamma);
                let (k1, k2) = (LocalOp::from_dmatrix(&k1)?, LocalOp::from_dmatrix(&k2)?);
                Ok(match spec.method {
                    SamplerMethod::Digital => CompiledChannel::DampingDigital { k1, k2 },
                    _ => CompiledChannel::DampingAnalog {
                        k1,
                        k2,
                        angles: spec.damping_angles,
                    },
                })
            }
        }
    }

    /// Whether a draw needs the current state.
    pub fn needs_state(&self) -> bool {
        matches!(self, CompiledChannel::DampingDigital { .. })
    }

    /// Draws one event into `event` (cleared first). `state` and `support`
    /// are only read by state-dependent samplers.
    pub fn draw<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        state: Option<(&StateVector, &[usize])>,
        event: &mut NoiseEvent,
    ) -> Result<()> {
        event.clear();
        match self {
            CompiledChannel::Identity => {}
            CompiledChannel::PauliDigital {
                strings,
                cumulative,
            } => {
                if let Some(i) = pick(cumulative, rng.random::<f64>()) {
                    event.actions.push(NoiseAction::PauliFlip(strings[i]));
                }
            }
            CompiledChannel::Factorized { rotations } => {
                for (s, dist) in rotations {
                    event
                        .actions
                        .push(NoiseAction::PauliRotation(*s, dist.sample(rng)));
                }
            }
            CompiledChannel::RandomRotation {
                strings,
                cumulative,
                dist,
            } => {
                let i = pick(cumulative, rng.random::<f64>()).unwrap_or(strings.len() - 1);
                event
                    .actions
                    .push(NoiseAction::PauliRotation(strings[i], dist.sample(rng)));
            }
            CompiledChannel::CoherentDigital { rotation, q } => {
                if rng.random::<f64>() < *q {
                    event.actions.push(NoiseAction::MatrixOp(*rotation));
                }
            }
            CompiledChannel::CoherentAnalog { axis, dist } => {
                event
                    .actions
                    .push(NoiseAction::PauliRotation(*axis, dist.sample(rng)));
            }
            CompiledChannel::DampingDigital { k1, k2 } => {
                let (psi, support) = state.ok_or_else(|| {
                    Error::Contract("digital amplitude damping needs the current state".into())
                })?;
                let p_jump = jump_probability(k2, psi, support[0]);
                let op = if rng.random::<f64>() < p_jump {
                    k2.scaled(1.0 / p_jump.sqrt())
                } else {
                    k1.scaled(1.0 / (1.0 - p_jump).sqrt())
                };
                event.actions.push(NoiseAction::MatrixOp(op));
            }
            CompiledChannel::DampingAnalog { k1, k2, angles } => {
                let theta = match angles {
                    DampingAngles::Discrete => {
                        if rng.random::<bool>() {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                    DampingAngles::Gaussian => rng.sample::<f64, _>(StandardNormal),
                };
                // K2^2 = 0, so exp(i theta K2) = Id + i theta K2 exactly
                let exp = LocalOp::identity(1).plus_scaled(k2, Complex64::new(0.0, theta));
                let w = k1.mul(&exp);
                event.actions.push(NoiseAction::MatrixOp(w));
            }
        }
        Ok(())
    }
}

/// `<psi|K2^dag K2|psi> / <psi|psi>` on one qubit.
fn jump_probability(k2: &LocalOp, psi: &StateVector, qubit: usize) -> f64 {
    let gamma = k2.get(0, 1).norm_sqr();
    let mut excited = 0.0;
    for (i, a) in psi.amplitudes().iter().enumerate() {
        if (i >> qubit) & 1 == 1 {
            excited += a.norm_sqr();
        }
    }
    gamma * excited / psi.norm_sqr()
}

/// `(mu, sigma)` of the Gaussian angle law for a coherent over-rotation.
pub fn coherent_parameters(alpha: f64, q: f64) -> Result<(f64, f64)> {
    let s2 = alpha.sin().powi(2);
    let arg = 4.0 * q * (1.0 - q) * s2;
    if !(0.0..=1.0).contains(&q) || arg >= 1.0 {
        return Err(Error::OutOfDomain(format!(
            "coherent channel needs 4q(1-q)sin^2(alpha) < 1, got {arg}"
        )));
    }
    let mu = 0.5 * (q * (2.0 * alpha).sin()).atan2(1.0 - 2.0 * q * s2);
    let sigma = (-0.25 * (-arg).ln_1p()).sqrt();
    Ok((mu, sigma))
}

/// Digital draw for a Pauli or depolarizing channel.
pub fn digital_draw<R: Rng + ?Sized>(channel: &NoiseChannel, rng: &mut R) -> Result<NoiseEvent> {
    if !channel.is_pauli() {
        return Err(Error::InvalidChannel("digital_draw expects a Pauli channel".into()));
    }
    draw_once(channel, &SamplerSpec::digital(), rng)
}

/// One rotation per nonzero factor of the channel's factorization.
pub fn analog_factorized_draw<R: Rng + ?Sized>(
    channel: &NoiseChannel,
    kind: AngleKind,
    rng: &mut R,
) -> Result<NoiseEvent> {
    draw_once(channel, &SamplerSpec::analog(kind), rng)
}

/// One rotation about a string drawn from `p_S / q` with angle law for `q`.
pub fn analog_random_rotation_draw<R: Rng + ?Sized>(
    channel: &NoiseChannel,
    kind: AngleKind,
    rng: &mut R,
) -> Result<NoiseEvent> {
    draw_once(channel, &SamplerSpec::random_rotation(kind), rng)
}

fn draw_once<R: Rng + ?Sized>(
    channel: &NoiseChannel,
    spec: &SamplerSpec,
    rng: &mut R,
) -> Result<NoiseEvent> {
    let compiled = CompiledChannel::compile(channel, spec)?;
    let mut event = NoiseEvent::default();
    compiled.draw(rng, None, &mut event)?;
    Ok(event)
}

/// Analog draw for a coherent over-rotation about `X`.
pub fn coherent_draw<R: Rng + ?Sized>(alpha: f64, q: f64, rng: &mut R) -> Result<NoiseEvent> {
    let (mu, sigma) = coherent_parameters(alpha, q)?;
    let x: PauliString = "X".parse()?;
    Ok(NoiseEvent {
        actions: vec![NoiseAction::PauliRotation(
            x,
            AngleDistribution::gaussian(mu, sigma).sample(rng),
        )],
    })
}

/// Amplitude-damping draw; the digital variant reads `state` on `qubit`.
pub fn amplitude_damping_draw<R: Rng + ?Sized>(
    gamma: f64,
    spec: &SamplerSpec,
    rng: &mut R,
    state: Option<(&StateVector, usize)>,
) -> Result<NoiseEvent> {
    let channel = NoiseChannel::amplitude_damping(gamma, state.map_or(0, |s| s.1));
    let compiled = CompiledChannel::compile(&channel, spec)?;
    let mut event = NoiseEvent::default();
    let support = [channel.support[0]];
    compiled.draw(rng, state.map(|(psi, _)| (psi, &support[..])), &mut event)?;
    Ok(event)
}
