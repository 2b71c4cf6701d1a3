//! Noisy circuits and the benchmark builders.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::channel::{ChannelKind, NoiseChannel};
use crate::error::{Error, Result};
use crate::local::LocalOp;
use crate::pauli::{Pauli, PauliString};
use crate::state::{bitstring_to_index, index_to_bitstring, Observable, StateVector};

/// Gates are rotations `exp(i angle P)`, plus the Hadamard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    Rxx,
    Ryy,
    Rzz,
    H,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::Rxx | GateKind::Ryy | GateKind::Rzz => 2,
            _ => 1,
        }
    }

    fn generator(self) -> Option<PauliString> {
        use Pauli::*;
        let p = |ps: &[Pauli]| Some(PauliString::from_paulis(ps));
        match self {
            GateKind::Rx => p(&[X]),
            GateKind::Ry => p(&[Y]),
            GateKind::Rz => p(&[Z]),
            GateKind::Rxx => p(&[X, X]),
            GateKind::Ryy => p(&[Y, Y]),
            GateKind::Rzz => p(&[Z, Z]),
            GateKind::H => None,
        }
    }

    /// Local matrix for `angle`.
    pub fn matrix(self, angle: f64) -> LocalOp {
        match self.generator() {
            Some(s) => LocalOp::pauli_rotation(&s, angle),
            None => {
                let h = std::f64::consts::FRAC_1_SQRT_2;
                LocalOp::pauli(&"X".parse().unwrap())
                    .scaled(h)
                    .plus_scaled(&LocalOp::pauli(&"Z".parse().unwrap()), h.into())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateOp {
    pub gate: GateKind,
    pub qubits: Vec<usize>,
    #[serde(default)]
    pub angle: f64,
    /// Channel applied right after the gate, on the gate's qubits.
    #[serde(default)]
    pub noise: Option<NoiseChannel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialState {
    /// `|+...+>`.
    Plus,
    /// Computational basis state by amplitude index.
    Basis(u64),
}

/// Serialized form of an initial state: `"+"` or a bitstring, qubit 0 first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
struct InitialText(String);

impl InitialState {
    pub fn prepare(&self, num_qubits: usize, max_qubits: usize) -> Result<StateVector> {
        let mut s = StateVector::zero_with_limit(num_qubits, max_qubits)?;
        match self {
            InitialState::Plus => {
                let a = (1.0 / (1u64 << num_qubits) as f64).sqrt();
                s.amplitudes_mut().iter_mut().for_each(|v| *v = a.into());
            }
            InitialState::Basis(i) => {
                if *i >> num_qubits != 0 {
                    return Err(Error::Dimension(format!(
                        "basis index {i} on {num_qubits} qubits"
                    )));
                }
                s.amplitudes_mut()[0] = 0.0.into();
                s.amplitudes_mut()[*i as usize] = 1.0.into();
            }
        }
        Ok(s)
    }

    fn to_text(self, num_qubits: usize) -> String {
        match self {
            InitialState::Plus => "+".into(),
            InitialState::Basis(i) => index_to_bitstring(i, num_qubits),
        }
    }
}

impl FromStr for InitialState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "+" | "plus" => Ok(InitialState::Plus),
            bits => Ok(InitialState::Basis(bitstring_to_index(bits)?)),
        }
    }
}

/// A quantity recorded at every record point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Quantity {
    /// Unnormalized `<psi|O|psi>`.
    Observable { name: String, observable: Observable },
    /// Entropy of qubits `0..cut`.
    Entropy { name: String, cut: usize },
}

impl Quantity {
    pub fn name(&self) -> &str {
        match self {
            Quantity::Observable { name, .. } | Quantity::Entropy { name, .. } => name,
        }
    }

    pub fn evaluate(&self, state: &StateVector) -> Result<f64> {
        match self {
            Quantity::Observable { observable, .. } => state.expectation(observable),
            Quantity::Entropy { cut, .. } => state.bipartite_entropy(*cut),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyCircuit {
    pub num_qubits: usize,
    pub initial: InitialState,
    pub ops: Vec<GateOp>,
    /// Number of ops applied before each recording; `0` is the initial state.
    pub record_points: Vec<usize>,
    pub quantities: Vec<Quantity>,
}

#[derive(Serialize, Deserialize)]
struct CircuitJson {
    num_qubits: usize,
    initial: InitialText,
    ops: Vec<GateOp>,
    #[serde(default)]
    record_points: Option<Vec<usize>>,
    #[serde(default)]
    quantities: Vec<Quantity>,
}

impl Serialize for NoisyCircuit {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        CircuitJson {
            num_qubits: self.num_qubits,
            initial: InitialText(self.initial.to_text(self.num_qubits)),
            ops: self.ops.clone(),
            record_points: Some(self.record_points.clone()),
            quantities: self.quantities.clone(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for NoisyCircuit {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = CircuitJson::deserialize(de)?;
        let initial = raw.initial.0.parse().map_err(serde::de::Error::custom)?;
        let len = raw.ops.len();
        Ok(NoisyCircuit {
            num_qubits: raw.num_qubits,
            initial,
            ops: raw.ops,
            record_points: raw.record_points.unwrap_or_else(|| vec![len]),
            quantities: raw.quantities,
        })
    }
}

impl NoisyCircuit {
    pub fn new(num_qubits: usize, initial: InitialState) -> Self {
        Self {
            num_qubits,
            initial,
            ops: Vec::new(),
            record_points: Vec::new(),
            quantities: Vec::new(),
        }
    }

    pub fn push(&mut self, gate: GateKind, qubits: Vec<usize>, angle: f64, noise: Option<&ChannelKind>) {
        let noise = noise.map(|kind| NoiseChannel {
            kind: kind.clone(),
            support: qubits.clone(),
        });
        self.ops.push(GateOp {
            gate,
            qubits,
            angle,
            noise,
        });
    }

    /// Records after everything pushed so far.
    pub fn record(&mut self) {
        self.record_points.push(self.ops.len());
    }

    pub fn add_observable(&mut self, name: &str, observable: Observable) {
        self.quantities.push(Quantity::Observable {
            name: name.into(),
            observable,
        });
    }

    pub fn noise_count(&self) -> usize {
        self.ops.iter().filter(|o| o.noise.is_some()).count()
    }

    pub fn two_qubit_gate_count(&self) -> usize {
        self.ops.iter().filter(|o| o.gate.arity() == 2).count()
    }

    /// The same circuit with every channel removed.
    pub fn noiseless(&self) -> Self {
        let mut c = self.clone();
        c.ops.iter_mut().for_each(|o| o.noise = None);
        c
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_qubits;
        if n == 0 || n > 63 {
            return Err(Error::Capacity(format!("{n} qubits")));
        }
        if let InitialState::Basis(i) = self.initial {
            if i >> n != 0 {
                return Err(Error::Dimension(format!("initial state index {i} on {n} qubits")));
            }
        }
        for (k, op) in self.ops.iter().enumerate() {
            let ctx = |msg: String| Error::Dimension(format!("op {k}: {msg}"));
            if op.qubits.len() != op.gate.arity() {
                return Err(ctx(format!(
                    "{:?} acts on {} qubits, got {}",
                    op.gate,
                    op.gate.arity(),
                    op.qubits.len()
                )));
            }
            for (j, &q) in op.qubits.iter().enumerate() {
                if q >= n || op.qubits[..j].contains(&q) {
                    return Err(ctx(format!("bad qubit list {:?}", op.qubits)));
                }
            }
            if let Some(ch) = &op.noise {
                if ch.support != op.qubits {
                    return Err(ctx(format!(
                        "noise support {:?} differs from gate qubits {:?}",
                        ch.support, op.qubits
                    )));
                }
                ch.validate()
                    .map_err(|d| Error::InvalidChannel(format!("op {k}: {d}")))?;
            }
        }
        if self.record_points.windows(2).any(|w| w[0] >= w[1])
            || self.record_points.last().is_some_and(|&r| r > self.ops.len())
        {
            return Err(Error::Dimension(format!(
                "record points {:?} must increase and not exceed {}",
                self.record_points,
                self.ops.len()
            )));
        }
        for q in &self.quantities {
            match q {
                Quantity::Observable { observable, name } => {
                    if let Some(m) = observable.register_size() {
                        if m != n {
                            return Err(Error::Dimension(format!(
                                "observable {name} is on {m} qubits, circuit has {n}"
                            )));
                        }
                    }
                }
                Quantity::Entropy { cut, name } => {
                    if *cut == 0 || *cut >= n {
                        return Err(Error::Dimension(format!("entropy {name} cut {cut}")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Periodic `lx x ly` square lattice. Site `(r, c)` is qubit `r * lx + c`;
/// horizontal bonds come first, row by row, then vertical ones.
pub fn square_lattice_edges(lx: usize, ly: usize) -> Vec<(usize, usize)> {
    let idx = |r: usize, c: usize| r * lx + c;
    let mut seen = BTreeSet::new();
    let mut edges = Vec::new();
    let mut add = |a: usize, b: usize| {
        if a != b && seen.insert((a.min(b), a.max(b))) {
            edges.push((a, b));
        }
    };
    for r in 0..ly {
        for c in 0..lx {
            add(idx(r, c), idx(r, (c + 1) % lx));
        }
    }
    for r in 0..ly {
        for c in 0..lx {
            add(idx(r, c), idx((r + 1) % ly, c));
        }
    }
    edges
}

/// Trotterized 2D transverse-field Ising model from `|+...+>`, recording
/// `S_x = (1/N) sum X_j` after every step.
pub fn build_ising_2d(
    lx: usize,
    ly: usize,
    h: f64,
    dt: f64,
    steps: usize,
    noise: Option<&ChannelKind>,
) -> Result<NoisyCircuit> {
    if lx == 0 || ly == 0 || lx * ly < 2 {
        return Err(Error::Dimension(format!("invalid lattice {lx}x{ly}")));
    }
    let n = lx * ly;
    let edges = square_lattice_edges(lx, ly);
    let mut c = NoisyCircuit::new(n, InitialState::Plus);
    c.add_observable("sx", Observable::magnetization_x(n));
    c.record();
    for _ in 0..steps {
        for &(a, b) in &edges {
            c.push(GateKind::Rzz, vec![a, b], dt, noise);
        }
        for j in 0..n {
            c.push(GateKind::Rx, vec![j], h * dt, None);
        }
        c.record();
    }
    Ok(c)
}

/// XY-chain quench from `|0001 0001 ...>` with periodic bonds. Each step
/// applies, bond by bond, `exp(-i tau XX)` then `exp(-i tau YY)`.
pub fn build_xy_chain(
    n: usize,
    tau: f64,
    steps: usize,
    noise: Option<&ChannelKind>,
) -> Result<NoisyCircuit> {
    if n == 0 || n % 4 != 0 {
        return Err(Error::Dimension(format!("XY chain length {n} must be a positive multiple of 4")));
    }
    let init: u64 = (0..n / 4).map(|b| 1u64 << (4 * b + 3)).sum();
    let mut c = NoisyCircuit::new(n, InitialState::Basis(init));
    c.add_observable("staggered_z", Observable::staggered_z(n));
    c.add_observable(
        "sector",
        Observable::SectorProjector {
            total_z: n as i64 / 2,
        },
    );
    c.record();
    for _ in 0..steps {
        for i in 0..n {
            let bond = vec![i, (i + 1) % n];
            c.push(GateKind::Rxx, bond.clone(), -tau, noise);
            c.push(GateKind::Ryy, bond, -tau, noise);
        }
        c.record();
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    pub num_vertices: usize,
    /// Sorted pairs `(a, b)` with `a < b`.
    pub edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.num_vertices];
        for &(a, b) in &self.edges {
            d[a] += 1;
            d[b] += 1;
        }
        d
    }

    /// Number of edges cut by the assignment `bits` (bit `j` = side of vertex `j`).
    pub fn cut_value(&self, bits: u64) -> usize {
        self.edges
            .iter()
            .filter(|(a, b)| (bits >> a ^ bits >> b) & 1 == 1)
            .count()
    }

    pub fn cycle(n: usize) -> Self {
        let mut edges: Vec<(usize, usize)> = (0..n).map(|i| {
            let j = (i + 1) % n;
            (i.min(j), i.max(j))
        }).collect();
        edges.sort_unstable();
        edges.dedup();
        Graph {
            num_vertices: n,
            edges,
        }
    }
}

/// Uniform-ish random 3-regular simple graph by the pairing model, retrying
/// until no loops or repeated edges appear.
pub fn random_3_regular_graph(n: usize, seed: u64) -> Result<Graph> {
    if n % 2 == 1 || n < 4 {
        return Err(Error::OutOfDomain(format!(
            "3-regular graphs need an even vertex count >= 4, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<usize> = (0..3 * n).map(|p| p / 3).collect();
    loop {
        points.shuffle(&mut rng);
        let mut edges: Vec<(usize, usize)> = points
            .chunks(2)
            .map(|p| (p[0].min(p[1]), p[0].max(p[1])))
            .collect();
        if edges.iter().any(|(a, b)| a == b) {
            continue;
        }
        edges.sort_unstable();
        if edges.windows(2).any(|w| w[0] == w[1]) {
            continue;
        }
        return Ok(Graph {
            num_vertices: n,
            edges,
        });
    }
}

/// Floquet annealing toward the max-cut of `graph`: for `s = 1/T, ..., 1`
/// an `X` layer with angle `dt (1-s)`, then `ZZ` rotations with angle
/// `-dt s` on every edge. Records once, at the end.
pub fn build_maxcut_floquet(
    graph: &Graph,
    t_steps: usize,
    dt: f64,
    noise: Option<&ChannelKind>,
) -> Result<NoisyCircuit> {
    let n = graph.num_vertices;
    if n < 2 {
        return Err(Error::Dimension(format!("graph with {n} vertices")));
    }
    let mut edges = graph.edges.clone();
    edges.sort_unstable();
    let mut c = NoisyCircuit::new(n, InitialState::Plus);
    c.add_observable("mz", Observable::magnetization_z(n));
    for k in 1..=t_steps {
        let s = k as f64 / t_steps as f64;
        for j in 0..n {
            c.push(GateKind::Rx, vec![j], dt * (1.0 - s), None);
        }
        for &(a, b) in &edges {
            c.push(GateKind::Rzz, vec![a, b], -dt * s, noise);
        }
    }
    c.record();
    Ok(c)
}

/// Tilted-field Ising chain with open bonds from `|0...0>`; records the
/// half-chain entropy after every step.
pub fn build_tilted_ising(
    n: usize,
    hx: f64,
    hz: f64,
    dt: f64,
    steps: usize,
    noise: Option<&ChannelKind>,
) -> Result<NoisyCircuit> {
    if n < 2 {
        return Err(Error::Dimension(format!("chain of {n} sites")));
    }
    let mut c = NoisyCircuit::new(n, InitialState::Basis(0));
    c.quantities.push(Quantity::Entropy {
        name: "entropy".into(),
        cut: n / 2,
    });
    c.record();
    for _ in 0..steps {
        for j in 0..n - 1 {
            c.push(GateKind::Rzz, vec![j, j + 1], dt, noise);
        }
        for j in 0..n {
            c.push(GateKind::Rx, vec![j], hx * dt, None);
        }
        for j in 0..n {
            c.push(GateKind::Rz, vec![j], hz * dt, None);
        }
        c.record();
    }
    Ok(c)
}

/// Single qubit from `|0>`: `n` Z gates, each followed by an `X` flip with
/// probability `q`. Records `<Z>` at the end.
pub fn build_toy_model(q: f64, n: usize) -> Result<NoisyCircuit> {
    let x: PauliString = "X".parse()?;
    let channel = NoiseChannel::single_pauli(x, q, vec![0]);
    channel
        .validate()
        .map_err(|d| Error::InvalidChannel(d.to_string()))?;
    let mut c = NoisyCircuit::new(1, InitialState::Basis(0));
    c.add_observable("z", Observable::magnetization_z(1));
    for _ in 0..n {
        c.push(GateKind::Rz, vec![0], FRAC_PI_2, Some(&channel.kind));
    }
    c.record();
    Ok(c)
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GateKind::Rx => "rx",
            GateKind::Ry => "ry",
            GateKind::Rz => "rz",
            GateKind::Rxx => "rxx",
            GateKind::Ryy => "ryy",
            GateKind::Rzz => "rzz",
            GateKind::H => "h",
        })
    }
}
