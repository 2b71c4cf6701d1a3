//! Trajectory ensembles: per-trajectory runs, SEM-driven estimation,
//! variance ratios, bitstring distributions and the toy-model closed forms.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::angles::{AngleDistribution, AngleKind};
use crate::channel::{compensated_sum, ChannelKind};
use crate::circuits::{NoisyCircuit, Quantity};
use crate::error::{Error, Result};
use crate::local::LocalOp;
use crate::sampler::{CompiledChannel, NoiseEvent, SamplerSpec};
use crate::state::{StateVector, DEFAULT_MAX_QUBITS};

/// Trajectories run before the stopping rule is consulted.
pub const MIN_TRAJECTORIES: usize = 16;

/// Stream offset separating the analog ensemble from the digital one in
/// [`variance_ratio`].
pub const ANALOG_STREAM_OFFSET: u64 = 1 << 62;

/// Floor applied to single-trajectory probabilities in [`kl_topk`].
pub const KL_FLOOR: f64 = 1e-12;

const BATCH: usize = 64;

/// Generator for trajectory `index`: ChaCha8 keyed by the master seed, one
/// stream per trajectory.
pub fn trajectory_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// A circuit with its channels compiled for one sampler.
#[derive(Debug, Clone)]
pub struct Engine<'c> {
    circuit: &'c NoisyCircuit,
    spec: SamplerSpec,
    gates: Vec<LocalOp>,
    noise: Vec<Option<usize>>,
    compiled: Vec<CompiledChannel>,
    max_qubits: usize,
}

impl<'c> Engine<'c> {
    pub fn new(circuit: &'c NoisyCircuit, spec: SamplerSpec) -> Result<Self> {
        circuit.validate()?;
        let mut kinds: Vec<&ChannelKind> = Vec::new();
        let mut compiled = Vec::new();
        let mut noise = Vec::with_capacity(circuit.ops.len());
        for op in &circuit.ops {
            noise.push(match &op.noise {
                None => None,
                Some(ch) => Some(match kinds.iter().position(|k| **k == ch.kind) {
                    Some(i) => i,
                    None => {
                        compiled.push(CompiledChannel::compile(ch, &spec)?);
                        kinds.push(&ch.kind);
                        kinds.len() - 1
                    }
                }),
            });
        }
        Ok(Self {
            circuit,
            spec,
            gates: circuit.ops.iter().map(|o| o.gate.matrix(o.angle)).collect(),
            noise,
            compiled,
            max_qubits: DEFAULT_MAX_QUBITS,
        })
    }

    pub fn with_max_qubits(mut self, max_qubits: usize) -> Self {
        self.max_qubits = max_qubits;
        self
    }

    pub fn circuit(&self) -> &NoisyCircuit {
        self.circuit
    }

    pub fn spec(&self) -> &SamplerSpec {
        &self.spec
    }

    /// Distinct compiled channels, in order of first use.
    pub fn compiled_channels(&self) -> &[CompiledChannel] {
        &self.compiled
    }

    /// Runs trajectory `stream` and calls `on_record(k, state)` at record point `k`.
    pub fn run(
        &self,
        master_seed: u64,
        stream: u64,
        mut on_record: impl FnMut(usize, &StateVector) -> Result<()>,
    ) -> Result<StateVector> {
        let c = self.circuit;
        let mut state = c.initial.prepare(c.num_qubits, self.max_qubits)?;
        let mut rng = trajectory_rng(master_seed, stream);
        let mut event = NoiseEvent::default();
        let mut rp = 0;
        let points = &c.record_points;
        while rp < points.len() && points[rp] == 0 {
            on_record(rp, &state)?;
            rp += 1;
        }
        for (i, op) in c.ops.iter().enumerate() {
            let gate = &self.gates[i];
            match self.noise[i].map(|k| &self.compiled[k]) {
                None => gate.apply(&mut state, &op.qubits),
                Some(ch) if ch.needs_state() => {
                    gate.apply(&mut state, &op.qubits);
                    ch.draw(&mut rng, Some((&state, &op.qubits)), &mut event)?;
                    event.apply(&mut state, &op.qubits)?;
                }
                Some(ch) => {
                    ch.draw(&mut rng, None, &mut event)?;
                    if event.is_empty() {
                        gate.apply(&mut state, &op.qubits);
                    } else {
                        event
                            .operator(op.qubits.len())
                            .mul(gate)
                            .apply(&mut state, &op.qubits);
                    }
                }
            }
            while rp < points.len() && points[rp] == i + 1 {
                on_record(rp, &state)?;
                rp += 1;
            }
        }
        Ok(state)
    }

    /// Values `[record point][quantity]`, flattened record-major.
    pub fn trajectory_series(&self, master_seed: u64, stream: u64) -> Result<Vec<f64>> {
        let q = &self.circuit.quantities;
        let mut out = Vec::with_capacity(self.circuit.record_points.len() * q.len());
        self.run(master_seed, stream, |_, psi| {
            for quantity in q {
                out.push(quantity.evaluate(psi)?);
            }
            Ok(())
        })?;
        Ok(out)
    }

    fn batch(&self, master_seed: u64, streams: std::ops::Range<u64>) -> Result<Vec<Vec<f64>>> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            streams
                .into_par_iter()
                .map(|s| self.trajectory_series(master_seed, s))
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            streams
                .map(|s| self.trajectory_series(master_seed, s))
                .collect()
        }
    }
}

/// Series of one trajectory; identical for identical `(master_seed, index)`.
pub fn run_trajectory(
    circuit: &NoisyCircuit,
    spec: &SamplerSpec,
    index: u64,
    master_seed: u64,
) -> Result<Vec<f64>> {
    Engine::new(circuit, *spec)?.trajectory_series(master_seed, index)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TargetSemMet,
    MaxTrajectories,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryReport {
    pub sampler: SamplerSpec,
    pub master_seed: u64,
    pub stream_offset: u64,
    pub quantities: Vec<String>,
    pub record_points: Vec<usize>,
    /// Per trajectory, flattened `[record point][quantity]`.
    pub values: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// Unbiased sample variance.
    pub variance: Vec<f64>,
    pub sem: Vec<f64>,
    pub trajectories_run: usize,
    pub stop_reason: StopReason,
    pub target_sem: Option<f64>,
}

impl TrajectoryReport {
    fn slot(&self, record: usize, quantity: usize) -> usize {
        record * self.quantities.len() + quantity
    }

    pub fn mean_at(&self, record: usize, quantity: usize) -> f64 {
        self.mean[self.slot(record, quantity)]
    }

    pub fn variance_at(&self, record: usize, quantity: usize) -> f64 {
        self.variance[self.slot(record, quantity)]
    }

    pub fn sem_at(&self, record: usize, quantity: usize) -> f64 {
        self.sem[self.slot(record, quantity)]
    }

    /// Column of one quantity across record points.
    pub fn series(&self, stat: &[f64], quantity: usize) -> Vec<f64> {
        (0..self.record_points.len())
            .map(|r| stat[self.slot(r, quantity)])
            .collect()
    }

    pub fn max_sem(&self) -> f64 {
        self.sem.iter().fold(0.0, |a, b| a.max(*b))
    }

    /// `trajectory_index,record_point,observable_name,value`.
    pub fn raw_csv(&self) -> String {
        let mut s = String::from("trajectory_index,record_point,observable_name,value\n");
        for (t, row) in self.values.iter().enumerate() {
            for (r, point) in self.record_points.iter().enumerate() {
                for (q, name) in self.quantities.iter().enumerate() {
                    let _ = writeln!(s, "{},{},{},{:e}", t as u64 + self.stream_offset, point, name, row[self.slot(r, q)]);
                }
            }
        }
        s
    }

    /// `record_point,observable_name,mean,variance,sem,n`.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("record_point,observable_name,mean,variance,sem,n\n");
        for (r, point) in self.record_points.iter().enumerate() {
            for (q, name) in self.quantities.iter().enumerate() {
                let i = self.slot(r, q);
                let _ = writeln!(
                    s,
                    "{},{},{:e},{:e},{:e},{}",
                    point, name, self.mean[i], self.variance[i], self.sem[i], self.trajectories_run
                );
            }
        }
        s
    }
}

/// Mean, unbiased variance and SEM of each column, summed in index order.
fn column_stats(values: &[Vec<f64>], width: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = values.len();
    let mut mean = vec![0.0; width];
    let mut var = vec![0.0; width];
    let mut sem = vec![0.0; width];
    for j in 0..width {
        let m = compensated_sum(values.iter().map(|v| v[j])) / n as f64;
        mean[j] = m;
        if n > 1 {
            var[j] = compensated_sum(values.iter().map(|v| (v[j] - m).powi(2))) / (n - 1) as f64;
            sem[j] = (var[j] / n as f64).sqrt();
        }
    }
    (mean, var, sem)
}

/// Running Welford moments used by the stopping rule.
struct Running {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Running {
    fn push(&mut self, v: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), x) in self.mean.iter_mut().zip(&mut self.m2).zip(v) {
            let d = x - *m;
            *m += d / n;
            *s += d * (x - *m);
        }
    }

    fn max_sem(&self) -> f64 {
        if self.n < 2 {
            return f64::INFINITY;
        }
        let n = self.n as f64;
        self.m2
            .iter()
            .map(|s| (s.max(0.0) / (n - 1.0) / n).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Ensemble settings shared by [`estimate`] and [`run_ensemble`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleOptions {
    pub master_seed: u64,
    pub stream_offset: u64,
    pub target_sem: Option<f64>,
    pub max_trajectories: usize,
}

pub fn ensemble(engine: &Engine<'_>, opts: EnsembleOptions) -> Result<TrajectoryReport> {
    let c = engine.circuit();
    let width = c.record_points.len() * c.quantities.len();
    if let Some(t) = opts.target_sem {
        if !(t > 0.0) {
            return Err(Error::OutOfDomain(format!("target SEM {t} must be positive")));
        }
    }
    let mut running = Running {
        n: 0,
        mean: vec![0.0; width],
        m2: vec![0.0; width],
    };
    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut stop = StopReason::MaxTrajectories;
    'outer: while values.len() < opts.max_trajectories {
        let start = values.len() as u64;
        let end = (values.len() + BATCH).min(opts.max_trajectories) as u64;
        let batch = engine.batch(opts.master_seed, start + opts.stream_offset..end + opts.stream_offset)?;
        for row in batch {
            running.push(&row);
            values.push(row);
            if let Some(t) = opts.target_sem {
                if running.n >= MIN_TRAJECTORIES && running.max_sem() <= t {
                    stop = StopReason::TargetSemMet;
                    break 'outer;
                }
            }
        }
    }
    let (mean, variance, sem) = column_stats(&values, width);
    Ok(TrajectoryReport {
        sampler: *engine.spec(),
        master_seed: opts.master_seed,
        stream_offset: opts.stream_offset,
        quantities: c.quantities.iter().map(|q| q.name().to_string()).collect(),
        record_points: c.record_points.clone(),
        trajectories_run: values.len(),
        values,
        mean,
        variance,
        sem,
        stop_reason: stop,
        target_sem: opts.target_sem,
    })
}

/// Adds trajectories in index order until the largest SEM over all record
/// points and quantities is at most `target_sem`, or `max_trajectories` ran.
pub fn estimate(
    circuit: &NoisyCircuit,
    spec: &SamplerSpec,
    target_sem: f64,
    max_trajectories: usize,
    master_seed: u64,
) -> Result<TrajectoryReport> {
    ensemble(
        &Engine::new(circuit, *spec)?,
        EnsembleOptions {
            master_seed,
            stream_offset: 0,
            target_sem: Some(target_sem),
            max_trajectories,
        },
    )
}

/// Exactly `n` trajectories.
pub fn run_ensemble(
    circuit: &NoisyCircuit,
    spec: &SamplerSpec,
    n: usize,
    master_seed: u64,
) -> Result<TrajectoryReport> {
    ensemble(
        &Engine::new(circuit, *spec)?,
        EnsembleOptions {
            master_seed,
            stream_offset: 0,
            target_sem: None,
            max_trajectories: n,
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceRatio {
    pub digital: TrajectoryReport,
    pub analog: TrajectoryReport,
    /// `var(digital) / var(analog)` per slot; `0/0` reads as 1.
    pub ratio: Vec<f64>,
}

pub fn ratio_of(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        1.0
    } else {
        a / b
    }
}

/// Digital versus `analog` variance on the same circuit, each over `n`
/// trajectories from disjoint streams.
pub fn variance_ratio(
    circuit: &NoisyCircuit,
    analog: &SamplerSpec,
    n: usize,
    master_seed: u64,
) -> Result<VarianceRatio> {
    if n < 2 {
        return Err(Error::OutOfDomain(format!("variance ratio needs n >= 2, got {n}")));
    }
    let run = |spec: SamplerSpec, stream_offset| {
        ensemble(
            &Engine::new(circuit, spec)?,
            EnsembleOptions {
                master_seed,
                stream_offset,
                target_sem: None,
                max_trajectories: n,
            },
        )
    };
    let digital = run(SamplerSpec::digital(), 0)?;
    let analog = run(*analog, ANALOG_STREAM_OFFSET)?;
    let ratio = digital
        .variance
        .iter()
        .zip(&analog.variance)
        .map(|(d, a)| ratio_of(*d, *a))
        .collect();
    Ok(VarianceRatio {
        digital,
        analog,
        ratio,
    })
}

/// Toy-model mean `(1-2q)^n` and analog variance
/// `1/2 + 1/2 (1 - 8q + 8 E[sin^4])^n - (1-2q)^(2n)`.
pub fn toy_model_stats(q: f64, n: u32, kind: AngleKind) -> Result<(f64, f64)> {
    let sin4 = AngleDistribution::for_probability(kind, q)?.moments()?.sin4;
    Ok(toy_model_stats_from_moment(q, n, sin4))
}

pub fn toy_model_stats_from_moment(q: f64, n: u32, sin4: f64) -> (f64, f64) {
    let mean = (1.0 - 2.0 * q).powi(n as i32);
    let var = 0.5 + 0.5 * (1.0 - 8.0 * q + 8.0 * sin4).powi(n as i32) - mean * mean;
    (mean, var.max(0.0))
}

/// Digital toy-model variance: outcomes are `+-1` with mean `(1-2q)^n`.
pub fn toy_model_digital_variance(q: f64, n: u32) -> f64 {
    1.0 - (1.0 - 2.0 * q).powi(2 * n as i32)
}

/// KL divergence restricted to the `k` most likely states of `p_exact`.
///
/// Both restrictions are renormalized over those states; `p_single` is
/// floored at [`KL_FLOOR`] first. Returns the absolute value.
pub fn kl_topk(p_exact: &[f64], p_single: &[f64], k: usize) -> Result<f64> {
    if p_exact.len() != p_single.len() {
        return Err(Error::Dimension(format!(
            "distributions of length {} and {}",
            p_exact.len(),
            p_single.len()
        )));
    }
    let top = crate::state::top_k(p_exact, k);
    let ze = compensated_sum(top.iter().map(|(_, p)| *p));
    let zs = compensated_sum(top.iter().map(|(i, _)| p_single[*i as usize].max(KL_FLOOR)));
    if !(ze > 0.0) {
        return Err(Error::OutOfDomain("exact distribution has no mass on its top states".into()));
    }
    let kl = compensated_sum(top.iter().filter(|(_, p)| *p > 0.0).map(|(i, p)| {
        let pe = p / ze;
        let ps = p_single[*i as usize].max(KL_FLOOR) / zs;
        pe * (pe / ps).ln()
    }));
    Ok(kl.abs())
}

/// Computational-basis weights `|<i|psi>|^2` at the end of one trajectory.
pub fn trajectory_distribution(engine: &Engine<'_>, master_seed: u64, stream: u64) -> Result<Vec<f64>> {
    let psi = engine.run(master_seed, stream, |_, _| Ok(()))?;
    Ok(psi.amplitudes().iter().map(|a| a.norm_sqr()).collect())
}

/// Average final distribution over trajectories `0..n`.
pub fn average_distribution(engine: &Engine<'_>, n: usize, master_seed: u64) -> Result<Vec<f64>> {
    let dim = 1usize << engine.circuit().num_qubits;
    let mut acc = vec![0.0; dim];
    let mut start = 0;
    while start < n {
        let end = (start + BATCH).min(n);
        let rows = distributions(engine, master_seed, start as u64..end as u64)?;
        for row in rows {
            for (a, p) in acc.iter_mut().zip(row) {
                *a += p;
            }
        }
        start = end;
    }
    acc.iter_mut().for_each(|a| *a /= n as f64);
    Ok(acc)
}

fn distributions(engine: &Engine<'_>, seed: u64, streams: std::ops::Range<u64>) -> Result<Vec<Vec<f64>>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        streams
            .into_par_iter()
            .map(|s| trajectory_distribution(engine, seed, s))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        streams.map(|s| trajectory_distribution(engine, seed, s)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyStats {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub report: TrajectoryReport,
}

/// Per-record mean and variance of the circuit's first entropy quantity.
pub fn entropy_ensemble(
    circuit: &NoisyCircuit,
    spec: &SamplerSpec,
    n: usize,
    master_seed: u64,
) -> Result<EntropyStats> {
    let q = circuit
        .quantities
        .iter()
        .position(|q| matches!(q, Quantity::Entropy { .. }))
        .ok_or_else(|| Error::Contract("circuit records no entropy".into()))?;
    let report = run_ensemble(circuit, spec, n, master_seed)?;
    Ok(EntropyStats {
        mean: report.series(&report.mean, q),
        variance: report.series(&report.variance, q),
        report,
    })
}
