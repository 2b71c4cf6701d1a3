use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use noisy_traj::channel::ChannelKind;
use noisy_traj::circuits::{
    build_ising_2d, build_maxcut_floquet, build_tilted_ising, build_toy_model, build_xy_chain,
    random_3_regular_graph, NoisyCircuit,
};
use noisy_traj::oracle::MAX_ORACLE_QUBITS;
use noisy_traj::sampler::SamplerSpec;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Benchmark {
    Ising2d {
        lx: usize,
        ly: usize,
        h: f64,
        dt: f64,
        steps: usize,
        noise: Option<ChannelKind>,
    },
    XyChain {
        n: usize,
        tau: f64,
        steps: usize,
        noise: Option<ChannelKind>,
    },
    Maxcut {
        n: usize,
        graph_seed: u64,
        t: usize,
        dt: f64,
        noise: Option<ChannelKind>,
    },
    TiltedIsing {
        n: usize,
        hx: f64,
        hz: f64,
        dt: f64,
        steps: usize,
        noise: Option<ChannelKind>,
    },
    ToyModel {
        q: f64,
        n: usize,
    },
    /// Circuit JSON read from a file.
    Custom { circuit: PathBuf },
}

pub const BENCHMARK_NAMES: [&str; 6] = ["ising2d", "xy_chain", "maxcut", "tilted_ising", "toy_model", "custom"];

fn depol(epsilon: f64) -> Option<ChannelKind> {
    Some(ChannelKind::Depolarizing { epsilon })
}

impl Benchmark {
    pub fn default_for(name: &str) -> Result<Self, CliError> {
        Ok(match name {
            "ising2d" => Benchmark::Ising2d {
                lx: 4,
                ly: 4,
                h: 1.0,
                dt: 0.1,
                steps: 30,
                noise: depol(0.001),
            },
            "xy_chain" => Benchmark::XyChain {
                n: 8,
                tau: 0.25,
                steps: 20,
                noise: depol(0.001),
            },
            "maxcut" => Benchmark::Maxcut {
                n: 16,
                graph_seed: 0,
                t: 40,
                dt: 0.25,
                noise: depol(0.001),
            },
            "tilted_ising" => Benchmark::TiltedIsing {
                n: 10,
                hx: 0.9045,
                hz: 0.8090,
                dt: 0.3,
                steps: 50,
                noise: depol(0.003),
            },
            "toy_model" => Benchmark::ToyModel { q: 0.01, n: 50 },
            "custom" => return Err(CliError::config("benchmark custom needs --circuit FILE")),
            other => {
                return Err(CliError::config(format!(
                    "unknown benchmark {other:?}; expected one of {}",
                    BENCHMARK_NAMES.join(", ")
                )))
            }
        })
    }

    pub fn build(&self) -> Result<NoisyCircuit, CliError> {
        let c = match self {
            Benchmark::Ising2d { lx, ly, h, dt, steps, noise } => {
                build_ising_2d(*lx, *ly, *h, *dt, *steps, noise.as_ref())?
            }
            Benchmark::XyChain { n, tau, steps, noise } => build_xy_chain(*n, *tau, *steps, noise.as_ref())?,
            Benchmark::Maxcut { n, graph_seed, t, dt, noise } => {
                let g = random_3_regular_graph(*n, *graph_seed)?;
                build_maxcut_floquet(&g, *t, *dt, noise.as_ref())?
            }
            Benchmark::TiltedIsing { n, hx, hz, dt, steps, noise } => {
                build_tilted_ising(*n, *hx, *hz, *dt, *steps, noise.as_ref())?
            }
            Benchmark::ToyModel { q, n } => build_toy_model(*q, *n)?,
            Benchmark::Custom { circuit } => {
                let text = std::fs::read_to_string(circuit).map_err(|e| {
                    CliError::config(format!("cannot read circuit {}: {e}", circuit.display()))
                })?;
                let c: NoisyCircuit = serde_json::from_str(&text).map_err(|e| {
                    CliError::config(format!("{}: line {} column {}: {e}", circuit.display(), e.line(), e.column()))
                })?;
                c.validate()?;
                c
            }
        };
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Statevector,
    ExactDm,
}

fn default_max_trajectories() -> usize {
    1_000_000
}

/// Fully resolved run description; embedded verbatim in every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub benchmark: Benchmark,
    pub sampler: SamplerSpec,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub n_trajectories: Option<usize>,
    #[serde(default)]
    pub target_sem: Option<f64>,
    #[serde(default = "default_max_trajectories")]
    pub max_trajectories: usize,
    #[serde(default)]
    pub backend: Backend,
    /// Also report the `k` most likely final bitstrings.
    #[serde(default)]
    pub top_k: Option<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::config(format!("{}: line {} column {}: {e}", path.display(), e.line(), e.column()))
        })
    }

    /// Checks the trajectory budget and backend limits against `circuit`.
    pub fn validate(&self, circuit: &NoisyCircuit, needs_budget: bool) -> Result<(), CliError> {
        match (self.backend, self.n_trajectories, self.target_sem) {
            (_, Some(_), Some(_)) => {
                return Err(CliError::config("set only one of n_trajectories and target_sem"))
            }
            (Backend::Statevector, None, None) if needs_budget => {
                return Err(CliError::config("set one of n_trajectories (--n-traj) and target_sem (--target-sem)"))
            }
            _ => {}
        }
        if self.n_trajectories == Some(0) {
            return Err(CliError::config("n_trajectories must be positive"));
        }
        if let Some(t) = self.target_sem {
            if !(t > 0.0) {
                return Err(CliError::config(format!("target_sem {t} must be positive")));
            }
        }
        if self.backend == Backend::ExactDm && circuit.num_qubits > MAX_ORACLE_QUBITS {
            return Err(CliError::capacity(format!(
                "exact density-matrix backend supports at most {MAX_ORACLE_QUBITS} qubits, circuit has {}",
                circuit.num_qubits
            )));
        }
        Ok(())
    }
}
