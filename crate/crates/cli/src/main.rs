//! `noisy-traj`: build benchmark circuits, factorize channels and run
//! trajectory ensembles from the command line.
//!
//! Exit codes: 0 ok, 1 I/O or internal failure, 2 configuration error,
//! 3 capacity exceeded, 4 non-physical factorization. Worker threads are
//! taken from `RAYON_NUM_THREADS` (default: all cores).

mod config;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use noisy_traj::angles::AngleKind;
use noisy_traj::channel::ChannelKind;
use noisy_traj::sampler::{DampingAngles, SamplerMethod, SamplerSpec};

use config::{Backend, Benchmark, RunConfig};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn capacity(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<noisy_traj::Error> for CliError {
    fn from(e: noisy_traj::Error) -> Self {
        use noisy_traj::Error as E;
        let code = match &e {
            E::Capacity(_) => 3,
            E::NonPhysical { .. } => 4,
            E::Quadrature(_) => 1,
            _ => 2,
        };
        Self { code, message: e.to_string() }
    }
}

#[derive(Parser, Debug)]
#[command(name = "noisy-traj", version, about = "Digital and analog trajectory simulation of noisy circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Emit a benchmark circuit as JSON.
    Build {
        #[command(flatten)]
        bench: BenchArgs,
        /// Write the circuit here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Factor a Pauli channel into single-string channels.
    Factorize(FactorizeArgs),
    /// Run a trajectory ensemble (or the exact density-matrix backend).
    Simulate {
        #[command(flatten)]
        bench: BenchArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Digital versus analog variance per record point.
    Compare {
        #[command(flatten)]
        bench: BenchArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Draw angles from a distribution and report its moments.
    SampleDist(SampleDistArgs),
}

#[derive(Args, Debug, Default)]
struct BenchArgs {
    /// JSON run configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// ising2d, xy_chain, maxcut, tilted_ising, toy_model or custom.
    #[arg(long)]
    benchmark: Option<String>,
    /// Circuit JSON file (implies --benchmark custom).
    #[arg(long)]
    circuit: Option<PathBuf>,
    #[arg(long)]
    lx: Option<usize>,
    #[arg(long)]
    ly: Option<usize>,
    /// Transverse field of the 2D Ising model.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Chain or graph size; number of gates for the toy model.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    /// Number of annealing steps for maxcut.
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    graph_seed: Option<u64>,
    #[arg(long)]
    hx: Option<f64>,
    #[arg(long)]
    hz: Option<f64>,
    /// Flip probability of the toy model.
    #[arg(long)]
    q: Option<f64>,
    /// Depolarizing strength after each two-qubit gate.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Channel after each two-qubit gate, as JSON, e.g. '{"type":"amplitude_damping","gamma":0.01}'.
    #[arg(long, conflicts_with = "epsilon")]
    noise: Option<String>,
    /// Strip all channels.
    #[arg(long, conflicts_with_all = ["epsilon", "noise"])]
    noiseless: bool,
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// digital, analog (factorized) or analog_random_rotation.
    #[arg(long)]
    sampler: Option<String>,
    /// gaussian, discrete, uniform, exponential, cauchy, semicircular or raised-cosine.
    #[arg(long)]
    angle_dist: Option<String>,
    /// Angle law for analog amplitude damping: discrete or gaussian.
    #[arg(long)]
    damping_angles: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_traj: Option<usize>,
    #[arg(long)]
    target_sem: Option<f64>,
    #[arg(long)]
    max_traj: Option<usize>,
    /// Use the exact density-matrix backend.
    #[arg(long)]
    exact: bool,
    /// Report the k most likely final bitstrings.
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FactorizeArgs {
    /// Channel spec JSON file, e.g. {"type": "pauli", "support": [0], "probabilities": {"I": 0.9, "X": 0.1}}.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Channel family: depol or pauli.
    #[arg(long)]
    channel: Option<String>,
    #[arg(long, default_value_t = 1)]
    qubits: usize,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Probability map as JSON, for --channel pauli.
    #[arg(long)]
    probabilities: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SampleDistArgs {
    #[arg(long, default_value = "gaussian")]
    angle_dist: String,
    #[arg(long)]
    q: f64,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn parse<T: std::str::FromStr<Err = noisy_traj::Error>>(s: &str) -> Result<T, CliError> {
    s.parse().map_err(|e: noisy_traj::Error| CliError::config(e.to_string()))
}

impl BenchArgs {
    fn given(&self) -> Vec<&'static str> {
        let flags: [(&'static str, bool); 14] = [
            ("lx", self.lx.is_some()),
            ("ly", self.ly.is_some()),
            ("h", self.h.is_some()),
            ("dt", self.dt.is_some()),
            ("steps", self.steps.is_some()),
            ("n", self.n.is_some()),
            ("tau", self.tau.is_some()),
            ("t", self.t.is_some()),
            ("graph-seed", self.graph_seed.is_some()),
            ("hx", self.hx.is_some()),
            ("hz", self.hz.is_some()),
            ("q", self.q.is_some()),
            ("epsilon", self.epsilon.is_some()),
            ("noise", self.noise.is_some() || self.noiseless),
        ];
        flags.iter().filter(|f| f.1).map(|f| f.0).collect()
    }

    fn noise_override(&self) -> Result<Option<Option<ChannelKind>>, CliError> {
        if self.noiseless {
            return Ok(Some(None));
        }
        if let Some(e) = self.epsilon {
            return Ok(Some(Some(ChannelKind::Depolarizing { epsilon: e })));
        }
        match &self.noise {
            None => Ok(None),
            Some(text) => serde_json::from_str(text)
                .map(|k| Some(Some(k)))
                .map_err(|e| CliError::config(format!("--noise: {e}"))),
        }
    }

    /// Benchmark from `--config` (if any) with the flags applied on top.
    fn resolve(&self, base: Option<Benchmark>) -> Result<Benchmark, CliError> {
        let mut b = match (&self.circuit, &self.benchmark, base) {
            (Some(path), name, _) => {
                if name.as_deref().is_some_and(|n| n != "custom") {
                    return Err(CliError::config("--circuit only goes with --benchmark custom"));
                }
                Benchmark::Custom { circuit: path.clone() }
            }
            (None, Some(name), Some(base)) if benchmark_name(&base) == name => base,
            (None, Some(name), _) => Benchmark::default_for(name)?,
            (None, None, Some(base)) => base,
            (None, None, None) => return Err(CliError::config("give --benchmark, --circuit or --config")),
        };
        let given = self.given();
        let allowed: &[&str] = match &b {
            Benchmark::Ising2d { .. } => &["lx", "ly", "h", "dt", "steps", "epsilon", "noise"],
            Benchmark::XyChain { .. } => &["n", "tau", "steps", "epsilon", "noise"],
            Benchmark::Maxcut { .. } => &["n", "graph-seed", "t", "dt", "epsilon", "noise"],
            Benchmark::TiltedIsing { .. } => &["n", "hx", "hz", "dt", "steps", "epsilon", "noise"],
            Benchmark::ToyModel { .. } => &["q", "n"],
            Benchmark::Custom { .. } => &[],
        };
        if let Some(bad) = given.iter().find(|f| !allowed.contains(f)) {
            return Err(CliError::config(format!(
                "--{bad} does not apply to benchmark {}",
                benchmark_name(&b)
            )));
        }
        let noise_flag = self.noise_override()?;
        fn set<T: Clone>(slot: &mut T, v: &Option<T>) {
            if let Some(v) = v {
                *slot = v.clone();
            }
        }
        match &mut b {
            Benchmark::Ising2d { lx, ly, h, dt, steps, noise } => {
                set(lx, &self.lx);
                set(ly, &self.ly);
                set(h, &self.h);
                set(dt, &self.dt);
                set(steps, &self.steps);
                set(noise, &noise_flag);
            }
            Benchmark::XyChain { n, tau, steps, noise } => {
                set(n, &self.n);
                set(tau, &self.tau);
                set(steps, &self.steps);
                set(noise, &noise_flag);
            }
            Benchmark::Maxcut { n, graph_seed, t, dt, noise } => {
                set(n, &self.n);
                set(graph_seed, &self.graph_seed);
                set(t, &self.t);
                set(dt, &self.dt);
                set(noise, &noise_flag);
            }
            Benchmark::TiltedIsing { n, hx, hz, dt, steps, noise } => {
                set(n, &self.n);
                set(hx, &self.hx);
                set(hz, &self.hz);
                set(dt, &self.dt);
                set(steps, &self.steps);
                set(noise, &noise_flag);
            }
            Benchmark::ToyModel { q, n } => {
                set(q, &self.q);
                set(n, &self.n);
            }
            Benchmark::Custom { .. } => {}
        }
        Ok(b)
    }
}

fn benchmark_name(b: &Benchmark) -> &'static str {
    match b {
        Benchmark::Ising2d { .. } => "ising2d",
        Benchmark::XyChain { .. } => "xy_chain",
        Benchmark::Maxcut { .. } => "maxcut",
        Benchmark::TiltedIsing { .. } => "tilted_ising",
        Benchmark::ToyModel { .. } => "toy_model",
        Benchmark::Custom { .. } => "custom",
    }
}

fn resolve_run(bench: &BenchArgs, run: &RunArgs) -> Result<RunConfig, CliError> {
    let base = bench.config.as_deref().map(RunConfig::load).transpose()?;
    let benchmark = bench.resolve(base.as_ref().map(|c| c.benchmark.clone()))?;
    let mut cfg = base.unwrap_or(RunConfig {
        benchmark: benchmark.clone(),
        sampler: SamplerSpec::analog(AngleKind::Gaussian),
        master_seed: 0,
        n_trajectories: None,
        target_sem: None,
        max_trajectories: 1_000_000,
        backend: Backend::Statevector,
        top_k: None,
        output_dir: None,
    });
    cfg.benchmark = benchmark;
    if let Some(s) = &run.sampler {
        cfg.sampler.method = parse::<SamplerMethod>(s)?;
    }
    if let Some(s) = &run.angle_dist {
        cfg.sampler.angle_dist = parse::<AngleKind>(s)?;
    }
    if let Some(s) = &run.damping_angles {
        cfg.sampler.damping_angles = parse::<DampingAngles>(s)?;
    }
    if let Some(s) = run.seed {
        cfg.master_seed = s;
    }
    if let Some(n) = run.n_traj {
        cfg.n_trajectories = Some(n);
        cfg.target_sem = None;
    }
    if let Some(t) = run.target_sem {
        if run.n_traj.is_some() {
            return Err(CliError::config("--n-traj and --target-sem are mutually exclusive"));
        }
        cfg.target_sem = Some(t);
        cfg.n_trajectories = None;
    }
    if let Some(m) = run.max_traj {
        cfg.max_trajectories = m;
    }
    if run.exact {
        cfg.backend = Backend::ExactDm;
    }
    if run.top_k.is_some() {
        cfg.top_k = run.top_k;
    }
    if run.out_dir.is_some() {
        cfg.output_dir = run.out_dir.clone();
    }
    Ok(cfg)
}

/// Writes every file or none: contents go to temporary names first and are
/// renamed only once all writes succeeded.
pub fn write_all(dir: &Path, files: &[(&str, String)]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
    let tmp: Vec<PathBuf> = files.iter().map(|(n, _)| dir.join(format!(".{n}.partial"))).collect();
    let cleanup = |tmp: &[PathBuf]| tmp.iter().for_each(|p| drop(std::fs::remove_file(p)));
    for ((_, body), path) in files.iter().zip(&tmp) {
        if let Err(e) = std::fs::write(path, body) {
            cleanup(&tmp);
            return Err(CliError::io(format!("{}: {e}", path.display())));
        }
    }
    for ((name, _), path) in files.iter().zip(&tmp) {
        std::fs::rename(path, dir.join(name)).map_err(|e| CliError::io(format!("{name}: {e}")))?;
    }
    Ok(())
}

/// Prints to stdout; a closed pipe is not an error.
pub fn print_stdout(text: &str) -> Result<(), CliError> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::io(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn emit(out: Option<&Path>, name: &str, body: String) -> Result<(), CliError> {
    match out {
        None => print_stdout(&body),
        Some(path) => {
            let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let file = path.file_name().and_then(|f| f.to_str()).unwrap_or(name);
            write_all(dir, &[(file, body)])
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Build { bench, out } => {
            let base = bench.config.as_deref().map(RunConfig::load).transpose()?;
            let b = bench.resolve(base.map(|c| c.benchmark))?;
            let circuit = b.build()?;
            emit(out.as_deref(), "circuit.json", run::to_json(&circuit)?)
        }
        Command::Factorize(args) => {
            let (out, body) = run::factorize_cmd(&args)?;
            emit(out.as_deref(), "factorization.json", body)
        }
        Command::Simulate { bench, run } => run::simulate(&resolve_run(&bench, &run)?),
        Command::Compare { bench, run } => run::compare(&resolve_run(&bench, &run)?),
        Command::SampleDist(args) => run::sample_dist(&args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
