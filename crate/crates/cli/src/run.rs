use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Value};

use noisy_traj::angles::{closed_form_report, AngleDistribution, AngleKind};
use noisy_traj::channel::{NoiseChannel, PauliMap};
use noisy_traj::circuits::NoisyCircuit;
use noisy_traj::factorize::{factorize, pauli_fidelities, verify_factorization};
use noisy_traj::harness::{
    average_distribution, ensemble, trajectory_rng, variance_ratio, Engine, EnsembleOptions,
    TrajectoryReport,
};
use noisy_traj::oracle::{evolve_circuit_dm, final_density_matrix};
use noisy_traj::sampler::{SamplerMethod, SamplerSpec};
use noisy_traj::state::{index_to_bitstring, top_k};

use crate::config::{Backend, Benchmark, RunConfig};
use crate::{write_all, CliError, FactorizeArgs, SampleDistArgs};

const KL_CONVENTION: &str = "top-k restriction, both distributions renormalized over the k states, single-trajectory weights floored at 1e-12, absolute value reported";
const STAGGERED_CONVENTION: &str = "staggered magnetization weights qubit j by (-1)^j, qubit 0 positive";

pub fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(v).map_err(|e| CliError::io(format!("serialization failed: {e}")))
}

fn factorization_json(channel: &NoiseChannel) -> Result<Value, CliError> {
    let p = channel.expand_to_pauli()?;
    let f = factorize(&p)?;
    let residual = verify_factorization(&p, &f.factors)?;
    Ok(json!({
        "channel": channel,
        "num_qubits": f.num_qubits,
        "fidelities": pauli_fidelities(&p)?,
        "factors": f.factors,
        "residual": residual,
        "all_physical": f.all_physical,
        "worst_unphysical": f.worst_unphysical().map(|(s, q)| json!({"string": s, "q": q})),
    }))
}

pub fn factorize_cmd(args: &FactorizeArgs) -> Result<(Option<std::path::PathBuf>, String), CliError> {
    let channel = match (&args.config, args.channel.as_deref()) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<NoiseChannel>(&text).map_err(|e| {
                CliError::config(format!("{}: line {} column {}: {e}", path.display(), e.line(), e.column()))
            })?
        }
        (None, Some("depol" | "depolarizing")) => {
            let eps = args.epsilon.ok_or_else(|| CliError::config("--channel depol needs --epsilon"))?;
            NoiseChannel::depolarizing(eps, (0..args.qubits).collect())
        }
        (None, Some("pauli")) => {
            let text = args
                .probabilities
                .as_deref()
                .ok_or_else(|| CliError::config("--channel pauli needs --probabilities"))?;
            let map: PauliMap =
                serde_json::from_str(text).map_err(|e| CliError::config(format!("--probabilities: {e}")))?;
            let m = map.keys().next().map(|s| s.num_qubits()).unwrap_or(args.qubits);
            NoiseChannel::pauli(map, (0..m).collect())
        }
        (None, Some(other)) => return Err(CliError::config(format!("unknown channel {other:?}; use depol or pauli"))),
        (None, None) => return Err(CliError::config("give --channel or --config")),
    };
    channel.validate().map_err(|d| CliError::config(format!("invalid channel: {d}")))?;
    if !channel.is_pauli() {
        return Err(CliError::config("only Pauli and depolarizing channels can be factorized"));
    }
    let report = factorization_json(&channel)?;
    if report["all_physical"] == json!(false) {
        eprintln!(
            "warning: factorization is non-physical ({}); the factorized sampler will refuse it, use analog_random_rotation",
            report["worst_unphysical"]
        );
    }
    Ok((args.out.clone(), to_json(&report)?))
}

/// One entry per distinct channel in the circuit, with factorization
/// diagnostics for Pauli channels. Also logged to stderr.
fn channel_diagnostics(circuit: &NoisyCircuit, spec: &SamplerSpec) -> Result<Vec<Value>, CliError> {
    let mut seen: Vec<&NoiseChannel> = Vec::new();
    for op in &circuit.ops {
        if let Some(ch) = &op.noise {
            if !seen.iter().any(|s| s.kind == ch.kind && s.support.len() == ch.support.len()) {
                seen.push(ch);
            }
        }
    }
    let mut out = Vec::new();
    for ch in seen {
        if ch.is_pauli() {
            let local = ch.with_support((0..ch.support.len()).collect());
            let d = factorization_json(&local)?;
            if spec.method == SamplerMethod::AnalogFactorized {
                eprintln!(
                    "factorized {} on {} qubit(s): residual {:e}, all_physical {}",
                    serde_json::to_string(&ch.kind).unwrap_or_default(),
                    ch.support.len(),
                    d["residual"].as_f64().unwrap_or(f64::NAN),
                    d["all_physical"]
                );
            }
            out.push(d);
        } else {
            out.push(json!({ "channel": ch }));
        }
    }
    Ok(out)
}

fn summary_json(report: &TrajectoryReport) -> Value {
    let mut v = serde_json::to_value(report).unwrap_or(Value::Null);
    if let Value::Object(m) = &mut v {
        m.remove("values");
    }
    v
}

fn top_k_rows(probs: &[f64], k: usize, n: usize) -> Vec<Value> {
    top_k(probs, k)
        .into_iter()
        .map(|(i, p)| json!({ "bitstring": index_to_bitstring(i, n), "probability": p }))
        .collect()
}

fn top_k_csv(rows: &[Value]) -> String {
    let mut s = String::from("bitstring,probability\n");
    for r in rows {
        let _ = writeln!(s, "{},{:e}", r["bitstring"].as_str().unwrap_or(""), r["probability"].as_f64().unwrap_or(0.0));
    }
    s
}

/// Full circuit only for custom runs; builders are reproducible from the config.
fn circuit_json(cfg: &RunConfig, c: &NoisyCircuit) -> Value {
    let mut v = json!({
        "num_qubits": c.num_qubits,
        "num_ops": c.ops.len(),
        "noise_count": c.noise_count(),
        "record_points": c.record_points.len(),
    });
    if matches!(cfg.benchmark, Benchmark::Custom { .. }) {
        v["definition"] = serde_json::to_value(c).unwrap_or(Value::Null);
    }
    v
}

fn finish<'a>(cfg: &RunConfig, json_name: &'a str, body: Value, mut files: Vec<(&'a str, String)>) -> Result<(), CliError> {
    let text = to_json(&body)?;
    match &cfg.output_dir {
        None => crate::print_stdout(&text),
        Some(dir) => {
            files.insert(0, (json_name, text));
            write_all(dir, &files)
        }
    }
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let circuit = cfg.benchmark.build()?;
    cfg.validate(&circuit, true)?;
    let diagnostics = channel_diagnostics(&circuit, &cfg.sampler)?;
    let n = circuit.num_qubits;
    let mut body = json!({
        "config": cfg,
        "circuit": circuit_json(cfg, &circuit),
        "channels": diagnostics,
        "conventions": { "staggered_z": STAGGERED_CONVENTION, "expectations": "unnormalized <psi|O|psi> per trajectory" },
    });
    let mut files = Vec::new();
    match cfg.backend {
        Backend::Statevector => {
            let engine = Engine::new(&circuit, cfg.sampler)?;
            let report = ensemble(
                &engine,
                EnsembleOptions {
                    master_seed: cfg.master_seed,
                    stream_offset: 0,
                    target_sem: cfg.target_sem,
                    max_trajectories: cfg.n_trajectories.unwrap_or(cfg.max_trajectories),
                },
            )?;
            body["report"] = summary_json(&report);
            files.push(("raw.csv", report.raw_csv()));
            files.push(("summary.csv", report.summary_csv()));
            if let Some(k) = cfg.top_k {
                let probs = average_distribution(&engine, report.trajectories_run, cfg.master_seed)?;
                let rows = top_k_rows(&probs, k, n);
                files.push(("top_k.csv", top_k_csv(&rows)));
                body["top_k"] = Value::Array(rows);
            }
        }
        Backend::ExactDm => {
            let series = evolve_circuit_dm(&circuit)?;
            let names: Vec<&str> = circuit.quantities.iter().map(|q| q.name()).collect();
            let mut csv = String::from("record_point,observable_name,value\n");
            for (point, row) in circuit.record_points.iter().zip(&series) {
                for (name, v) in names.iter().zip(row) {
                    let _ = writeln!(csv, "{point},{name},{v:e}");
                }
            }
            body["exact"] = json!({
                "quantities": names,
                "record_points": circuit.record_points,
                "values": series,
            });
            files.push(("exact.csv", csv));
            if let Some(k) = cfg.top_k {
                let rows = top_k_rows(&final_density_matrix(&circuit)?.probabilities(), k, n);
                files.push(("top_k.csv", top_k_csv(&rows)));
                body["top_k"] = Value::Array(rows);
            }
        }
    }
    finish(cfg, "summary.json", body, files)
}

pub fn compare(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.sampler.method == SamplerMethod::Digital {
        return Err(CliError::config("compare needs an analog --sampler to set against digital"));
    }
    if cfg.backend == Backend::ExactDm {
        return Err(CliError::config("compare runs trajectories; drop --exact"));
    }
    let n = cfg
        .n_trajectories
        .ok_or_else(|| CliError::config("compare needs --n-traj"))?;
    let circuit = cfg.benchmark.build()?;
    cfg.validate(&circuit, true)?;
    let diagnostics = channel_diagnostics(&circuit, &cfg.sampler)?;
    let v = variance_ratio(&circuit, &cfg.sampler, n, cfg.master_seed)?;
    let mut csv = String::from("record_point,observable_name,digital_variance,analog_variance,ratio\n");
    let nq = circuit.quantities.len();
    for (r, point) in circuit.record_points.iter().enumerate() {
        for (k, q) in circuit.quantities.iter().enumerate() {
            let i = r * nq + k;
            let _ = writeln!(
                csv,
                "{point},{},{:e},{:e},{:e}",
                q.name(),
                v.digital.variance[i],
                v.analog.variance[i],
                v.ratio[i]
            );
        }
    }
    let body = json!({
        "config": cfg,
        "circuit": circuit_json(cfg, &circuit),
        "channels": diagnostics,
        "digital": summary_json(&v.digital),
        "analog": summary_json(&v.analog),
        "ratio": v.ratio,
        "ratio_convention": "var(digital) / var(analog); 0/0 reported as 1",
        "kl_convention": KL_CONVENTION,
    });
    finish(cfg, "compare.json", body, vec![("variance_ratio.csv", csv)])
}

pub fn sample_dist(args: &SampleDistArgs) -> Result<(), CliError> {
    let kind: AngleKind = crate::parse(&args.angle_dist)?;
    let dist = AngleDistribution::for_probability(kind, args.q)?;
    let m = dist.moments()?;
    let mut rng = trajectory_rng(args.seed, 0);
    let draws: Vec<f64> = (0..args.samples).map(|_| dist.sample(&mut rng)).collect();
    let count = draws.len().max(1) as f64;
    let sampled_sin2 = draws.iter().map(|t| t.sin().powi(2)).sum::<f64>() / count;
    let closed_forms = if args.q > 0.0 { closed_form_report(args.q)? } else { Vec::new() };
    let mut quantiles = BTreeMap::new();
    if !draws.is_empty() {
        let mut sorted = draws.clone();
        sorted.sort_by(f64::total_cmp);
        for p in [0.001, 0.5, 0.999] {
            let i = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
            quantiles.insert(format!("{p}"), sorted[i]);
        }
    }
    let body = json!({
        "distribution": dist,
        "q": args.q,
        "seed": args.seed,
        "moments": {
            "norm": m.norm,
            "sin2": m.sin2,
            "sin4": m.sin4,
            "sin_cos": m.sin_cos,
        },
        "samples": {
            "count": draws.len(),
            "mean_sin2": sampled_sin2,
            "quantiles": quantiles,
        },
        "closed_form_checks": closed_forms,
    });
    let text = to_json(&body)?;
    match &args.out_dir {
        None => crate::print_stdout(&text),
        Some(dir) => {
            let mut csv = String::from("theta\n");
            for t in &draws {
                let _ = writeln!(csv, "{t:e}");
            }
            write_all(dir, &[("moments.json", text), ("draws.csv", csv)])
        }
    }
}
