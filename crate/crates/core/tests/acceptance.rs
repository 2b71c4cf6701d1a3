//! End-to-end acceptance checks. Prints one `criterion N: PASS|FAIL` line
//! per criterion and exits non-zero if any fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use noisy_traj::angles::{closed_form_report, solve_scale, AngleDistribution, AngleKind, SIN2_TOL};
use noisy_traj::channel::{ChannelKind, NoiseChannel, PauliMap};
use noisy_traj::circuits::*;
use noisy_traj::factorize::{factorize, pauli_fidelities, verify_factorization};
use noisy_traj::harness::*;
use noisy_traj::oracle::evolve_circuit_dm;
use noisy_traj::pauli::{enumerate_strings, PauliString};
use noisy_traj::sampler::{CompiledChannel, NoiseAction, NoiseEvent, SamplerSpec};
use noisy_traj::state::Observable;

type Outcome = (bool, String);

fn depol(eps: f64) -> ChannelKind {
    ChannelKind::Depolarizing { epsilon: eps }
}

/// Uniform point on the probability simplex over all `4^m` strings.
fn simplex_channel(m: usize, rng: &mut ChaCha8Rng) -> PauliMap {
    let strings = enumerate_strings(m).unwrap();
    let w: Vec<f64> = strings.iter().map(|_| Exp1.sample(rng)).collect();
    let z: f64 = w.iter().sum();
    strings.into_iter().zip(w).map(|(s, x)| (s, x / z)).collect()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_residual = 0.0f64;
    let mut worst_ptm = 0.0f64;
    let mut rejected = 0;
    for (m, count) in [(1usize, 1000usize), (2, 100)] {
        let mut accepted = 0;
        while accepted < count {
            let map = simplex_channel(m, &mut rng);
            if pauli_fidelities(&map).unwrap().values().any(|&l| l <= 0.0) {
                rejected += 1;
                continue;
            }
            accepted += 1;
            let f = factorize(&map).unwrap();
            worst_residual = worst_residual.max(verify_factorization(&map, &f.factors).unwrap());
            let factors: Vec<(PauliString, f64)> = f.factors.iter().map(|(s, q)| (*s, *q)).collect();
            worst_ptm = worst_ptm.max(max_abs_diff(&composed_ptm(&factors, m), &pauli_map_ptm(&map)));
        }
    }
    (
        worst_residual < 1e-12 && worst_ptm < 1e-12,
        format!("max residual {worst_residual:.2e}, max transfer-matrix diff {worst_ptm:.2e} (tol 1e-12; {rejected} rejected draws)"),
    )
}

fn criterion_2() -> Outcome {
    let mut worst_q = 0.0f64;
    let mut worst_var = 0.0f64;
    for m in [1usize, 2] {
        for eps in [1e-3, 1e-2, 0.1] {
            let f = factorize(&NoiseChannel::depolarizing(eps, (0..m).collect()).expand_to_pauli().unwrap()).unwrap();
            let want = 0.5 - 0.5 * (1.0 - eps).powf(2.0 / 4f64.powi(m as i32));
            let want_var = -(1.0 - eps).ln() / 4f64.powi(m as i32);
            for q in f.factors.values() {
                worst_q = worst_q.max((q - want).abs());
                let sigma = solve_scale(AngleKind::Gaussian, *q).unwrap();
                worst_var = worst_var.max((sigma * sigma - want_var).abs());
            }
        }
    }
    (
        worst_q < 1e-14 && worst_var < 1e-14,
        format!("max |q_S - closed form| {worst_q:.2e}, max |sigma^2 - closed form| {worst_var:.2e} (tol 1e-14)"),
    )
}

fn all_paulis(n: usize) -> Vec<(String, Observable)> {
    enumerate_strings(n)
        .unwrap()
        .into_iter()
        .skip(1)
        .map(|s| (s.to_string(), Observable::PauliSum(vec![(1.0, s)])))
        .collect()
}

fn random_two_qubit_circuit(seed: u64) -> NoisyCircuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = NoisyCircuit::new(2, InitialState::Basis(0));
    for (name, obs) in all_paulis(2) {
        c.add_observable(&name, obs);
    }
    let noise = depol(0.01);
    for i in 0..10 {
        let angle = rng.random_range(-1.5..1.5);
        if i % 2 == 0 {
            let gate = [GateKind::Rx, GateKind::Ry, GateKind::Rz][rng.random_range(0..3)];
            c.push(gate, vec![rng.random_range(0..2)], angle, None);
        } else {
            let gate = [GateKind::Rxx, GateKind::Ryy, GateKind::Rzz][rng.random_range(0..3)];
            c.push(gate, vec![0, 1], angle, Some(&noise));
        }
    }
    c.record();
    c
}

fn random_one_qubit_circuit(channel: &ChannelKind, seed: u64) -> NoisyCircuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = NoisyCircuit::new(1, InitialState::Basis(0));
    for (name, obs) in all_paulis(1) {
        c.add_observable(&name, obs);
    }
    for _ in 0..10 {
        let gate = [GateKind::Rx, GateKind::Ry, GateKind::Rz][rng.random_range(0..3)];
        c.push(gate, vec![0], rng.random_range(-1.5..1.5), Some(channel));
    }
    c.record();
    c
}

/// Largest `|mean - exact| / SEM` over all quantities at the final record.
fn worst_z(circuit: &NoisyCircuit, spec: &SamplerSpec, n: usize, seed: u64) -> f64 {
    let exact = evolve_circuit_dm(circuit).unwrap();
    let r = run_ensemble(circuit, spec, n, seed).unwrap();
    let last = exact.len() - 1;
    exact[last]
        .iter()
        .enumerate()
        .map(|(k, want)| {
            let d = (r.mean_at(last, k) - want).abs();
            let se = r.sem_at(last, k);
            if d <= 1e-12 { 0.0 } else { d / se }
        })
        .fold(0.0, f64::max)
}

fn criterion_3() -> Outcome {
    let n = 100_000;
    let mut details = Vec::new();
    let mut ok = true;
    let two = random_two_qubit_circuit(3);
    for spec in [
        SamplerSpec::digital(),
        SamplerSpec::analog(AngleKind::Gaussian),
        SamplerSpec::analog(AngleKind::Discrete),
        SamplerSpec::random_rotation(AngleKind::Gaussian),
    ] {
        let z = worst_z(&two, &spec, n, 30);
        ok &= z <= 5.0;
        details.push(format!("depol/{}-{}: {z:.2}", spec.method.name(), spec.angle_dist.name()));
    }
    let x: PauliString = "X".parse().unwrap();
    for (label, ch) in [
        ("coherent", ChannelKind::Coherent { axis: x, alpha: 0.3, q: 0.1 }),
        ("damping", ChannelKind::AmplitudeDamping { gamma: 0.05 }),
    ] {
        let c = random_one_qubit_circuit(&ch, 31);
        for spec in [SamplerSpec::digital(), SamplerSpec::analog(AngleKind::Gaussian)] {
            let z = worst_z(&c, &spec, n, 32);
            ok &= z <= 5.0;
            details.push(format!("{label}/{}: {z:.2}", spec.method.name()));
        }
    }
    (ok, format!("max |mean - exact|/SEM (tol 5): {}", details.join(", ")))
}

fn bootstrap_variance_se(values: &[f64], resamples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = values.len();
    let vars: Vec<f64> = (0..resamples)
        .map(|_| {
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let v = values[rng.random_range(0..n)];
                s += v;
                s2 += v * v;
            }
            let m = s / n as f64;
            (s2 - n as f64 * m * m) / (n as f64 - 1.0)
        })
        .collect();
    let mean = vars.iter().sum::<f64>() / resamples as f64;
    (vars.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (resamples as f64 - 1.0)).sqrt()
}

fn criterion_4() -> Outcome {
    let (q, n) = (0.01, 50u32);
    let c = build_toy_model(q, n as usize).unwrap();
    let mut ok = true;
    let mut details = Vec::new();
    let mut variances = Vec::new();
    let mut formula = Vec::new();
    let mut bses = Vec::new();
    for (i, kind) in [AngleKind::Gaussian, AngleKind::Discrete].into_iter().enumerate() {
        let r = run_ensemble(&c, &SamplerSpec::analog(kind), 100_000, 40 + i as u64).unwrap();
        let (mean, var) = toy_model_stats(q, n, kind).unwrap();
        let values: Vec<f64> = r.values.iter().map(|v| v[0]).collect();
        let bse = bootstrap_variance_se(&values, 200, 50 + i as u64);
        let zm = (r.mean[0] - mean).abs() / r.sem[0];
        let zv = (r.variance[0] - var).abs() / bse;
        ok &= zm <= 3.0 && zv <= 3.0;
        variances.push(r.variance[0]);
        formula.push(var);
        bses.push(bse);
        details.push(format!(
            "{}: mean {:.5} vs {mean:.5} ({zm:.2} SEM), variance {:.5} vs {var:.5} ({zv:.2} bootstrap SE)",
            kind.name(),
            r.mean[0],
            r.variance[0]
        ));
    }
    // The two variances differ by less than their sampling error at this
    // ensemble size, so the ordering is checked on the validated formula
    // values, and the sampled difference must not contradict it.
    let diff = variances[1] - variances[0];
    let diff_se = (bses[0].powi(2) + bses[1].powi(2)).sqrt();
    let ordered = formula[1] <= formula[0] && diff <= 3.0 * diff_se;
    ok &= ordered;
    details.push(format!(
        "discrete <= gaussian variance: formula {:.5} <= {:.5}, sampled difference {diff:.1e} (se {diff_se:.1e})",
        formula[1], formula[0]
    ));
    (ok, details.join("; "))
}

fn criterion_5() -> Outcome {
    let c = build_ising_2d(4, 4, 1.0, 0.1, 30, Some(&depol(0.001))).unwrap();
    let v = variance_ratio(&c, &SamplerSpec::analog(AngleKind::Gaussian), 700, 5).unwrap();
    let tail = &v.ratio[v.ratio.len() - 10..];
    let avg = tail.iter().sum::<f64>() / tail.len() as f64;
    (
        avg >= 5.0,
        format!(
            "mean digital/analog variance ratio over last 10 steps {avg:.2} (need >= 5); final digital var {:.3e}, analog var {:.3e}",
            v.digital.variance.last().unwrap(),
            v.analog.variance.last().unwrap()
        ),
    )
}

fn criterion_6() -> Outcome {
    let g = random_3_regular_graph(16, 2024).unwrap();
    let c = build_maxcut_floquet(&g, 40, 0.25, Some(&depol(0.001))).unwrap();
    let analog = Engine::new(&c, SamplerSpec::analog(AngleKind::Gaussian)).unwrap();
    let digital = Engine::new(&c, SamplerSpec::digital()).unwrap();
    let seed = 6;
    let exact = average_distribution(&analog, 500, seed).unwrap();
    let mean_kl = |engine: &Engine<'_>| {
        (0..20u64)
            .map(|i| {
                let p = trajectory_distribution(engine, seed, 1_000_000 + i).unwrap();
                kl_topk(&exact, &p, 50).unwrap()
            })
            .sum::<f64>()
            / 20.0
    };
    let (ka, kd) = (mean_kl(&analog), mean_kl(&digital));
    (
        ka < kd && ka < 0.2,
        format!("mean top-50 KL analog {ka:.4}, digital {kd:.4} (need analog < digital and analog < 0.2)"),
    )
}

fn criterion_7() -> Outcome {
    let c = build_tilted_ising(10, 0.9045, 0.8090, 0.3, 50, Some(&depol(0.003))).unwrap();
    let d = entropy_ensemble(&c, &SamplerSpec::digital(), 100, 70).unwrap();
    let a = entropy_ensemble(&c, &SamplerSpec::analog(AngleKind::Gaussian), 100, 71).unwrap();
    let steps: Vec<usize> = (11..=50).collect();
    let wins = steps.iter().filter(|&&s| a.variance[s] < d.variance[s]).count();
    let frac = wins as f64 / steps.len() as f64;
    (
        frac >= 0.8,
        format!(
            "analog variance below digital on {wins}/{} steps after step 10 ({:.0}%, need >= 80%); step 50 variances {:.3e} vs {:.3e}",
            steps.len(),
            100.0 * frac,
            a.variance[50],
            d.variance[50]
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut worst = 0.0f64;
    for kind in AngleKind::ALL {
        for q in [1e-4, 1e-3, 1e-2, 0.1, 0.2] {
            let m = AngleDistribution::for_probability(kind, q).unwrap().moments().unwrap();
            worst = worst.max((m.sin2 - q).abs());
        }
    }
    let mut report = Vec::new();
    for q in [1e-3, 0.1] {
        for check in closed_form_report(q).unwrap() {
            if !check.passed {
                report.push(format!(
                    "{} `{}` at q={}: norm {:.4}, E[sin^2] {:.6e}, adopted scale {:.6e}",
                    check.kind.name(),
                    check.printed,
                    q,
                    check.norm,
                    check.sin2,
                    check.adopted_scale
                ));
            }
        }
    }
    for line in &report {
        println!("  closed-form discrepancy: {line}");
    }
    (
        worst <= SIN2_TOL && !report.is_empty(),
        format!("max |E[sin^2] - q| {worst:.2e} (tol 1e-9); {} closed-form discrepancies reported", report.len()),
    )
}

fn percentile_999(spec: SamplerSpec, eps: f64, seed: u64) -> f64 {
    let ch = NoiseChannel::depolarizing(eps, vec![0, 1]);
    let compiled = CompiledChannel::compile(&ch, &spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = NoiseEvent::default();
    let mut devs: Vec<f64> = (0..100_000)
        .map(|_| {
            compiled.draw(&mut rng, None, &mut e).unwrap();
            e.max_identity_deviation(2)
        })
        .collect();
    devs.sort_by(f64::total_cmp);
    devs[(devs.len() as f64 * 0.999).ceil() as usize - 1]
}

fn criterion_9() -> Outcome {
    let spec = SamplerSpec::analog(AngleKind::Gaussian);
    let p: Vec<f64> = [1e-2, 1e-3, 1e-4].iter().map(|&e| percentile_999(spec, e, 9)).collect();
    let monotone = p[0] > p[1] && p[1] > p[2];

    let ch = NoiseChannel::depolarizing(0.05, vec![0, 1]);
    let compiled = CompiledChannel::compile(&ch, &SamplerSpec::digital()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut e = NoiseEvent::default();
    let mut flips = 0;
    let mut all_two = true;
    for _ in 0..100_000 {
        compiled.draw(&mut rng, None, &mut e).unwrap();
        if matches!(e.actions[..], [NoiseAction::PauliFlip(_)]) {
            flips += 1;
            all_two &= e.max_identity_deviation(2) == 2.0;
        }
    }
    (
        monotone && all_two && flips > 0,
        format!(
            "analog 99.9th percentiles {:.3e}, {:.3e}, {:.3e} for eps 1e-2, 1e-3, 1e-4; digital flips {flips}, all at deviation 2: {all_two}",
            p[0], p[1], p[2]
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Outcome); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let filter: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.strip_prefix("criterion_").and_then(|n| n.parse().ok()))
        .collect();
    let mut failed = 0;
    for (n, f) in criteria {
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let (ok, detail) = f();
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {n}: {} {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
