//! Browser bindings. Each export takes plain numbers or JSON text and
//! returns JSON text; the work is done by the functions in [`api`], which
//! also run natively.

use wasm_bindgen::prelude::*;

pub mod api {
    use serde_json::{json, Value};

    use noisy_traj::angles::AngleKind;
    use noisy_traj::channel::{ChannelKind, PauliMap};
    use noisy_traj::circuits::{build_ising_2d, build_toy_model};
    use noisy_traj::factorize::{factorize, verify_factorization};
    use noisy_traj::harness::{run_ensemble, toy_model_digital_variance, toy_model_stats, variance_ratio};
    use noisy_traj::oracle::evolve_circuit_dm;
    use noisy_traj::sampler::SamplerSpec;

    /// Largest lattice the page will simulate.
    pub const MAX_DEMO_QUBITS: usize = 12;
    /// Lattices up to this size also get the exact curve.
    pub const MAX_EXACT_QUBITS: usize = 8;
    const BINS: usize = 40;

    fn err(e: impl std::fmt::Display) -> String {
        e.to_string()
    }

    /// Factorization of a Pauli probability map such as `{"I": 0.9, "X": 0.1}`.
    pub fn factorize_pauli(probabilities: &str) -> Result<String, String> {
        let p: PauliMap = serde_json::from_str(probabilities).map_err(err)?;
        if p.is_empty() {
            return Err("empty probability map".into());
        }
        let m = p.keys().next().map(|s| s.num_qubits()).unwrap_or(1);
        noisy_traj::channel::NoiseChannel::pauli(p.clone(), (0..m).collect())
            .validate()
            .map_err(err)?;
        let f = factorize(&p).map_err(err)?;
        let residual = verify_factorization(&p, &f.factors).map_err(err)?;
        Ok(json!({
            "factors": f.factors,
            "residual": residual,
            "all_physical": f.all_physical,
            "worst_unphysical": f.worst_unphysical().map(|(s, q)| json!({"string": s, "q": q})),
        })
        .to_string())
    }

    fn histogram(values: &[f64]) -> Vec<usize> {
        let mut h = vec![0; BINS];
        for v in values {
            let b = ((v + 1.0) / 2.0 * BINS as f64).floor() as isize;
            h[b.clamp(0, BINS as isize - 1) as usize] += 1;
        }
        h
    }

    /// Digital and analog ensembles of the single-qubit toy model, with
    /// the closed-form mean and variances.
    pub fn toy_model(q: f64, n: usize, angle_dist: &str, n_traj: usize, seed: u64) -> Result<String, String> {
        if n_traj < 2 || n_traj > 200_000 {
            return Err("trajectories must be between 2 and 200000".into());
        }
        let kind: AngleKind = angle_dist.parse().map_err(err)?;
        let c = build_toy_model(q, n).map_err(err)?;
        let mut out = json!({
            "exact_mean": (1.0 - 2.0 * q).powi(n as i32),
            "predicted": {
                "digital_variance": toy_model_digital_variance(q, n as u32),
                "analog_variance": toy_model_stats(q, n as u32, kind).map_err(err)?.1,
            },
        });
        for (name, spec) in [("digital", SamplerSpec::digital()), ("analog", SamplerSpec::analog(kind))] {
            let r = run_ensemble(&c, &spec, n_traj, seed).map_err(err)?;
            let values: Vec<f64> = r.values.iter().map(|v| v[0]).collect();
            out[name] = json!({
                "mean": r.mean[0],
                "variance": r.variance[0],
                "sem": r.sem[0],
                "histogram": histogram(&values),
            });
        }
        Ok(out.to_string())
    }

    /// Magnetization series and digital/analog variance ratio for a small
    /// periodic Ising lattice.
    pub fn ising_compare(
        lx: usize,
        ly: usize,
        steps: usize,
        epsilon: f64,
        n_traj: usize,
        seed: u64,
    ) -> Result<String, String> {
        if lx * ly > MAX_DEMO_QUBITS {
            return Err(format!("at most {MAX_DEMO_QUBITS} sites in the browser"));
        }
        if n_traj < 2 {
            return Err("need at least 2 trajectories".into());
        }
        let noise = ChannelKind::Depolarizing { epsilon };
        let c = build_ising_2d(lx, ly, 1.0, 0.1, steps, Some(&noise)).map_err(err)?;
        let v = variance_ratio(&c, &SamplerSpec::analog(AngleKind::Gaussian), n_traj, seed).map_err(err)?;
        let exact: Value = if lx * ly <= MAX_EXACT_QUBITS {
            let e = evolve_circuit_dm(&c).map_err(err)?;
            e.iter().map(|row| row[0]).collect::<Vec<f64>>().into()
        } else {
            Value::Null
        };
        Ok(json!({
            "digital_mean": v.digital.mean,
            "analog_mean": v.analog.mean,
            "digital_sem": v.digital.sem,
            "analog_sem": v.analog.sem,
            "ratio": v.ratio,
            "exact": exact,
        })
        .to_string())
    }
}

#[wasm_bindgen(js_name = factorizePauli)]
pub fn factorize_pauli(probabilities: &str) -> Result<String, JsError> {
    api::factorize_pauli(probabilities).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = toyModel)]
pub fn toy_model(q: f64, n: usize, angle_dist: &str, n_traj: usize, seed: u64) -> Result<String, JsError> {
    api::toy_model(q, n, angle_dist, n_traj, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = isingCompare)]
pub fn ising_compare(
    lx: usize,
    ly: usize,
    steps: usize,
    epsilon: f64,
    n_traj: usize,
    seed: u64,
) -> Result<String, JsError> {
    api::ising_compare(lx, ly, steps, epsilon, n_traj, seed).map_err(|e| JsError::new(&e))
}
