//! wasm-bindgen entry points for `www/index.html`.
//!
//! Every function returns a JSON string so the page needs no glue beyond
//! `JSON.parse`. The plain-Rust versions (`*_json`) are what the tests call.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use bsfl::environment::{Availability, LatencyLaw, Scenario};
use bsfl::experiment::{compare_optimizers, RaceConfig};
use bsfl::generalization::GeneralizationSpec;
use bsfl::policies::{Bsfl, Policy, RandomUniform, SolverChoice};
use bsfl::rng::{self, purpose};
use bsfl::simulation::{simulate, RunOptions};
use bsfl::{ClientProfile, SystemParams};

#[derive(Serialize)]
pub struct Curve {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

/// g as a function of the selection rate for each beta in `betas`, with
/// target rate `m / k`.
#[wasm_bindgen]
pub fn g_curves(k: usize, m: usize, betas: &[u32]) -> Result<String, JsValue> {
    to_js(g_curves_json(k, m, betas))
}

pub fn g_curves_json(k: usize, m: usize, betas: &[u32]) -> Result<Vec<Vec<[f64; 2]>>, String> {
    betas
        .iter()
        .map(|&b| {
            let g = GeneralizationSpec::iid_balanced(k, m, b).map_err(|e| e.to_string())?;
            Ok((0..=200)
                .map(|i| {
                    let rate = i as f64 / 200.0;
                    [rate, g.value_at_rate(0, rate)]
                })
                .collect())
        })
        .collect()
}

#[derive(Serialize)]
pub struct RaceView {
    pub alsa_wins: usize,
    pub ties: usize,
    pub sa_wins: usize,
    pub steps: Vec<u64>,
    pub sa: Vec<f64>,
    pub alsa: Vec<f64>,
}

/// SA versus ALSA on `instances` random tables with equal step budgets.
#[wasm_bindgen]
pub fn energy_race(k: usize, m: usize, steps: u64, instances: usize, seed: u64) -> Result<String, JsValue> {
    to_js(energy_race_json(k, m, steps, instances, seed))
}

pub fn energy_race_json(k: usize, m: usize, steps: u64, instances: usize, seed: u64) -> Result<RaceView, String> {
    if m == 0 || m > k || steps == 0 || instances == 0 {
        return Err("need 1 <= m <= K, steps >= 1 and instances >= 1".into());
    }
    let cfg = RaceConfig {
        instances,
        num_clients: k,
        num_channels: m,
        steps,
        alpha: 1.0,
        d: None,
        seed,
        trace_every: (steps / 200).max(1),
        exact_cap: 0,
    };
    let r = compare_optimizers(&cfg, 1).map_err(|e| e.to_string())?;
    Ok(RaceView {
        alsa_wins: r.alsa_wins,
        ties: r.ties,
        sa_wins: r.sa_wins,
        steps: r.mean_trace.iter().map(|p| p.step).collect(),
        sa: r.mean_trace.iter().map(|p| p.sa_mean_best).collect(),
        alsa: r.mean_trace.iter().map(|p| p.alsa_mean_best).collect(),
    })
}

/// Cumulative regret of BSFL, latency-only UCB and uniform random on one
/// seeded population: `fast` clients with medians near 1 s and the rest
/// near `slow_median` seconds.
#[wasm_bindgen]
pub fn regret_curves(
    k: usize,
    m: usize,
    fast: usize,
    slow_median: f64,
    alpha: f64,
    beta: u32,
    rounds: u64,
    seed: u64,
) -> Result<String, JsValue> {
    to_js(regret_curves_json(k, m, fast, slow_median, alpha, beta, rounds, seed))
}

#[allow(clippy::too_many_arguments)]
pub fn regret_curves_json(
    k: usize,
    m: usize,
    fast: usize,
    slow_median: f64,
    alpha: f64,
    beta: u32,
    rounds: u64,
    seed: u64,
) -> Result<Vec<Curve>, String> {
    let err = |e: bsfl::BsflError| e.to_string();
    if fast > k {
        return Err("fast clients cannot exceed K".into());
    }
    let params = SystemParams {
        num_clients: k,
        num_channels: m,
        alpha,
        beta,
        tau_min: 1.0,
        tau_max: 10.0,
        delta_min: 0.1,
        rng_seed: seed,
    };
    params.validate().map_err(err)?;
    let profiles = (0..k)
        .map(|c| {
            let median = if c < fast { 1.0 + 0.03 * c as f64 } else { slow_median * (1.0 + 0.02 * c as f64) };
            let law = LatencyLaw::TruncatedLogNormal { log_mean: median.ln(), log_sd: 0.3 };
            ClientProfile::new(c, law, 1000, 1.0)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let scenario = Scenario::new(params, profiles, Availability::Full, 4000).map_err(err)?;
    let g = GeneralizationSpec::iid_balanced(k, m, beta).map_err(err)?;
    let mut policies: Vec<Box<dyn Policy>> = vec![
        Box::new(Bsfl::new("BSFL", alpha, m, g.clone(), SolverChoice::default()).map_err(err)?),
        Box::new(Bsfl::latency_ucb("latency UCB", k, m, SolverChoice::default()).map_err(err)?),
        Box::new(RandomUniform::new("uniform random", m)),
    ];
    let mut out = Vec::new();
    for p in policies.iter_mut() {
        let mut r = rng::derive(seed, purpose::POLICY, p.name(), 0);
        let run = simulate(&scenario, &g, p.as_mut(), &RunOptions::rounds(rounds), &mut r, &mut ()).map_err(err)?;
        let cumulative = run.regret.map(|s| s.cumulative).unwrap_or_default();
        let stride = (cumulative.len() / 400).max(1);
        let (x, y) = cumulative
            .iter()
            .enumerate()
            .filter(|(i, _)| (i + 1) % stride == 0)
            .map(|(i, &v)| ((i + 1) as f64, v))
            .unzip();
        out.push(Curve { name: p.name().to_string(), x, y });
    }
    Ok(out)
}
