use std::collections::HashSet;
use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{ClientProfile, SystemParams};
use crate::environment::{Availability, LatencyLaw, Scenario};
use crate::error::{BsflError, Result};
use crate::fedtoy::{quality_of_noise, DataConfig, TrainConfig};
use crate::generalization::{GeneralizationMode, GeneralizationSpec};
use crate::optimizer::{binomial, DEFAULT_ENUMERATION_CAP};
use crate::policies::{Bsfl, Genie, Policy, RandomProportional, RandomUniform, SolverChoice};
use crate::rng::{self, purpose};
use crate::simulation::Horizon;

/// Top-level experiment description, read from a single JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub policies: Vec<PolicySpec>,
    pub horizon: Horizon,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub race: Option<RaceConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub num_clients: usize,
    pub num_channels: usize,
    #[serde(default = "one")]
    pub tau_min: f64,
    #[serde(default = "ten")]
    pub tau_max: f64,
    #[serde(default = "tenth")]
    pub delta_min: f64,
    pub reward: RewardConfig,
    pub latency: Vec<LatencyGroup>,
    #[serde(default)]
    pub availability: Availability,
    #[serde(default = "default_mc")]
    pub mean_speed_samples: usize,
    #[serde(default)]
    pub data: DataConfig,
}

fn one() -> f64 {
    1.0
}
fn ten() -> f64 {
    10.0
}
fn tenth() -> f64 {
    0.1
}
fn default_mc() -> usize {
    1_000_000
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    pub alpha: f64,
    pub beta: u32,
    #[serde(default = "iid_mode")]
    pub generalization: GeneralizationMode,
    /// Round g values to this grid.
    #[serde(default)]
    pub quantum: Option<f64>,
}

fn iid_mode() -> GeneralizationMode {
    GeneralizationMode::IidBalanced
}

/// A block of clients sharing a latency family. Per-client parameters are
/// drawn from the given ranges with the seed's scenario stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum LatencyGroup {
    /// Medians uniform in log space over `median_range`.
    TruncatedLogNormal {
        count: usize,
        median_range: [f64; 2],
        log_sd: f64,
    },
    TruncatedExponential {
        count: usize,
        offset_range: [f64; 2],
        rate: f64,
    },
    /// One client per listed latency.
    Fixed { latencies: Vec<f64> },
}

impl LatencyGroup {
    pub fn count(&self) -> usize {
        match self {
            LatencyGroup::TruncatedLogNormal { count, .. } | LatencyGroup::TruncatedExponential { count, .. } => *count,
            LatencyGroup::Fixed { latencies } => latencies.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    /// Reward weights default to the scenario's.
    Bsfl {
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        alpha: Option<f64>,
        #[serde(default)]
        beta: Option<u32>,
        #[serde(default)]
        solver: SolverChoice,
    },
    LatencyUcb {
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        solver: SolverChoice,
    },
    RandomUniform {
        #[serde(default)]
        name: Option<String>,
    },
    /// Weights are the clients' data sizes.
    RandomProportional {
        #[serde(default)]
        name: Option<String>,
    },
    Genie {
        #[serde(default)]
        name: Option<String>,
    },
}

impl PolicySpec {
    pub fn name(&self) -> String {
        let (given, kind) = match self {
            PolicySpec::Bsfl { name, .. } => (name, "bsfl"),
            PolicySpec::LatencyUcb { name, .. } => (name, "latency_ucb"),
            PolicySpec::RandomUniform { name } => (name, "random_uniform"),
            PolicySpec::RandomProportional { name } => (name, "random_proportional"),
            PolicySpec::Genie { name } => (name, "genie"),
        };
        given.clone().unwrap_or_else(|| kind.to_string())
    }

    pub fn build(&self, scenario: &Scenario, reward: &RewardConfig) -> Result<Box<dyn Policy + Send>> {
        let p = &scenario.params;
        let (k, m) = (p.num_clients, p.num_channels);
        let name = self.name();
        Ok(match self {
            PolicySpec::Bsfl { alpha, beta, solver, .. } => {
                let mut g = GeneralizationSpec::from_mode(
                    reward.generalization,
                    &scenario.profiles,
                    m,
                    beta.unwrap_or(reward.beta),
                )?;
                if let Some(q) = reward.quantum {
                    g = g.with_quantum(q)?;
                }
                Box::new(Bsfl::new(name, alpha.unwrap_or(reward.alpha), m, g, solver.clone())?)
            }
            PolicySpec::LatencyUcb { solver, .. } => Box::new(Bsfl::latency_ucb(name, k, m, solver.clone())?),
            PolicySpec::RandomUniform { .. } => Box::new(RandomUniform::new(name, m)),
            PolicySpec::RandomProportional { .. } => Box::new(RandomProportional::new(
                name,
                m,
                scenario.profiles.iter().map(|c| c.data_size as f64).collect(),
            )),
            PolicySpec::Genie { .. } => Box::new(Genie::new(
                name,
                scenario.true_means.clone(),
                reward_spec(scenario, reward)?,
                reward.alpha,
                m,
            )),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    #[serde(default = "yes")]
    pub regret: bool,
    #[serde(default)]
    pub fedtoy: bool,
    /// Write per-client selection rates every this many rounds.
    #[serde(default)]
    pub rate_cadence: Option<u64>,
    #[serde(default)]
    pub genie_cap: Option<u128>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            regret: true,
            fedtoy: false,
            rate_cadence: None,
            genie_cap: None,
        }
    }
}

impl EvaluationConfig {
    pub fn cap(&self) -> u128 {
        self.genie_cap.unwrap_or(DEFAULT_ENUMERATION_CAP)
    }
}

/// Settings for the SA-versus-ALSA energy race on random score tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaceConfig {
    pub instances: usize,
    pub num_clients: usize,
    pub num_channels: usize,
    pub steps: u64,
    #[serde(default = "one")]
    pub alpha: f64,
    /// Temperature numerator; defaults to `2 alpha + 1`.
    #[serde(default)]
    pub d: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Keep every n-th step of the mean traces.
    #[serde(default = "default_trace_every")]
    pub trace_every: u64,
    /// Also solve each instance exactly when the subset count is at most
    /// this.
    #[serde(default = "default_exact_cap")]
    pub exact_cap: u128,
}

fn default_trace_every() -> u64 {
    10
}
fn default_exact_cap() -> u128 {
    DEFAULT_ENUMERATION_CAP
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        if s.num_clients == 0 {
            return Err(BsflError::config("scenario.num_clients", "must be at least 1"));
        }
        if s.num_channels == 0 || s.num_channels > s.num_clients {
            return Err(BsflError::config(
                "scenario.num_channels",
                format!(
                    "must satisfy 1 <= num_channels <= num_clients (got {} > {})",
                    s.num_channels, s.num_clients
                ),
            ));
        }
        self.system_params(0).validate().map_err(|e| prefix(e, "scenario"))?;
        if let Some(q) = s.reward.quantum {
            if !(q > 0.0 && q <= 1.0) {
                return Err(BsflError::config("scenario.reward.quantum", "must lie in (0, 1]"));
            }
        }
        let total: usize = s.latency.iter().map(LatencyGroup::count).sum();
        if total != s.num_clients {
            return Err(BsflError::config(
                "scenario.latency",
                format!("groups cover {total} clients, expected {}", s.num_clients),
            ));
        }
        for (i, g) in s.latency.iter().enumerate() {
            validate_group(g, s.tau_min).map_err(|e| prefix(e, &format!("scenario.latency[{i}]")))?;
        }
        s.availability
            .validate()
            .map_err(|e| prefix(e, "scenario.availability"))?;
        s.data.validate(s.num_clients).map_err(|e| prefix(e, "scenario"))?;
        self.train.validate()?;
        self.horizon.validate()?;

        if self.seeds.is_empty() {
            return Err(BsflError::config("seeds", "must list at least one seed"));
        }
        let mut seen = HashSet::new();
        for &seed in &self.seeds {
            if !seen.insert(seed) {
                return Err(BsflError::config("seeds", format!("seed {seed} appears twice")));
            }
        }
        let mut names = HashSet::new();
        for (i, p) in self.policies.iter().enumerate() {
            let name = p.name();
            if !names.insert(name.clone()) {
                return Err(BsflError::config(
                    format!("policies[{i}].name"),
                    format!("duplicate policy name {name:?}"),
                ));
            }
            if name.is_empty() || name.contains(['/', '\\', ',', '"']) {
                return Err(BsflError::config(format!("policies[{i}].name"), "must be non-empty without / \\ , or quotes"));
            }
            match p {
                PolicySpec::Bsfl { alpha, beta, solver, .. } => {
                    if let Some(a) = alpha {
                        if !(*a >= 0.0 && a.is_finite()) {
                            return Err(BsflError::config(format!("policies[{i}].alpha"), "must be finite and >= 0"));
                        }
                    }
                    if *beta == Some(0) {
                        return Err(BsflError::config(format!("policies[{i}].beta"), "must be >= 1"));
                    }
                    solver.validate().map_err(|e| prefix(e, &format!("policies[{i}]")))?;
                }
                PolicySpec::LatencyUcb { solver, .. } => {
                    solver.validate().map_err(|e| prefix(e, &format!("policies[{i}]")))?
                }
                _ => {}
            }
        }
        let subsets = binomial(s.num_clients, s.num_channels);
        let needs_genie = self.policies.iter().any(|p| matches!(p, PolicySpec::Genie { .. }));
        if (self.evaluation.regret || needs_genie) && subsets > self.evaluation.cap() {
            return Err(BsflError::config(
                "evaluation.regret",
                format!(
                    "the genie must enumerate {subsets} subsets, above the cap of {}; turn regret off",
                    self.evaluation.cap()
                ),
            ));
        }
        if self.evaluation.rate_cadence == Some(0) {
            return Err(BsflError::config("evaluation.rate_cadence", "must be at least 1"));
        }
        if let Some(r) = &self.race {
            if r.instances == 0 {
                return Err(BsflError::config("race.instances", "must be at least 1"));
            }
            if r.num_channels == 0 || r.num_channels > r.num_clients {
                return Err(BsflError::config("race.num_channels", "must satisfy 1 <= num_channels <= num_clients"));
            }
            if r.steps == 0 {
                return Err(BsflError::config("race.steps", "must be at least 1"));
            }
            if !(r.alpha >= 0.0 && r.alpha.is_finite()) {
                return Err(BsflError::config("race.alpha", "must be finite and >= 0"));
            }
            if let Some(d) = r.d {
                if !(d > 0.0 && d.is_finite()) {
                    return Err(BsflError::config("race.d", "must be positive"));
                }
            }
            if r.trace_every == 0 {
                return Err(BsflError::config("race.trace_every", "must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn system_params(&self, seed: u64) -> SystemParams {
        let s = &self.scenario;
        SystemParams {
            num_clients: s.num_clients,
            num_channels: s.num_channels,
            alpha: s.reward.alpha,
            beta: s.reward.beta,
            tau_min: s.tau_min,
            tau_max: s.tau_max,
            delta_min: s.delta_min,
            rng_seed: seed,
        }
    }

    /// Draws the client population for `seed`: per-client latency laws from
    /// the scenario stream and data sizes and qualities from the data plan.
    pub fn build_scenario(&self, seed: u64) -> Result<Scenario> {
        let s = &self.scenario;
        let laws = draw_laws(&s.latency, seed);
        let plan = s.data.plan(s.num_clients, seed);
        let profiles = laws
            .into_iter()
            .zip(plan)
            .enumerate()
            .map(|(k, (law, (size, sd)))| ClientProfile::new(k, law, size as u64, quality_of_noise(sd)))
            .collect::<Result<Vec<_>>>()?;
        Scenario::new(self.system_params(seed), profiles, s.availability, s.mean_speed_samples)
    }
}

/// The reward's generalization spec for a built scenario.
pub fn reward_spec(scenario: &Scenario, reward: &RewardConfig) -> Result<GeneralizationSpec> {
    let mut g = GeneralizationSpec::from_mode(
        reward.generalization,
        &scenario.profiles,
        scenario.params.num_channels,
        reward.beta,
    )?;
    if let Some(q) = reward.quantum {
        g = g.with_quantum(q)?;
    }
    Ok(g)
}

fn draw_laws(groups: &[LatencyGroup], seed: u64) -> Vec<LatencyLaw> {
    let mut laws = Vec::new();
    for g in groups {
        match g {
            LatencyGroup::TruncatedLogNormal { count, median_range, log_sd } => {
                for _ in 0..*count {
                    let mut r = rng::derive(seed, purpose::SCENARIO, "latency", laws.len() as u64);
                    let (lo, hi) = (median_range[0].ln(), median_range[1].ln());
                    let log_mean = if hi > lo { r.random_range(lo..hi) } else { lo };
                    laws.push(LatencyLaw::TruncatedLogNormal { log_mean, log_sd: *log_sd });
                }
            }
            LatencyGroup::TruncatedExponential { count, offset_range, rate } => {
                for _ in 0..*count {
                    let mut r = rng::derive(seed, purpose::SCENARIO, "latency", laws.len() as u64);
                    let [lo, hi] = *offset_range;
                    let offset = if hi > lo { r.random_range(lo..hi) } else { lo };
                    laws.push(LatencyLaw::TruncatedExponential { offset, rate: *rate });
                }
            }
            LatencyGroup::Fixed { latencies } => {
                laws.extend(latencies.iter().map(|&latency| LatencyLaw::Fixed { latency }));
            }
        }
    }
    laws
}

fn validate_group(g: &LatencyGroup, tau_min: f64) -> Result<()> {
    let range_ok = |r: &[f64; 2]| r[0] > 0.0 && r[1] >= r[0] && r[1].is_finite();
    match g {
        LatencyGroup::TruncatedLogNormal { median_range, log_sd, .. } => {
            if !range_ok(median_range) {
                return Err(BsflError::config("median_range", "need 0 < lo <= hi"));
            }
            if !(*log_sd >= 0.0 && log_sd.is_finite()) {
                return Err(BsflError::config("log_sd", "must be finite and >= 0"));
            }
        }
        LatencyGroup::TruncatedExponential { offset_range, rate, .. } => {
            if !range_ok(offset_range) {
                return Err(BsflError::config("offset_range", "need 0 < lo <= hi"));
            }
            if !(*rate > 0.0 && rate.is_finite()) {
                return Err(BsflError::config("rate", "must be positive"));
            }
        }
        LatencyGroup::Fixed { latencies } => {
            if let Some(l) = latencies.iter().find(|&&l| !(l >= tau_min && l.is_finite())) {
                return Err(BsflError::config("latencies", format!("{l} is below tau_min or not finite")));
            }
        }
    }
    Ok(())
}

fn prefix(e: BsflError, scope: &str) -> BsflError {
    match e {
        BsflError::Config { field, message } => BsflError::Config {
            field: format!("{scope}.{field}"),
            message,
        },
        other => other,
    }
}
