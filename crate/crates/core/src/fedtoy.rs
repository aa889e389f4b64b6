//! Federated linear regression on synthetic data.
//!
//! Labels are `y = w* . x + noise` with standard normal features. Each
//! client trains by full-batch gradient descent on its shard's MSE and the
//! server averages the participants' weights in proportion to shard size.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{ClientProfile, SystemParams};
use crate::environment::{Availability, LatencyLaw, Scenario};
use crate::error::{BsflError, Result};
use crate::evaluation::RegretSeries;
use crate::generalization::GeneralizationSpec;
use crate::policies::Policy;
use crate::rng::{self, purpose, SimRng};
use crate::simulation::{simulate, RoundObserver, RoundRecord, RunOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Partition {
    /// Equal shard sizes and a common label-noise level.
    Iid,
    /// Shard shares proportional to `exp(N(0, size_log_sd^2))`; each client
    /// draws its label-noise sd uniformly from `noise_range`.
    NonIid {
        size_log_sd: f64,
        noise_range: [f64; 2],
    },
}

impl Default for Partition {
    fn default() -> Self {
        Partition::Iid
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_total")]
    pub total_samples: usize,
    #[serde(default = "default_test")]
    pub test_samples: usize,
    /// Label noise sd for iid shards and for the test set.
    #[serde(default = "default_noise")]
    pub noise_sd: f64,
    #[serde(default)]
    pub partition: Partition,
}

fn default_dim() -> usize {
    10
}
fn default_total() -> usize {
    70_000
}
fn default_test() -> usize {
    10_000
}
fn default_noise() -> f64 {
    1.0
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            dim: default_dim(),
            total_samples: default_total(),
            test_samples: default_test(),
            noise_sd: default_noise(),
            partition: Partition::Iid,
        }
    }
}

/// Smallest shard the non-iid split will produce.
pub const MIN_SHARD: usize = 20;

impl DataConfig {
    pub fn validate(&self, num_clients: usize) -> Result<()> {
        if self.dim == 0 {
            return Err(BsflError::config("data.dim", "must be at least 1"));
        }
        if self.total_samples < num_clients * MIN_SHARD {
            return Err(BsflError::config(
                "data.total_samples",
                format!("need at least {MIN_SHARD} samples per client"),
            ));
        }
        if self.test_samples == 0 {
            return Err(BsflError::config("data.test_samples", "must be at least 1"));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(BsflError::config("data.noise_sd", "must be finite and >= 0"));
        }
        if let Partition::NonIid { size_log_sd, noise_range } = self.partition {
            if !(size_log_sd >= 0.0 && size_log_sd.is_finite()) {
                return Err(BsflError::config("data.partition.size_log_sd", "must be finite and >= 0"));
            }
            let [lo, hi] = noise_range;
            if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
                return Err(BsflError::config("data.partition.noise_range", "need 0 <= lo <= hi"));
            }
        }
        Ok(())
    }

    /// Per-client `(shard size, label-noise sd)`, drawn from the data stream
    /// of `seed`. Sizes sum to `total_samples`.
    pub fn plan(&self, num_clients: usize, seed: u64) -> Vec<(usize, f64)> {
        let n = self.total_samples;
        match self.partition {
            Partition::Iid => (0..num_clients)
                .map(|k| (n / num_clients + usize::from(k < n % num_clients), self.noise_sd))
                .collect(),
            Partition::NonIid { size_log_sd, noise_range } => {
                let mut r = rng::derive(seed, purpose::DATA, "plan", 0);
                let weights: Vec<f64> = (0..num_clients)
                    .map(|_| (size_log_sd * r.sample::<f64, _>(StandardNormal)).exp())
                    .collect();
                let sizes = apportion(&weights, n, MIN_SHARD);
                sizes
                    .into_iter()
                    .map(|s| (s, noise_range[0] + (noise_range[1] - noise_range[0]) * r.random::<f64>()))
                    .collect()
            }
        }
    }
}

/// Splits `total` into integer parts proportional to `weights`, each at
/// least `floor`, by largest remainder.
fn apportion(weights: &[f64], total: usize, floor: usize) -> Vec<usize> {
    let spare = total - floor * weights.len();
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * spare as f64).collect();
    let mut parts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = spare - parts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in &order {
        if left == 0 {
            break;
        }
        parts[i] += 1;
        left -= 1;
    }
    parts.iter().map(|p| p + floor).collect()
}

/// Data quality derived from label noise: `1 / (1 + sd)`.
pub fn quality_of_noise(noise_sd: f64) -> f64 {
    1.0 / (1.0 + noise_sd)
}

/// One client's data plus cached sufficient statistics of its MSE.
#[derive(Debug, Clone, PartialEq)]
pub struct Shard {
    dim: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    noise_sd: f64,
    gram: Vec<f64>,
    xty: Vec<f64>,
    yty: f64,
}

impl Shard {
    /// `x` is row-major with `dim` columns.
    pub fn new(dim: usize, x: Vec<f64>, y: Vec<f64>, noise_sd: f64) -> Result<Self> {
        if dim == 0 || y.is_empty() || x.len() != y.len() * dim {
            return Err(BsflError::InvalidInput(format!(
                "shard needs {} features for {} labels",
                y.len() * dim,
                y.len()
            )));
        }
        let n = y.len() as f64;
        let mut gram = vec![0.0; dim * dim];
        let mut xty = vec![0.0; dim];
        let mut yty = 0.0;
        for (row, &label) in x.chunks_exact(dim).zip(&y) {
            for i in 0..dim {
                xty[i] += row[i] * label;
                for j in i..dim {
                    gram[i * dim + j] += row[i] * row[j];
                }
            }
            yty += label * label;
        }
        for i in 0..dim {
            for j in i..dim {
                gram[i * dim + j] /= n;
                gram[j * dim + i] = gram[i * dim + j];
            }
            xty[i] /= n;
        }
        Ok(Self {
            dim,
            x,
            y,
            noise_sd,
            gram,
            xty,
            yty: yty / n,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn features(&self) -> &[f64] {
        &self.x
    }

    pub fn labels(&self) -> &[f64] {
        &self.y
    }

    /// Mean squared error of `w` on this shard.
    pub fn mse(&self, w: &[f64]) -> f64 {
        let d = self.dim;
        let mut quad = 0.0;
        let mut lin = 0.0;
        for i in 0..d {
            let gw: f64 = (0..d).map(|j| self.gram[i * d + j] * w[j]).sum();
            quad += w[i] * gw;
            lin += w[i] * self.xty[i];
        }
        (quad - 2.0 * lin + self.yty).max(0.0)
    }

    /// Gradient of [`Shard::mse`]: `2 (G w - X^T y / n)`.
    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|i| {
                let gw: f64 = (0..d).map(|j| self.gram[i * d + j] * w[j]).sum();
                2.0 * (gw - self.xty[i])
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyDataset {
    pub w_star: Vec<f64>,
    pub shards: Vec<Shard>,
    pub test: Shard,
    pub partition: Partition,
}

impl ToyDataset {
    pub fn generate(config: &DataConfig, num_clients: usize, seed: u64) -> Result<Self> {
        config.validate(num_clients)?;
        let d = config.dim;
        let mut wr = rng::derive(seed, purpose::DATA, "w_star", 0);
        let w_star: Vec<f64> = (0..d).map(|_| wr.sample(StandardNormal)).collect();
        let shards = config
            .plan(num_clients, seed)
            .into_iter()
            .enumerate()
            .map(|(k, (n, sd))| {
                let mut r = rng::derive(seed, purpose::DATA, "shard", k as u64);
                draw_shard(&w_star, n, sd, &mut r)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut tr = rng::derive(seed, purpose::DATA, "test", 0);
        let test = draw_shard(&w_star, config.test_samples, config.noise_sd, &mut tr)?;
        Ok(Self {
            w_star,
            shards,
            test,
            partition: config.partition.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.w_star.len()
    }

    pub fn sizes(&self) -> Vec<u64> {
        self.shards.iter().map(|s| s.len() as u64).collect()
    }

    pub fn test_loss(&self, w: &[f64]) -> f64 {
        self.test.mse(w)
    }

    /// Least-squares fit on all client data pooled together.
    pub fn centralized_least_squares(&self) -> Result<Vec<f64>> {
        let d = self.dim();
        let total: f64 = self.shards.iter().map(|s| s.len() as f64).sum();
        let mut a = vec![0.0; d * d];
        let mut b = vec![0.0; d];
        for s in &self.shards {
            let w = s.len() as f64 / total;
            for i in 0..d {
                b[i] += w * s.xty[i];
                for j in 0..d {
                    a[i * d + j] += w * s.gram[i * d + j];
                }
            }
        }
        solve_spd(a, b, d)
    }
}

fn draw_shard<R: Rng + ?Sized>(w_star: &[f64], n: usize, noise_sd: f64, rng: &mut R) -> Result<Shard> {
    let d = w_star.len();
    let noise = Normal::new(0.0, noise_sd).map_err(|e| BsflError::InvalidInput(e.to_string()))?;
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let start = x.len();
        x.extend((0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let clean: f64 = x[start..].iter().zip(w_star).map(|(a, b)| a * b).sum();
        y.push(clean + noise.sample(rng));
    }
    Shard::new(d, x, y, noise_sd)
}

/// Cholesky solve of a symmetric positive-definite system.
fn solve_spd(mut a: Vec<f64>, mut b: Vec<f64>, d: usize) -> Result<Vec<f64>> {
    for j in 0..d {
        let mut diag = a[j * d + j];
        for k in 0..j {
            diag -= a[j * d + k] * a[j * d + k];
        }
        if diag <= 0.0 {
            return Err(BsflError::InvalidInput("normal equations are singular".into()));
        }
        let diag = diag.sqrt();
        a[j * d + j] = diag;
        for i in j + 1..d {
            let mut v = a[i * d + j];
            for k in 0..j {
                v -= a[i * d + k] * a[j * d + k];
            }
            a[i * d + j] = v / diag;
        }
    }
    for i in 0..d {
        for k in 0..i {
            b[i] -= a[i * d + k] * b[k];
        }
        b[i] /= a[i * d + i];
    }
    for i in (0..d).rev() {
        for k in i + 1..d {
            b[i] -= a[k * d + i] * b[k];
        }
        b[i] /= a[i * d + i];
    }
    Ok(b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalModel {
    pub weights: Vec<f64>,
    pub round: u64,
}

impl GlobalModel {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            round: 0,
        }
    }
}

/// `steps` full-batch gradient-descent steps on the shard's MSE.
pub fn local_train(weights: &[f64], shard: &Shard, steps: usize, learning_rate: f64) -> Vec<f64> {
    let mut w = weights.to_vec();
    for _ in 0..steps {
        let g = shard.gradient(&w);
        for (wi, gi) in w.iter_mut().zip(g) {
            *wi -= learning_rate * gi;
        }
    }
    w
}

/// Size-weighted average of participant weights.
pub fn aggregate(locals: &[Vec<f64>], sizes: &[u64]) -> Result<Vec<f64>> {
    if locals.is_empty() || locals.len() != sizes.len() {
        return Err(BsflError::InvalidInput(format!(
            "{} local models for {} sizes",
            locals.len(),
            sizes.len()
        )));
    }
    let total: u64 = sizes.iter().sum();
    if total == 0 {
        return Err(BsflError::InvalidInput("participants hold no data".into()));
    }
    let d = locals[0].len();
    let mut out = vec![0.0; d];
    for (w, &n) in locals.iter().zip(sizes) {
        let share = n as f64 / total as f64;
        for (o, wi) in out.iter_mut().zip(w) {
            *o += share * wi;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_steps")]
    pub local_steps: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
}

fn default_steps() -> usize {
    5
}
fn default_lr() -> f64 {
    0.01
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            local_steps: default_steps(),
            learning_rate: default_lr(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(BsflError::config("train.learning_rate", "must be a positive finite number"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub clock_seconds: f64,
    pub round: u64,
    pub test_loss: f64,
}

#[derive(Debug, Clone)]
pub struct FlRun {
    pub trace: Vec<TraceRow>,
    pub model: GlobalModel,
    pub records: Vec<RoundRecord>,
    pub regret: Option<RegretSeries>,
}

struct Trainer<'a> {
    dataset: &'a ToyDataset,
    train: TrainConfig,
    model: GlobalModel,
    trace: Vec<TraceRow>,
}

impl RoundObserver for Trainer<'_> {
    fn observe(&mut self, record: &RoundRecord) -> Result<()> {
        let members = record.chosen.members();
        let locals: Vec<Vec<f64>> = members
            .iter()
            .map(|&k| {
                local_train(
                    &self.model.weights,
                    &self.dataset.shards[k],
                    self.train.local_steps,
                    self.train.learning_rate,
                )
            })
            .collect();
        let sizes: Vec<u64> = members.iter().map(|&k| self.dataset.shards[k].len() as u64).collect();
        self.model.weights = aggregate(&locals, &sizes)?;
        self.model.round = record.round;
        self.trace.push(TraceRow {
            clock_seconds: record.cumulative_clock,
            round: record.round,
            test_loss: self.dataset.test_loss(&self.model.weights),
        });
        Ok(())
    }
}

/// Trains from zero weights until the simulated clock budget runs out. The
/// trace starts with the untrained model at clock 0.
pub fn run_fl(
    dataset: &ToyDataset,
    scenario: &Scenario,
    generalization: &GeneralizationSpec,
    policy: &mut dyn Policy,
    budget_seconds: f64,
    train: TrainConfig,
    rng: &mut SimRng,
) -> Result<FlRun> {
    let options = RunOptions::seconds(budget_seconds);
    train_with(dataset, scenario, generalization, policy, &options, train, rng)
}

/// [`run_fl`] with an arbitrary horizon and optional regret tracking.
pub fn train_with(
    dataset: &ToyDataset,
    scenario: &Scenario,
    generalization: &GeneralizationSpec,
    policy: &mut dyn Policy,
    options: &RunOptions,
    train: TrainConfig,
    rng: &mut SimRng,
) -> Result<FlRun> {
    train.validate()?;
    if dataset.shards.len() != scenario.params.num_clients {
        return Err(BsflError::InvalidInput(format!(
            "{} shards for {} clients",
            dataset.shards.len(),
            scenario.params.num_clients
        )));
    }
    let model = GlobalModel::zeros(dataset.dim());
    let mut trainer = Trainer {
        dataset,
        train,
        trace: vec![TraceRow {
            clock_seconds: 0.0,
            round: 0,
            test_loss: dataset.test_loss(&model.weights),
        }],
        model,
    };
    let out = simulate(scenario, generalization, policy, options, rng, &mut trainer)?;
    Ok(FlRun {
        trace: trainer.trace,
        model: trainer.model,
        records: out.records,
        regret: out.regret,
    })
}

/// Profiles whose data size and quality match the dataset's shards.
pub fn profiles_for(dataset: &ToyDataset, laws: &[LatencyLaw]) -> Result<Vec<ClientProfile>> {
    dataset
        .shards
        .iter()
        .zip(laws)
        .enumerate()
        .map(|(k, (s, law))| ClientProfile::new(k, law.clone(), s.len() as u64, quality_of_noise(s.noise_sd())))
        .collect()
}

/// Convenience for tests and demos: a scenario over `dataset` with the given
/// laws and full availability.
pub fn scenario_for(
    dataset: &ToyDataset,
    laws: &[LatencyLaw],
    params: SystemParams,
    mean_speed_samples: usize,
) -> Result<Scenario> {
    Scenario::new(params, profiles_for(dataset, laws)?, Availability::Full, mean_speed_samples)
}
