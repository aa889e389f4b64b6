//! Client-selection policies.
//!
//! The simulator owns the [`SelectionHistory`]; every policy sees it
//! read-only when selecting and is told when a round has been folded in.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Energy, Score, SelectionHistory, SelectionSet};
use crate::environment::random_subset;
use crate::error::{BsflError, Result};
use crate::generalization::{Generalization, GeneralizationSpec};
use crate::optimizer::{
    anneal, solve_exhaustive, AnnealerConfig, Neighborhood, ScoreTable, DEFAULT_ENUMERATION_CAP,
};
use crate::rng::SimRng;

pub trait Policy {
    fn name(&self) -> &str;

    /// Chooses this round's participants from `available` (sorted ids).
    fn select(
        &mut self,
        history: &SelectionHistory,
        available: &[usize],
        rng: &mut SimRng,
    ) -> Result<SelectionSet>;

    /// Called after the round's observations were recorded in `history`.
    fn update(&mut self, _history: &SelectionHistory) {}
}

/// Inner solver for the per-round argmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolverChoice {
    Exhaustive {
        #[serde(default)]
        cap: Option<u128>,
    },
    Alsa {
        steps: u64,
        #[serde(default)]
        d: Option<f64>,
    },
    Sa {
        steps: u64,
        #[serde(default)]
        d: Option<f64>,
    },
}

impl Default for SolverChoice {
    fn default() -> Self {
        SolverChoice::Exhaustive { cap: None }
    }
}

impl SolverChoice {
    pub fn solve(&self, table: &ScoreTable, rng: &mut SimRng) -> Result<(SelectionSet, Energy)> {
        match *self {
            SolverChoice::Exhaustive { cap } => {
                solve_exhaustive(table, cap.unwrap_or(DEFAULT_ENUMERATION_CAP))
            }
            SolverChoice::Alsa { steps, d } => self.run_annealer(table, steps, d, Neighborhood::Lightweight, rng),
            SolverChoice::Sa { steps, d } => self.run_annealer(table, steps, d, Neighborhood::Classic, rng),
        }
    }

    fn run_annealer(
        &self,
        table: &ScoreTable,
        steps: u64,
        d: Option<f64>,
        neighborhood: Neighborhood,
        rng: &mut SimRng,
    ) -> Result<(SelectionSet, Energy)> {
        let mut config = AnnealerConfig::new(steps, neighborhood);
        config.d = d;
        let result = anneal(table, &config, rng)?;
        Ok((result.best, result.best_energy))
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SolverChoice::Exhaustive { cap: Some(0) } => {
                Err(BsflError::config("solver.cap", "must be positive"))
            }
            SolverChoice::Alsa { steps, d } | SolverChoice::Sa { steps, d } => {
                let mut c = AnnealerConfig::new(steps, Neighborhood::Classic);
                c.d = d;
                c.validate()
            }
            _ => Ok(()),
        }
    }
}

/// UCB index `mean + sqrt((m + 1) ln t / c)`.
pub fn ucb_index(mean: f64, count: u64, completed_rounds: u64, num_channels: usize) -> f64 {
    let t = completed_rounds.max(1) as f64;
    mean + ((num_channels as f64 + 1.0) * t.ln() / count as f64).sqrt()
}

/// Bandit scheduling: UCB indices of client speeds combined with the
/// generalization bonus, maximized over `m`-subsets.
#[derive(Debug, Clone)]
pub struct Bsfl {
    name: String,
    alpha: f64,
    num_channels: usize,
    generalization: GeneralizationSpec,
    solver: SolverChoice,
    ucb: Vec<Score>,
}

impl Bsfl {
    pub fn new(
        name: impl Into<String>,
        alpha: f64,
        num_channels: usize,
        generalization: GeneralizationSpec,
        solver: SolverChoice,
    ) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(BsflError::config("alpha", "must be a finite number >= 0"));
        }
        solver.validate()?;
        let k = generalization.target_rates().len();
        Ok(Self {
            name: name.into(),
            alpha,
            num_channels,
            generalization,
            solver,
            ucb: vec![Score::Unobserved; k],
        })
    }

    /// Speed-only UCB baseline: the same machinery with `alpha = 0`, which
    /// settles on the `m` clients with the highest indices.
    pub fn latency_ucb(
        name: impl Into<String>,
        num_clients: usize,
        num_channels: usize,
        solver: SolverChoice,
    ) -> Result<Self> {
        let g = GeneralizationSpec::iid_balanced(num_clients, num_channels, 1)?;
        Self::new(name, 0.0, num_channels, g, solver)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Current indices; reflect observations through the last completed
    /// round.
    pub fn ucb(&self) -> &[Score] {
        &self.ucb
    }

    pub fn score_table(&self, history: &SelectionHistory, available: &[usize]) -> Result<ScoreTable> {
        ScoreTable::new(
            self.ucb.clone(),
            self.generalization.values(history),
            self.alpha,
            self.num_channels,
            available.to_vec(),
        )
    }

    fn refresh(&mut self, history: &SelectionHistory) {
        let t = history.round();
        for (k, slot) in self.ucb.iter_mut().enumerate() {
            *slot = match history.mean_speed(k) {
                Some(mean) => Score::Finite(ucb_index(mean, history.count(k), t, self.num_channels)),
                None => Score::Unobserved,
            };
        }
    }
}

impl Policy for Bsfl {
    fn name(&self) -> &str {
        &self.name
    }

    fn select(
        &mut self,
        history: &SelectionHistory,
        available: &[usize],
        rng: &mut SimRng,
    ) -> Result<SelectionSet> {
        let table = self.score_table(history, available)?;
        Ok(self.solver.solve(&table, rng)?.0)
    }

    fn update(&mut self, history: &SelectionHistory) {
        self.refresh(history);
    }
}

/// Exact maximizer of the expected reward with known mean speeds, evaluated
/// against `history`.
pub fn genie_select<G: Generalization + ?Sized>(
    true_means: &[f64],
    history: &SelectionHistory,
    generalization: &G,
    alpha: f64,
    num_channels: usize,
    available: &[usize],
    cap: u128,
) -> Result<(SelectionSet, Energy)> {
    let table = ScoreTable::new(
        true_means.iter().map(|&mu| Score::Finite(mu)).collect(),
        generalization.values(history),
        alpha,
        num_channels,
        available.to_vec(),
    )?;
    solve_exhaustive(&table, cap)
}

/// The genie run as an ordinary policy on its own history.
#[derive(Debug, Clone)]
pub struct Genie {
    name: String,
    true_means: Vec<f64>,
    generalization: GeneralizationSpec,
    alpha: f64,
    num_channels: usize,
    cap: u128,
}

impl Genie {
    pub fn new(
        name: impl Into<String>,
        true_means: Vec<f64>,
        generalization: GeneralizationSpec,
        alpha: f64,
        num_channels: usize,
    ) -> Self {
        Self {
            name: name.into(),
            true_means,
            generalization,
            alpha,
            num_channels,
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

impl Policy for Genie {
    fn name(&self) -> &str {
        &self.name
    }

    fn select(
        &mut self,
        history: &SelectionHistory,
        available: &[usize],
        _rng: &mut SimRng,
    ) -> Result<SelectionSet> {
        genie_select(
            &self.true_means,
            history,
            &self.generalization,
            self.alpha,
            self.num_channels,
            available,
            self.cap,
        )
        .map(|(s, _)| s)
    }
}

fn check_enough(available: &[usize], m: usize) -> Result<()> {
    if available.len() < m {
        return Err(BsflError::InsufficientClients {
            available: available.len(),
            required: m,
        });
    }
    Ok(())
}

pub fn random_uniform_select<R: Rng + ?Sized>(
    available: &[usize],
    m: usize,
    rng: &mut R,
) -> Result<SelectionSet> {
    check_enough(available, m)?;
    Ok(random_subset(available, m, rng))
}

/// Successive weighted draws without replacement: each pick takes a
/// remaining client with probability proportional to its weight.
pub fn random_proportional_select<R: Rng + ?Sized>(
    available: &[usize],
    m: usize,
    weights: &[f64],
    rng: &mut R,
) -> Result<SelectionSet> {
    check_enough(available, m)?;
    let mut pool: Vec<(usize, f64)> = Vec::with_capacity(available.len());
    for &k in available {
        let w = *weights.get(k).ok_or(BsflError::UnknownClient {
            client: k,
            num_clients: weights.len(),
        })?;
        if !(w > 0.0 && w.is_finite()) {
            return Err(BsflError::config("weights", format!("client {k} has non-positive weight {w}")));
        }
        pool.push((k, w));
    }
    let mut chosen = Vec::with_capacity(m);
    for _ in 0..m {
        let total: f64 = pool.iter().map(|p| p.1).sum();
        let mut r = rng.random::<f64>() * total;
        let mut pick = pool.len() - 1;
        for (i, &(_, w)) in pool.iter().enumerate() {
            if r < w {
                pick = i;
                break;
            }
            r -= w;
        }
        chosen.push(pool.swap_remove(pick).0);
    }
    chosen.sort_unstable();
    Ok(SelectionSet::from_sorted(chosen))
}

#[derive(Debug, Clone)]
pub struct RandomUniform {
    name: String,
    num_channels: usize,
}

impl RandomUniform {
    pub fn new(name: impl Into<String>, num_channels: usize) -> Self {
        Self {
            name: name.into(),
            num_channels,
        }
    }
}

impl Policy for RandomUniform {
    fn name(&self) -> &str {
        &self.name
    }

    fn select(&mut self, _: &SelectionHistory, available: &[usize], rng: &mut SimRng) -> Result<SelectionSet> {
        random_uniform_select(available, self.num_channels, rng)
    }
}

/// Random selection weighted by local dataset size.
#[derive(Debug, Clone)]
pub struct RandomProportional {
    name: String,
    num_channels: usize,
    weights: Vec<f64>,
}

impl RandomProportional {
    pub fn new(name: impl Into<String>, num_channels: usize, weights: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            num_channels,
            weights,
        }
    }
}

impl Policy for RandomProportional {
    fn name(&self) -> &str {
        &self.name
    }

    fn select(&mut self, _: &SelectionHistory, available: &[usize], rng: &mut SimRng) -> Result<SelectionSet> {
        random_proportional_select(available, self.num_channels, &self.weights, rng)
    }
}
