//! Solvers for the per-round subset argmax
//! `max_S { min_{k in S} s[k] + (alpha/m) * sum_{k in S} g[k] }`.
//!
//! Three interchangeable routes are provided: exact enumeration, classic
//! simulated annealing over the single-swap graph, and the lightweight
//! annealer whose graph only keeps swaps touching a set's weakest member.

mod anneal;
mod exhaustive;
mod neighborhood;
mod path;

pub use anneal::{anneal, AnnealResult, AnnealerConfig, TraceRow};
pub use exhaustive::{binomial, solve_exhaustive, DEFAULT_ENUMERATION_CAP};
pub use neighborhood::{
    is_lightweight_neighbor, lightweight_swaps, neighbors_classic, neighbors_lightweight,
    Neighborhood, Swap,
};
pub use path::{construct_path_to_optimum, PathResult, DEFAULT_BFS_LIMIT};

use serde::{Deserialize, Serialize};

use crate::domain::{Energy, Score, SelectionSet};
use crate::error::{BsflError, Result};

/// Per-client inputs of one argmax instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    scores: Vec<Score>,
    g: Vec<f64>,
    alpha: f64,
    num_channels: usize,
    available: Vec<usize>,
}

impl ScoreTable {
    /// `scores` and `g` are indexed by client id; `available` lists the
    /// clients that may be selected.
    pub fn new(
        scores: Vec<Score>,
        g: Vec<f64>,
        alpha: f64,
        num_channels: usize,
        mut available: Vec<usize>,
    ) -> Result<Self> {
        if scores.len() != g.len() {
            return Err(BsflError::InvalidInput(format!(
                "{} scores but {} g values",
                scores.len(),
                g.len()
            )));
        }
        if scores.iter().any(|s| matches!(s, Score::Finite(v) if !v.is_finite()))
            || g.iter().any(|v| !v.is_finite())
        {
            return Err(BsflError::InvalidInput("scores and g must be finite".into()));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(BsflError::InvalidInput(format!("alpha must be >= 0, got {alpha}")));
        }
        available.sort_unstable();
        available.dedup();
        if let Some(&last) = available.last() {
            if last >= scores.len() {
                return Err(BsflError::UnknownClient {
                    client: last,
                    num_clients: scores.len(),
                });
            }
        }
        if num_channels == 0 || available.len() < num_channels {
            return Err(BsflError::InsufficientClients {
                available: available.len(),
                required: num_channels.max(1),
            });
        }
        Ok(Self {
            scores,
            g,
            alpha,
            num_channels,
            available,
        })
    }

    /// All clients available, all scores finite.
    pub fn from_values(scores: &[f64], g: &[f64], alpha: f64, num_channels: usize) -> Result<Self> {
        Self::new(
            scores.iter().map(|&s| Score::Finite(s)).collect(),
            g.to_vec(),
            alpha,
            num_channels,
            (0..scores.len()).collect(),
        )
    }

    pub fn score(&self, client: usize) -> Score {
        self.scores[client]
    }

    pub fn g(&self, client: usize) -> f64 {
        self.g[client]
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn available(&self) -> &[usize] {
        &self.available
    }

    pub(crate) fn g_scale(&self) -> f64 {
        self.alpha / self.num_channels as f64
    }

    /// Energy of `set`: minimum score plus the scaled g-sum. The result is
    /// the infinite kind only when every member is unobserved.
    pub fn energy(&self, set: &SelectionSet) -> Energy {
        self.energy_of(set.members())
    }

    pub(crate) fn energy_of(&self, members: &[usize]) -> Energy {
        let mut min = f64::INFINITY;
        let mut gsum = 0.0;
        for &k in members {
            min = min.min(self.scores[k].key());
            gsum += self.g[k];
        }
        self.energy_from(min, gsum)
    }

    /// Single place where the finite value is assembled, so every solver
    /// produces bit-identical energies for the same set.
    #[inline]
    pub(crate) fn energy_from(&self, min_key: f64, gsum: f64) -> Energy {
        let g_term = self.g_scale() * gsum;
        if min_key == f64::INFINITY {
            Energy::UnobservedInfinite { g_term }
        } else {
            Energy::Finite {
                value: min_key + g_term,
                g_term,
            }
        }
    }

    /// Crude bound on the spread of energies: score range plus the largest
    /// possible swing of the g term. Used as the default temperature scale
    /// for benchmark instances.
    pub fn energy_span_bound(&self) -> f64 {
        let finite: Vec<f64> = self
            .available
            .iter()
            .filter_map(|&k| self.scores[k].finite())
            .collect();
        let score_span = if finite.is_empty() {
            0.0
        } else {
            finite.iter().cloned().fold(f64::MIN, f64::max)
                - finite.iter().cloned().fold(f64::MAX, f64::min)
        };
        let mut gs: Vec<f64> = self.available.iter().map(|&k| self.g[k]).collect();
        gs.sort_by(|a, b| a.total_cmp(b));
        let m = self.num_channels;
        let low: f64 = gs[..m].iter().sum();
        let high: f64 = gs[gs.len() - m..].iter().sum();
        score_span + self.g_scale() * (high - low)
    }

    /// Checks that `set` is an `m`-subset of the available clients.
    pub fn check_set(&self, set: &SelectionSet) -> Result<()> {
        if set.len() != self.num_channels {
            return Err(BsflError::InvalidInput(format!(
                "set has {} members, expected {}",
                set.len(),
                self.num_channels
            )));
        }
        if let Some(&k) = set
            .members()
            .iter()
            .find(|&&k| self.available.binary_search(&k).is_err())
        {
            return Err(BsflError::InvalidInput(format!("client {k} is not available")));
        }
        Ok(())
    }
}
