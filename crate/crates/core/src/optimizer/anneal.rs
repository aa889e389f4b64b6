use rand::Rng;
use serde::{Deserialize, Serialize};

use super::neighborhood::{sample_swap, Neighborhood};
use super::ScoreTable;
use crate::domain::{Energy, SelectionSet};
use crate::environment::random_subset;
use crate::error::{BsflError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealerConfig {
    /// Number of chain states, the random start included.
    pub steps: u64,
    pub neighborhood: Neighborhood,
    /// Temperature numerator: `T_i = d / ln(i + 1)`. Defaults to
    /// `2 * alpha + 1`.
    #[serde(default)]
    pub d: Option<f64>,
    /// Energy gap charged for leaving an all-unobserved state. Defaults to
    /// `1000 * d`.
    #[serde(default)]
    pub surrogate_gap: Option<f64>,
    #[serde(default)]
    pub record_trace: bool,
}

impl AnnealerConfig {
    pub fn new(steps: u64, neighborhood: Neighborhood) -> Self {
        Self {
            steps,
            neighborhood,
            d: None,
            surrogate_gap: None,
            record_trace: false,
        }
    }

    pub fn with_d(mut self, d: f64) -> Self {
        self.d = Some(d);
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(BsflError::config("steps", "annealer needs at least one step"));
        }
        if let Some(d) = self.d {
            if !(d > 0.0 && d.is_finite()) {
                return Err(BsflError::config("d", "temperature numerator must be > 0"));
            }
        }
        if let Some(gap) = self.surrogate_gap {
            if !(gap > 0.0 && gap.is_finite()) {
                return Err(BsflError::config("surrogate_gap", "must be > 0"));
            }
        }
        Ok(())
    }

    pub fn temperature_numerator(&self, alpha: f64) -> f64 {
        self.d.unwrap_or(2.0 * alpha + 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: u64,
    pub current: Energy,
    pub best: Energy,
    /// Temperature the move into this row's state was judged at; row 0
    /// carries the first proposal's temperature `d / ln 2`.
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealResult {
    pub best: SelectionSet,
    pub best_energy: Energy,
    pub final_state: SelectionSet,
    pub accepted: u64,
    pub trace: Vec<TraceRow>,
}

/// Metropolis chain with logarithmic cooling from a uniformly random start.
///
/// Uphill and equal moves are always taken; a downhill move by `delta` is
/// taken with probability `exp(-delta / T_i)`. The best state visited is
/// returned.
pub fn anneal<R: Rng + ?Sized>(
    table: &ScoreTable,
    config: &AnnealerConfig,
    rng: &mut R,
) -> Result<AnnealResult> {
    config.validate()?;
    let d = config.temperature_numerator(table.alpha());
    let gap = config.surrogate_gap.unwrap_or(1e3 * d);
    let m = table.num_channels();

    let start = random_subset(table.available(), m, rng);
    let mut members = start.members().to_vec();
    let mut outside: Vec<usize> = table
        .available()
        .iter()
        .copied()
        .filter(|k| members.binary_search(k).is_err())
        .collect();
    let mut energy = table.energy_of(&members);
    let mut best = (members.clone(), energy);
    let mut accepted = 0;

    let mut trace = Vec::new();
    if config.record_trace {
        trace.reserve(config.steps as usize);
        trace.push(TraceRow {
            step: 0,
            current: energy,
            best: energy,
            temperature: d / 2f64.ln(),
        });
    }

    let mut candidate = Vec::with_capacity(m);
    for i in 1..config.steps {
        let temperature = d / ((i + 1) as f64).ln();
        if let Some(swap) = sample_swap(&members, &outside, table, config.neighborhood, rng) {
            candidate.clear();
            candidate.extend(members.iter().copied().filter(|&k| k != swap.out));
            let pos = candidate.partition_point(|&k| k < swap.incoming);
            candidate.insert(pos, swap.incoming);
            let proposed = table.energy_of(&candidate);

            let accept = if proposed >= energy {
                true
            } else {
                let delta = proposed.difference(&energy, gap);
                rng.random::<f64>() < (delta / temperature).exp()
            };
            if accept {
                std::mem::swap(&mut members, &mut candidate);
                let pos = outside.binary_search(&swap.incoming).expect("incoming was outside");
                outside.remove(pos);
                let pos = outside.partition_point(|&k| k < swap.out);
                outside.insert(pos, swap.out);
                energy = proposed;
                accepted += 1;
                if energy > best.1 {
                    best = (members.clone(), energy);
                }
            }
        }
        if config.record_trace {
            trace.push(TraceRow {
                step: i,
                current: energy,
                best: best.1,
                temperature,
            });
        }
    }

    Ok(AnnealResult {
        best: SelectionSet::from_sorted(best.0),
        best_energy: best.1,
        final_state: SelectionSet::from_sorted(members),
        accepted,
        trace,
    })
}
