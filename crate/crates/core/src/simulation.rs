//! The round loop: select, sample latencies, score, record, update.

use serde::{Deserialize, Serialize};

use crate::domain::{SelectionHistory, SelectionSet};
use crate::environment::{iteration_latency, realized_reward, Scenario};
use crate::error::{BsflError, Result};
use crate::evaluation::{expected_reward, instantaneous_gap, RegretSeries};
use crate::generalization::GeneralizationSpec;
use crate::optimizer::{binomial, DEFAULT_ENUMERATION_CAP};
use crate::policies::{genie_select, Policy};
use crate::rng::SimRng;

/// When a run stops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Horizon {
    Rounds(u64),
    /// Simulated wall-clock budget. A round counts only if it finishes
    /// within the budget.
    Seconds(f64),
}

impl Horizon {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Horizon::Rounds(_) => Ok(()),
            Horizon::Seconds(s) if s > 0.0 && s.is_finite() => Ok(()),
            Horizon::Seconds(_) => Err(BsflError::config("horizon.seconds", "must be a positive finite number")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub horizon: Horizon,
    /// Evaluate the genie every round and record the pseudo-regret gap.
    pub regret: bool,
    pub genie_cap: u128,
}

impl RunOptions {
    pub fn rounds(n: u64) -> Self {
        Self {
            horizon: Horizon::Rounds(n),
            regret: true,
            genie_cap: DEFAULT_ENUMERATION_CAP,
        }
    }

    pub fn seconds(budget: f64) -> Self {
        Self {
            horizon: Horizon::Seconds(budget),
            regret: false,
            genie_cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

/// Everything that happened in one completed round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based round index.
    pub round: u64,
    pub chosen: SelectionSet,
    /// Clipped latencies, in member order.
    pub latencies: Vec<f64>,
    pub iteration_latency: f64,
    pub realized_reward: f64,
    /// Expected reward of the chosen set with true means.
    pub expected_reward: f64,
    pub genie_set: Option<SelectionSet>,
    pub gap: Option<f64>,
    pub cumulative_clock: f64,
}

/// Hook called after every completed round, before the next selection.
pub trait RoundObserver {
    fn observe(&mut self, record: &RoundRecord) -> Result<()>;
}

impl RoundObserver for () {
    fn observe(&mut self, _: &RoundRecord) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<RoundRecord>,
    pub history: SelectionHistory,
    pub regret: Option<RegretSeries>,
}

/// Runs `policy` on `scenario`. The reward (and the regret) uses the
/// scenario's `alpha` with `generalization`; the policy may use its own.
pub fn simulate(
    scenario: &Scenario,
    generalization: &GeneralizationSpec,
    policy: &mut dyn Policy,
    options: &RunOptions,
    rng: &mut SimRng,
    observer: &mut dyn RoundObserver,
) -> Result<RunOutcome> {
    options.horizon.validate()?;
    let params = &scenario.params;
    if options.regret {
        let candidates = binomial(params.num_clients, params.num_channels);
        if candidates > options.genie_cap {
            return Err(BsflError::EnumerationCapExceeded {
                candidates,
                cap: options.genie_cap,
            });
        }
    }
    let mut history = SelectionHistory::new(params.num_clients);
    let mut records = Vec::new();
    let mut regret = options.regret.then(RegretSeries::default);
    let mut clock = 0.0;
    let mut round = 0u64;
    loop {
        if let Horizon::Rounds(n) = options.horizon {
            if round >= n {
                break;
            }
        }
        round += 1;
        let available = scenario.available(round);
        let chosen = policy.select(&history, &available, rng)?;
        let latencies = scenario.latencies(round, &chosen);
        let it = iteration_latency(&latencies, params)?;
        if let Horizon::Seconds(budget) = options.horizon {
            if clock + it > budget {
                break;
            }
        }
        let reward = realized_reward(&latencies, &chosen, &history, generalization, params)?;
        let expected = expected_reward(&scenario.true_means, &chosen, &history, generalization, params.alpha);
        let (genie_set, gap) = match regret.as_mut() {
            Some(series) => {
                let (genie, _) = genie_select(
                    &scenario.true_means,
                    &history,
                    generalization,
                    params.alpha,
                    params.num_channels,
                    &available,
                    options.genie_cap,
                )?;
                let gap = instantaneous_gap(
                    &genie,
                    &chosen,
                    &scenario.true_means,
                    &history,
                    generalization,
                    params.alpha,
                );
                series.push(gap, genie.clone(), clock + it);
                (Some(genie), Some(gap.value))
            }
            None => (None, None),
        };
        history.record_round(&chosen, &latencies, params)?;
        policy.update(&history);
        clock += it;
        let record = RoundRecord {
            round,
            chosen,
            latencies,
            iteration_latency: it,
            realized_reward: reward,
            expected_reward: expected,
            genie_set,
            gap,
            cumulative_clock: clock,
        };
        observer.observe(&record)?;
        records.push(record);
    }
    Ok(RunOutcome {
        records,
        history,
        regret,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ClientProfile, SystemParams};
    use crate::environment::{Availability, LatencyLaw};
    use crate::policies::{Bsfl, RandomUniform, SolverChoice};
    use rand::SeedableRng;

    fn fixed_scenario(lat: &[f64], m: usize) -> Scenario {
        let params = SystemParams {
            num_clients: lat.len(),
            num_channels: m,
            alpha: 1.0,
            beta: 1,
            tau_min: 1.0,
            tau_max: 10.0,
            delta_min: 0.05,
            rng_seed: 3,
        };
        let profiles = lat
            .iter()
            .enumerate()
            .map(|(k, &l)| ClientProfile::new(k, LatencyLaw::Fixed { latency: l }, 100, 1.0).unwrap())
            .collect();
        Scenario::new(params, profiles, Availability::Full, 0).unwrap()
    }

    #[test]
    fn clock_is_prefix_sum_and_budget_respected() {
        let sc = fixed_scenario(&[1.0, 2.0, 4.0, 3.0], 2);
        let g = GeneralizationSpec::iid_balanced(4, 2, 1).unwrap();
        let mut p = RandomUniform::new("rand", 2);
        let mut rng = SimRng::seed_from_u64(0);
        let out = simulate(&sc, &g, &mut p, &RunOptions::seconds(50.0), &mut rng, &mut ()).unwrap();
        let mut sum = 0.0;
        for r in &out.records {
            sum += r.iteration_latency;
            assert_eq!(r.cumulative_clock, sum);
        }
        assert!(sum <= 50.0);
        assert!(out.records.len() >= 12);
        let out = simulate(&sc, &g, &mut p, &RunOptions::seconds(0.5), &mut rng, &mut ()).unwrap();
        assert!(out.records.is_empty());
    }

    #[test]
    fn counters_conserved_and_gaps_nonnegative() {
        let sc = fixed_scenario(&[1.0, 2.0, 4.0, 3.0, 1.5, 6.0], 3);
        let g = GeneralizationSpec::iid_balanced(6, 3, 1).unwrap();
        let mut p = Bsfl::new("bsfl", 1.0, 3, g.clone(), SolverChoice::default()).unwrap();
        let mut rng = SimRng::seed_from_u64(0);
        let out = simulate(&sc, &g, &mut p, &RunOptions::rounds(200), &mut rng, &mut ()).unwrap();
        assert_eq!(out.history.round(), 200);
        assert_eq!(out.history.counts().iter().sum::<u64>(), 3 * 200);
        let reg = out.regret.unwrap();
        assert!(reg.gaps.iter().all(|&x| x >= 0.0));
        for (r, genie) in out.records.iter().zip(&reg.genie_sets) {
            if &r.chosen == genie {
                assert_eq!(r.gap, Some(0.0));
            }
        }
    }

    #[test]
    fn cold_start_covers_everyone() {
        let lat: Vec<f64> = (0..20).map(|k| 1.0 + 0.4 * k as f64).collect();
        let sc = fixed_scenario(&lat, 5);
        let g = GeneralizationSpec::iid_balanced(20, 5, 2).unwrap();
        let mut p = Bsfl::new("bsfl", 1.0, 5, g.clone(), SolverChoice::default()).unwrap();
        let mut rng = SimRng::seed_from_u64(0);
        let mut opts = RunOptions::rounds(12);
        opts.regret = false;
        let out = simulate(&sc, &g, &mut p, &opts, &mut rng, &mut ()).unwrap();
        assert!(out.history.counts().iter().all(|&c| c > 0));
    }

    #[test]
    fn regret_refused_when_genie_too_large() {
        let lat = vec![1.0; 40];
        let sc = fixed_scenario(&lat, 20);
        let g = GeneralizationSpec::iid_balanced(40, 20, 1).unwrap();
        let mut p = RandomUniform::new("rand", 20);
        let mut rng = SimRng::seed_from_u64(0);
        let r = simulate(&sc, &g, &mut p, &RunOptions::rounds(1), &mut rng, &mut ());
        assert!(matches!(r, Err(BsflError::EnumerationCapExceeded { .. })));
    }
}
