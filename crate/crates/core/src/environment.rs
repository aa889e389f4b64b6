//! The hidden world: per-client latency laws, round latency, realized reward
//! and client availability.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{speed_of, ClientProfile, SelectionHistory, SelectionSet, SystemParams};
use crate::error::{BsflError, Result};
use crate::generalization::Generalization;
use crate::rng::{self, purpose, SimRng};

/// A client's raw latency distribution in seconds. Draws are clipped to
/// `[tau_min, tau_max]` by the environment, never by the law itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum LatencyLaw {
    /// `exp(N(log_mean, log_sd^2))`.
    TruncatedLogNormal { log_mean: f64, log_sd: f64 },
    /// `offset + Exp(rate)`.
    TruncatedExponential { offset: f64, rate: f64 },
    Fixed { latency: f64 },
}

impl LatencyLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            LatencyLaw::TruncatedLogNormal { log_mean, log_sd } => {
                log_mean.is_finite() && log_sd.is_finite() && log_sd >= 0.0
            }
            LatencyLaw::TruncatedExponential { offset, rate } => {
                offset.is_finite() && offset >= 0.0 && rate.is_finite() && rate > 0.0
            }
            LatencyLaw::Fixed { latency } => latency.is_finite() && latency > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(BsflError::InvalidInput(format!("invalid latency law {self:?}")))
        }
    }

    /// One raw (unclipped) draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            LatencyLaw::TruncatedLogNormal { log_mean, log_sd } => LogNormal::new(log_mean, log_sd)
                .expect("validated log-normal parameters")
                .sample(rng),
            LatencyLaw::TruncatedExponential { offset, rate } => {
                let x: f64 = Exp::new(rate).expect("validated rate").sample(rng);
                // offset 0 could yield an exact zero draw
                (offset + x).max(f64::MIN_POSITIVE)
            }
            LatencyLaw::Fixed { latency } => latency,
        }
    }

    /// True mean speed `E[tau_min / clip(tau)]`: exact for `Fixed`, Monte
    /// Carlo with `samples` draws otherwise.
    pub fn mean_speed<R: Rng + ?Sized>(
        &self,
        params: &SystemParams,
        samples: usize,
        rng: &mut R,
    ) -> Result<f64> {
        self.validate()?;
        if let LatencyLaw::Fixed { latency } = *self {
            return speed_of(latency, params);
        }
        if samples == 0 {
            return Err(BsflError::InvalidInput("mean_speed needs samples > 0".into()));
        }
        let mut total = 0.0;
        for _ in 0..samples {
            total += params.tau_min / params.clip_latency(self.sample(rng));
        }
        Ok(total / samples as f64)
    }
}

/// How the set of reachable clients is drawn each round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Availability {
    /// Every client, every round.
    #[default]
    Full,
    /// Each client independently present with probability `p`, redrawn
    /// until at least `m` are present.
    Bernoulli { p: f64 },
}

impl Availability {
    pub fn validate(&self) -> Result<()> {
        if let Availability::Bernoulli { p } = *self {
            if !(p > 0.0 && p <= 1.0) {
                return Err(BsflError::config("availability.p", "must lie in (0, 1]"));
            }
        }
        Ok(())
    }
}

/// Clients reachable this round, in increasing id order.
pub fn availability<R: Rng + ?Sized>(
    mode: Availability,
    params: &SystemParams,
    rng: &mut R,
) -> Vec<usize> {
    let k = params.num_clients;
    match mode {
        Availability::Full => (0..k).collect(),
        Availability::Bernoulli { p } => loop {
            let present: Vec<usize> = (0..k).filter(|_| rng.random_bool(p)).collect();
            if present.len() >= params.num_channels {
                break present;
            }
        },
    }
}

/// One clipped draw per chosen client, in member order.
pub fn sample_round<R: Rng + ?Sized>(
    profiles: &[ClientProfile],
    chosen: &SelectionSet,
    params: &SystemParams,
    rng: &mut R,
) -> Vec<f64> {
    chosen
        .members()
        .iter()
        .map(|&k| params.clip_latency(profiles[k].latency_law.sample(rng)))
        .collect()
}

/// Round latency: the slowest participant, capped at the deadline.
pub fn iteration_latency(latencies: &[f64], params: &SystemParams) -> Result<f64> {
    let slowest = latencies
        .iter()
        .copied()
        .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))))
        .ok_or_else(|| BsflError::InvalidInput("no latencies for this round".into()))?;
    Ok(slowest.min(params.tau_max))
}

/// Reward observed at the end of a round: the slowest participant's speed
/// plus the scaled generalization sum (evaluated on the pre-round history).
pub fn realized_reward<G: Generalization + ?Sized>(
    latencies: &[f64],
    chosen: &SelectionSet,
    history: &SelectionHistory,
    generalization: &G,
    params: &SystemParams,
) -> Result<f64> {
    if chosen.len() != params.num_channels || latencies.len() != chosen.len() {
        return Err(BsflError::InvalidInput(format!(
            "expected {} chosen clients with latencies, got {} clients and {} latencies",
            params.num_channels,
            chosen.len(),
            latencies.len()
        )));
    }
    let mut slowest_speed = f64::INFINITY;
    for &l in latencies {
        slowest_speed = slowest_speed.min(speed_of(l, params)?);
    }
    let g = generalization.sum(history, chosen);
    Ok(slowest_speed + params.alpha / params.num_channels as f64 * g)
}

/// A fully built environment: parameters, client profiles and their cached
/// true mean speeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub params: SystemParams,
    pub profiles: Vec<ClientProfile>,
    pub true_means: Vec<f64>,
    pub availability: Availability,
}

impl Scenario {
    /// Caches `mu_k` for every profile using the scenario's mean-speed stream.
    pub fn new(
        params: SystemParams,
        profiles: Vec<ClientProfile>,
        availability: Availability,
        mean_speed_samples: usize,
    ) -> Result<Self> {
        params.validate()?;
        availability.validate()?;
        if profiles.len() != params.num_clients {
            return Err(BsflError::InvalidInput(format!(
                "{} profiles for {} clients",
                profiles.len(),
                params.num_clients
            )));
        }
        let true_means = profiles
            .iter()
            .map(|p| {
                let mut r = rng::derive(params.rng_seed, purpose::MEAN_SPEED, "", p.id as u64);
                p.latency_law.mean_speed(&params, mean_speed_samples, &mut r)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params,
            profiles,
            true_means,
            availability,
        })
    }

    /// Clipped latencies of the chosen clients at `round`. Each
    /// `(round, client)` pair owns its own stream, so two policies choosing
    /// the same client in the same round see the same latency.
    pub fn latencies(&self, round: u64, chosen: &SelectionSet) -> Vec<f64> {
        chosen
            .members()
            .iter()
            .map(|&k| {
                let mut r = self.latency_rng(round, k);
                self.params
                    .clip_latency(self.profiles[k].latency_law.sample(&mut r))
            })
            .collect()
    }

    fn latency_rng(&self, round: u64, client: usize) -> SimRng {
        rng::derive(
            self.params.rng_seed,
            purpose::LATENCY,
            "",
            (round << 24) | client as u64,
        )
    }

    pub fn available(&self, round: u64) -> Vec<usize> {
        let mut r = rng::derive(self.params.rng_seed, purpose::AVAILABILITY, "", round);
        availability(self.availability, &self.params, &mut r)
    }
}

/// Uniformly random `m`-subset of `available`.
pub(crate) fn random_subset<R: Rng + ?Sized>(
    available: &[usize],
    m: usize,
    rng: &mut R,
) -> SelectionSet {
    let mut members: Vec<usize> = index::sample(rng, available.len(), m)
        .into_iter()
        .map(|i| available[i])
        .collect();
    members.sort_unstable();
    SelectionSet::from_sorted(members)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generalization::GeneralizationSpec;
    use rand::SeedableRng;

    fn params() -> SystemParams {
        SystemParams {
            num_clients: 20,
            num_channels: 5,
            alpha: 1.0,
            beta: 1,
            tau_min: 1.0,
            tau_max: 10.0,
            delta_min: 0.1,
            rng_seed: 11,
        }
    }

    #[test]
    fn fixed_law_is_constant() {
        let law = LatencyLaw::Fixed { latency: 2.0 };
        let mut r = SimRng::seed_from_u64(1);
        for _ in 0..10 {
            assert_eq!(law.sample(&mut r), 2.0);
        }
        assert_eq!(law.mean_speed(&params(), 10, &mut r).unwrap(), 0.5);
    }

    #[test]
    fn same_seed_same_draws() {
        let profiles: Vec<ClientProfile> = (0..3)
            .map(|k| {
                ClientProfile::new(
                    k,
                    LatencyLaw::TruncatedLogNormal {
                        log_mean: 1.0,
                        log_sd: 0.5,
                    },
                    1,
                    1.0,
                )
                .unwrap()
            })
            .collect();
        let set = SelectionSet::new(vec![0, 2], 3).unwrap();
        let a = sample_round(&profiles, &set, &params(), &mut SimRng::seed_from_u64(5));
        let b = sample_round(&profiles, &set, &params(), &mut SimRng::seed_from_u64(5));
        assert_eq!(a, b);
        assert!(a.iter().all(|&l| (1.0..=10.0).contains(&l)));
    }

    #[test]
    fn iteration_latency_examples() {
        let p = params();
        assert_eq!(iteration_latency(&[2.0, 5.0], &p).unwrap(), 5.0);
        assert_eq!(iteration_latency(&[12.0], &p).unwrap(), 10.0);
        assert_eq!(iteration_latency(&[1.0], &p).unwrap(), 1.0);
        assert!(iteration_latency(&[], &p).is_err());
    }

    #[test]
    fn reward_examples() {
        let mut p = params();
        p.num_clients = 4;
        p.num_channels = 2;
        let g = GeneralizationSpec::iid_balanced(4, 2, 1).unwrap();
        // with empty history g = m/K = 0.5 per client, so build a history at
        // the target rate
        let mut h = SelectionHistory::new(4);
        h.record_round(&SelectionSet::new(vec![0, 1], 4).unwrap(), &[1.0, 1.0], &p)
            .unwrap();
        h.record_round(&SelectionSet::new(vec![2, 3], 4).unwrap(), &[1.0, 1.0], &p)
            .unwrap();
        let set = SelectionSet::new(vec![1, 2], 4).unwrap();
        let r = realized_reward(&[2.0, 5.0], &set, &h, &g, &p).unwrap();
        assert!((r - 0.2).abs() < 1e-15);
        let r = realized_reward(&[1.0, 1.0], &set, &h, &g, &p).unwrap();
        assert_eq!(r, 1.0);

        p.alpha = 0.0;
        let fresh = SelectionHistory::new(4);
        let r = realized_reward(&[2.0, 4.0], &set, &fresh, &g, &p).unwrap();
        assert_eq!(r, 0.25);
    }

    #[test]
    fn availability_modes() {
        let p = params();
        let mut r = SimRng::seed_from_u64(3);
        assert_eq!(availability(Availability::Full, &p, &mut r), (0..20).collect::<Vec<_>>());
        assert_eq!(
            availability(Availability::Bernoulli { p: 1.0 }, &p, &mut r),
            (0..20).collect::<Vec<_>>()
        );
        for _ in 0..2000 {
            let a = availability(Availability::Bernoulli { p: 0.3 }, &p, &mut r);
            assert!(a.len() >= 5);
            assert!(a.windows(2).all(|w| w[0] < w[1]));
        }
        assert!(Availability::Bernoulli { p: 0.0 }.validate().is_err());
    }

    #[test]
    fn scenario_latencies_are_shared_per_round_and_client() {
        let p = params();
        let profiles: Vec<ClientProfile> = (0..20)
            .map(|k| {
                ClientProfile::new(
                    k,
                    LatencyLaw::TruncatedExponential {
                        offset: 1.0,
                        rate: 0.5,
                    },
                    1,
                    1.0,
                )
                .unwrap()
            })
            .collect();
        let s = Scenario::new(p, profiles, Availability::Full, 1000).unwrap();
        let a = s.latencies(7, &SelectionSet::new(vec![1, 4, 9, 10, 11], 20).unwrap());
        let b = s.latencies(7, &SelectionSet::new(vec![0, 4, 5, 6, 11], 20).unwrap());
        assert_eq!(a[1], b[1]);
        assert_eq!(a[4], b[4]);
        let c = s.latencies(8, &SelectionSet::new(vec![1, 4, 9, 10, 11], 20).unwrap());
        assert_ne!(a, c);
    }
}
