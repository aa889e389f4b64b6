use serde::{Deserialize, Serialize};

use super::params::{speed_of, SystemParams};
use super::selection::SelectionSet;
use crate::error::{BsflError, Result};

/// Per-client selection counters and sample-mean speeds.
///
/// `round` counts completed rounds. This is the sufficient statistic for both
/// the UCB indices and the generalization function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionHistory {
    round: u64,
    counts: Vec<u64>,
    mean_speed: Vec<f64>,
}

impl SelectionHistory {
    pub fn new(num_clients: usize) -> Self {
        Self {
            round: 0,
            counts: vec![0; num_clients],
            mean_speed: vec![0.0; num_clients],
        }
    }

    pub fn num_clients(&self) -> usize {
        self.counts.len()
    }

    /// Number of completed rounds.
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn count(&self, client: usize) -> u64 {
        self.counts[client]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn observed(&self, client: usize) -> bool {
        self.counts[client] > 0
    }

    /// Sample-mean speed, `None` until the client has been observed.
    pub fn mean_speed(&self, client: usize) -> Option<f64> {
        self.observed(client).then(|| self.mean_speed[client])
    }

    /// Empirical selection rate `c[k] / t`, defined as 0 before the first
    /// completed round.
    pub fn selection_rate(&self, client: usize) -> f64 {
        if self.round == 0 {
            0.0
        } else {
            self.counts[client] as f64 / self.round as f64
        }
    }

    /// Folds one latency observation into the client's counter and running
    /// mean.
    pub fn record_observation(
        &mut self,
        client: usize,
        latency: f64,
        params: &SystemParams,
    ) -> Result<()> {
        if client >= self.counts.len() {
            return Err(BsflError::UnknownClient {
                client,
                num_clients: self.counts.len(),
            });
        }
        let speed = speed_of(latency, params)?;
        let old = self.counts[client];
        let new = old + 1;
        self.mean_speed[client] = (self.mean_speed[client] * old as f64 + speed) / new as f64;
        self.counts[client] = new;
        Ok(())
    }

    /// Marks the current round as complete.
    pub fn advance_round(&mut self) {
        self.round += 1;
    }

    /// Records every chosen client's latency, then advances the round.
    pub fn record_round(
        &mut self,
        chosen: &SelectionSet,
        latencies: &[f64],
        params: &SystemParams,
    ) -> Result<()> {
        if chosen.len() != latencies.len() {
            return Err(BsflError::InvalidInput(format!(
                "{} latencies for {} chosen clients",
                latencies.len(),
                chosen.len()
            )));
        }
        for (&client, &latency) in chosen.members().iter().zip(latencies) {
            self.record_observation(client, latency, params)?;
        }
        self.advance_round();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> SystemParams {
        SystemParams {
            num_clients: 4,
            num_channels: 2,
            alpha: 1.0,
            beta: 1,
            tau_min: 1.0,
            tau_max: 10.0,
            delta_min: 0.1,
            rng_seed: 0,
        }
    }

    #[test]
    fn first_observation_sets_mean() {
        let p = params();
        let mut h = SelectionHistory::new(4);
        assert_eq!(h.mean_speed(1), None);
        // speed 0.7 <=> latency 1/0.7
        h.record_observation(1, 1.0 / 0.7, &p).unwrap();
        assert_eq!(h.count(1), 1);
        assert!((h.mean_speed(1).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(h.count(0), 0);
        assert!(!h.observed(0));
    }

    #[test]
    fn running_mean_update() {
        let p = params();
        let mut h = SelectionHistory::new(4);
        // four observations averaging 0.4: speeds 0.4 each (latency 2.5)
        for _ in 0..4 {
            h.record_observation(2, 2.5, &p).unwrap();
        }
        assert!((h.mean_speed(2).unwrap() - 0.4).abs() < 1e-15);
        h.record_observation(2, 1.0 / 0.9, &p).unwrap();
        assert_eq!(h.count(2), 5);
        assert!((h.mean_speed(2).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_unknown_client() {
        let p = params();
        let mut h = SelectionHistory::new(4);
        assert!(matches!(
            h.record_observation(4, 2.0, &p),
            Err(BsflError::UnknownClient { client: 4, .. })
        ));
    }

    #[test]
    fn selection_rate_at_zero_rounds() {
        let h = SelectionHistory::new(3);
        assert_eq!(h.selection_rate(0), 0.0);
    }

    #[test]
    fn order_independent_mean() {
        let p = params();
        let lat = [1.3, 7.2, 2.2, 9.9, 4.4, 1.0, 3.3];
        let mut a = SelectionHistory::new(1);
        let mut b = SelectionHistory::new(1);
        for &l in &lat {
            a.record_observation(0, l, &p).unwrap();
        }
        for &l in lat.iter().rev() {
            b.record_observation(0, l, &p).unwrap();
        }
        assert!((a.mean_speed(0).unwrap() - b.mean_speed(0).unwrap()).abs() < 1e-12);
    }
}
