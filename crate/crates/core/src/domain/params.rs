use serde::{Deserialize, Serialize};

use crate::environment::LatencyLaw;
use crate::error::{BsflError, Result};

/// Global parameters of one federated scheduling problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Number of clients `K`.
    pub num_clients: usize,
    /// Number of uplink channels `m`, i.e. clients scheduled per round.
    pub num_channels: usize,
    /// Weight of the generalization term in the reward.
    pub alpha: f64,
    /// Exponent of the generalization function.
    pub beta: u32,
    /// Smallest achievable round latency, seconds.
    pub tau_min: f64,
    /// Latency deadline; slower clients are truncated to it, seconds.
    pub tau_max: f64,
    /// Reward quantization step. Only consumed by the regret bound.
    pub delta_min: f64,
    pub rng_seed: u64,
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_channels == 0 || self.num_channels > self.num_clients {
            return Err(BsflError::config(
                "num_channels",
                format!(
                    "must satisfy 1 <= num_channels <= num_clients (got {} channels, {} clients)",
                    self.num_channels, self.num_clients
                ),
            ));
        }
        if !(self.tau_min > 0.0 && self.tau_min.is_finite()) {
            return Err(BsflError::config("tau_min", "must be a positive finite number"));
        }
        if !(self.tau_max > self.tau_min && self.tau_max.is_finite()) {
            return Err(BsflError::config("tau_max", "must be finite and greater than tau_min"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(BsflError::config("alpha", "must be a finite number >= 0"));
        }
        if self.beta == 0 {
            return Err(BsflError::config("beta", "must be a natural number >= 1"));
        }
        if !(self.delta_min > 0.0 && self.delta_min.is_finite()) {
            return Err(BsflError::config("delta_min", "must be a positive finite number"));
        }
        Ok(())
    }

    /// Lowest possible speed, `tau_min / tau_max`.
    pub fn min_speed(&self) -> f64 {
        self.tau_min / self.tau_max
    }

    pub fn clip_latency(&self, latency: f64) -> f64 {
        latency.clamp(self.tau_min, self.tau_max)
    }
}

/// Normalized speed `tau_min / clip(latency)`, in `[tau_min/tau_max, 1]`.
pub fn speed_of(latency: f64, params: &SystemParams) -> Result<f64> {
    if !(latency > 0.0) || latency.is_nan() {
        return Err(BsflError::InvalidInput(format!(
            "latency must be positive, got {latency}"
        )));
    }
    Ok(params.tau_min / params.clip_latency(latency))
}

/// Hidden per-client environment state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientProfile {
    pub id: usize,
    pub latency_law: LatencyLaw,
    /// Number of local samples `|X_k|`.
    pub data_size: u64,
    /// Data quality `q_k` in `[0, 1]`.
    pub data_quality: f64,
    significance: f64,
}

impl ClientProfile {
    pub fn new(id: usize, latency_law: LatencyLaw, data_size: u64, data_quality: f64) -> Result<Self> {
        if data_size == 0 {
            return Err(BsflError::InvalidInput(format!(
                "client {id}: data_size must be at least 1"
            )));
        }
        if !(0.0..=1.0).contains(&data_quality) {
            return Err(BsflError::InvalidInput(format!(
                "client {id}: data_quality must lie in [0, 1], got {data_quality}"
            )));
        }
        Ok(Self {
            id,
            latency_law,
            data_size,
            data_quality,
            significance: data_quality * data_size as f64,
        })
    }

    /// `d_k = q_k * |X_k|`.
    pub fn significance(&self) -> f64 {
        self.significance
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn params(tau_min: f64, tau_max: f64) -> SystemParams {
        SystemParams {
            num_clients: 20,
            num_channels: 5,
            alpha: 1.0,
            beta: 1,
            tau_min,
            tau_max,
            delta_min: 0.1,
            rng_seed: 0,
        }
    }

    #[test]
    fn speed_examples() {
        let p = params(1.0, 10.0);
        assert_eq!(speed_of(1.0, &p).unwrap(), 1.0);
        assert_eq!(speed_of(10.0, &p).unwrap(), 0.1);
        assert_eq!(speed_of(250.0, &p).unwrap(), 0.1);
        assert_eq!(speed_of(2.0, &p).unwrap(), 0.5);
        // below tau_min saturates at 1
        assert_eq!(speed_of(0.3, &p).unwrap(), 1.0);
    }

    #[test]
    fn speed_rejects_non_positive() {
        let p = params(1.0, 10.0);
        assert!(speed_of(0.0, &p).is_err());
        assert!(speed_of(-1.0, &p).is_err());
        assert!(speed_of(f64::NAN, &p).is_err());
    }

    #[test]
    fn speed_is_monotone() {
        let p = params(0.5, 8.0);
        let mut last = f64::INFINITY;
        for i in 1..2000 {
            let s = speed_of(i as f64 * 0.01, &p).unwrap();
            assert!(s <= last);
            assert!((p.min_speed()..=1.0).contains(&s));
            last = s;
        }
    }

    #[test]
    fn validation_names_the_field() {
        let mut p = params(1.0, 10.0);
        p.num_channels = 21;
        match p.validate() {
            Err(BsflError::Config { field, .. }) => assert_eq!(field, "num_channels"),
            other => panic!("unexpected {other:?}"),
        }
        let mut p = params(1.0, 10.0);
        p.tau_max = 1.0;
        assert!(p.validate().is_err());
        let mut p = params(1.0, 10.0);
        p.beta = 0;
        assert!(p.validate().is_err());
        assert!(params(1.0, 10.0).validate().is_ok());
    }

    #[test]
    fn significance_is_product() {
        let c = ClientProfile::new(3, LatencyLaw::Fixed { latency: 2.0 }, 400, 0.25).unwrap();
        assert_eq!(c.significance(), 100.0);
        assert!(ClientProfile::new(0, LatencyLaw::Fixed { latency: 2.0 }, 0, 0.5).is_err());
        assert!(ClientProfile::new(0, LatencyLaw::Fixed { latency: 2.0 }, 5, 1.5).is_err());
    }
}
