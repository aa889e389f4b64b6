//! History-dependent generalization scores.
//!
//! Each client has a target selection rate. A client selected less often than
//! its target gets a positive score, one selected more often a negative score,
//! with magnitude `|target - rate|^beta`. The two shipped modes differ only in
//! the target: `m/K` for everybody, or `m * d_k / sum(d)` weighted by data
//! significance.

use serde::{Deserialize, Serialize};

use crate::domain::{ClientProfile, SelectionHistory, SelectionSet};
use crate::error::{BsflError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneralizationMode {
    IidBalanced,
    NonIidWeighted,
}

/// Anything that scores a client's contribution to generalization from the
/// selection history. Implementations must return values in `[-1, 1]`.
pub trait Generalization {
    fn value(&self, history: &SelectionHistory, client: usize) -> f64;

    fn values(&self, history: &SelectionHistory) -> Vec<f64> {
        (0..history.num_clients())
            .map(|k| self.value(history, k))
            .collect()
    }

    /// Raw sum over the members; callers apply the `alpha/m` scaling.
    fn sum(&self, history: &SelectionHistory, set: &SelectionSet) -> f64 {
        set.members().iter().map(|&k| self.value(history, k)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationSpec {
    mode: GeneralizationMode,
    beta: u32,
    target_rate: Vec<f64>,
    /// Optional output grid. When set, scores are rounded to the nearest
    /// multiple (half away from zero, so odd symmetry survives).
    quantum: Option<f64>,
}

impl GeneralizationSpec {
    pub fn iid_balanced(num_clients: usize, num_channels: usize, beta: u32) -> Result<Self> {
        check_beta(beta)?;
        if num_clients == 0 || num_channels == 0 || num_channels > num_clients {
            return Err(BsflError::InvalidInput(format!(
                "need 1 <= m <= K, got m={num_channels}, K={num_clients}"
            )));
        }
        let rate = num_channels as f64 / num_clients as f64;
        Ok(Self {
            mode: GeneralizationMode::IidBalanced,
            beta,
            target_rate: vec![rate; num_clients],
            quantum: None,
        })
    }

    pub fn non_iid_weighted(
        profiles: &[ClientProfile],
        num_channels: usize,
        beta: u32,
    ) -> Result<Self> {
        check_beta(beta)?;
        let total: f64 = profiles.iter().map(ClientProfile::significance).sum();
        if !(total > 0.0) {
            return Err(BsflError::InvalidInput(
                "total data significance must be positive".into(),
            ));
        }
        let m = num_channels as f64;
        Ok(Self {
            mode: GeneralizationMode::NonIidWeighted,
            beta,
            target_rate: profiles.iter().map(|p| m * p.significance() / total).collect(),
            quantum: None,
        })
    }

    pub fn from_mode(
        mode: GeneralizationMode,
        profiles: &[ClientProfile],
        num_channels: usize,
        beta: u32,
    ) -> Result<Self> {
        match mode {
            GeneralizationMode::IidBalanced => {
                Self::iid_balanced(profiles.len(), num_channels, beta)
            }
            GeneralizationMode::NonIidWeighted => {
                Self::non_iid_weighted(profiles, num_channels, beta)
            }
        }
    }

    pub fn with_quantum(mut self, quantum: f64) -> Result<Self> {
        if !(quantum > 0.0 && quantum.is_finite()) {
            return Err(BsflError::InvalidInput(format!(
                "quantum must be positive, got {quantum}"
            )));
        }
        self.quantum = Some(quantum);
        Ok(self)
    }

    pub fn mode(&self) -> GeneralizationMode {
        self.mode
    }

    pub fn beta(&self) -> u32 {
        self.beta
    }

    pub fn quantum(&self) -> Option<f64> {
        self.quantum
    }

    pub fn target_rate(&self, client: usize) -> f64 {
        self.target_rate[client]
    }

    pub fn target_rates(&self) -> &[f64] {
        &self.target_rate
    }

    /// Score for a given empirical selection rate.
    pub fn value_at_rate(&self, client: usize, rate: f64) -> f64 {
        let deficit = self.target_rate[client] - rate;
        let raw = deficit.abs().powi(self.beta as i32) * sign(deficit);
        let raw = match self.quantum {
            Some(q) => (raw / q).round() * q,
            None => raw,
        };
        raw.clamp(-1.0, 1.0)
    }
}

impl Generalization for GeneralizationSpec {
    fn value(&self, history: &SelectionHistory, client: usize) -> f64 {
        self.value_at_rate(client, history.selection_rate(client))
    }
}

/// Sign with `sgn(0) = 0`, so the score vanishes exactly at the target.
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_beta(beta: u32) -> Result<()> {
    if beta == 0 {
        return Err(BsflError::config("beta", "must be a natural number >= 1"));
    }
    Ok(())
}
