//! Client scheduling for federated learning as a combinatorial bandit.
//!
//! Each round a server picks `m` of `K` clients. The reward is the speed of
//! the slowest participant plus a history-dependent generalization bonus that
//! rewards under-selected clients. The [`policies::Bsfl`] policy keeps UCB
//! indices of client speeds and solves the per-round subset argmax either
//! exactly or with simulated annealing ([`optimizer`]); [`evaluation`]
//! measures pseudo-regret against a genie that knows the true mean speeds.
//! [`fedtoy`] runs a small federated linear regression driven by any policy,
//! and [`experiment`] ties it all together behind a JSON config.

pub mod domain;
pub mod environment;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod fedtoy;
pub mod generalization;
pub mod optimizer;
pub mod policies;
pub mod rng;
pub mod simulation;

pub use domain::{speed_of, ClientProfile, Energy, Score, SelectionHistory, SelectionSet, SystemParams};
pub use error::{BsflError, Result};
