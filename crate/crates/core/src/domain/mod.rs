//! Shared domain types: system parameters, client profiles, selection sets,
//! selection history and the extended-real energy used by the solvers.

mod energy;
mod history;
mod params;
mod selection;

pub use energy::{Energy, Score};
pub use history::SelectionHistory;
pub use params::{speed_of, ClientProfile, SystemParams};
pub use selection::SelectionSet;
