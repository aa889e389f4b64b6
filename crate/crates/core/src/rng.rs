//! Seed discipline.
//!
//! Every random draw comes from a ChaCha8 generator keyed by the run's master
//! seed, with the ChaCha stream id set to a 64-bit FNV-1a hash of
//! `(purpose, label, index)`. Two draws that differ in any component come from
//! independent streams, so adding a policy or a purpose never shifts another
//! consumer's numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Purpose tags used by the simulator.
pub mod purpose {
    pub const SCENARIO: &str = "scenario";
    pub const MEAN_SPEED: &str = "mean-speed";
    pub const LATENCY: &str = "latency";
    pub const AVAILABILITY: &str = "availability";
    pub const POLICY: &str = "policy";
    pub const DATA: &str = "data";
    pub const INSTANCE: &str = "instance";
    pub const ANNEAL: &str = "anneal";
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(hash: u64, bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(hash, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Stream id for `(purpose, label, index)`.
pub fn stream_id(purpose: &str, label: &str, index: u64) -> u64 {
    let mut h = fnv1a(FNV_OFFSET, purpose.as_bytes());
    h = fnv1a(h, &[0xff]);
    h = fnv1a(h, label.as_bytes());
    h = fnv1a(h, &[0xff]);
    fnv1a(h, &index.to_le_bytes())
}

pub fn derive(master_seed: u64, purpose: &str, label: &str, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id(purpose, label, index));
    rng
}
