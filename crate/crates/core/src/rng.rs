//! Counter-based seed derivation.
//!
//! Every random entity (replica, tree, branch clock, noise cell block) gets its
//! own generator seeded from `(master, domain, index)`, so results never depend
//! on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Seed domains. Distinct constants keep streams for different purposes apart.
pub mod domain {
    pub const REPLICA: u64 = 0x5245_504c;
    pub const TREE: u64 = 0x5452_4545;
    pub const URN: u64 = 0x5552_4e00;
    pub const TYPES: u64 = 0x5459_5045;
    pub const GAUSS: u64 = 0x4741_5553;
    pub const PAST: u64 = 0x5041_5354;
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `seed(master, domain, index)`: three chained splitmix64 rounds.
pub fn derive_seed(master: u64, domain: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ domain) ^ index)
}

pub fn stream(master: u64, domain: u64, index: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(master, domain, index))
}

/// Run `f(replica, seed)` for every replica in parallel. Each replica's seed
/// depends only on `(master, replica)`, and results come back in order.
pub fn par_replicas<T, F>(master: u64, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, u64) -> T + Sync,
{
    use rayon::prelude::*;
    (0..count)
        .into_par_iter()
        .map(|r| f(r, derive_seed(master, domain::REPLICA, r as u64)))
        .collect()
}
