//! Seed derivation and deterministic parallel replication.
//!
//! Every replication owns a private generator seeded from
//! `derive_seed(master, index)`. Results are collected by index, so the
//! output never depends on how rayon schedules the work.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Generator used for every simulated trajectory.
pub type SimRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed with a stream index into an independent 64-bit seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_mul(GOLDEN_GAMMA) ^ 0x6a09_e667_f3bc_c909))
}

/// Builds the generator for a given seed.
pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Runs `job(index, seed)` for every replication index and returns the
/// results in index order. The per-index seed is `derive_seed(master, index)`.
pub fn replicate<T, F>(replications: usize, master_seed: u64, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, u64) -> T + Sync,
{
    (0..replications)
        .into_par_iter()
        .map(|i| job(i, derive_seed(master_seed, i as u64)))
        .collect()
}

/// Runs `f` inside a dedicated rayon pool with `threads` workers.
/// `threads == 0` uses the global pool.
pub fn with_threads<R, F>(threads: usize, f: F) -> Result<R, rayon::ThreadPoolBuildError>
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    Ok(pool.install(f))
}
