//! Deterministic per-path random streams: one master seed, each path seeded
//! by a splittable hash of (seed, domain, path_id). Paths may run in any
//! order or concurrency without cross-path correlation.

use rand_xoshiro::rand_core::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;

/// The generator backing every stochastic path.
pub type PathRng = Xoshiro256StarStar;

/// SplitMix64 step, the standard seeding mixer.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives the 64-bit stream seed for `(master, domain, path_id)`.
/// `domain` separates independent ensembles (e.g. sweep points) that share
/// one master seed.
pub fn stream_seed(master: u64, domain: u64, path_id: u64) -> u64 {
    let mut state = master;
    let a = splitmix64(&mut state);
    let mut state = a ^ domain.wrapping_mul(0xd1b54a32d192ed03);
    let b = splitmix64(&mut state);
    let mut state = b ^ path_id.wrapping_mul(0x8cb92ba72f3d8dd7);
    splitmix64(&mut state)
}

/// RNG for one path of one ensemble.
pub fn path_rng(master: u64, domain: u64, path_id: u64) -> PathRng {
    PathRng::seed_from_u64(stream_seed(master, domain, path_id))
}
