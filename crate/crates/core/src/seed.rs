//! Deterministic per-replica seed derivation.
//!
//! Replica `i` of a run with master seed `m` is driven by a generator seeded
//! with `derive_seed(m, i)`: the SplitMix64 finalizer applied to
//! `m + (i + 1) * 0x9E3779B97F4A7C15`. The finalizer is a bijection on `u64`,
//! so distinct replica indices never collide for a fixed master seed.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replica `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}
