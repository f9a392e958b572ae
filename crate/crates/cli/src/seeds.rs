//! Stable seed derivation.
//!
//! Seeds are folded with the SplitMix64 finalizer, which is fixed forever, so
//! any cell of any sweep can be re-run alone and reproduce its rows exactly.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `parts` into one 64-bit seed.
pub fn hash_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(GOLDEN, |acc, &p| mix(acc.wrapping_add(GOLDEN) ^ mix(p)))
}

/// MAC/event randomness of one realization: `hash(base, cell, seed index)`.
pub fn realization_seed(base: u64, cell: usize, seed_index: usize) -> u64 {
    hash_seed(&[base, cell as u64, seed_index as u64])
}

/// Node placement of one realization. Keyed by gNB count rather than cell so
/// every cell with the same gNB count sees the same geometries.
pub fn scenario_seed(base: u64, n_gnb: usize, seed_index: usize) -> u64 {
    hash_seed(&[base, 0x5ce7_a410, n_gnb as u64, seed_index as u64])
}
