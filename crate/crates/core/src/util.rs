//! Small shared helpers.

/// Derive an independent sub-seed from a master seed and a stream tag.
///
/// SplitMix64 finalizer over `seed + tag`; used so that the split, SMOTE,
/// environment, and training RNG streams differ even when the user supplies
/// a single master seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
