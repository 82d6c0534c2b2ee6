//! Stable per-sample seed derivation. std's DefaultHasher is not guaranteed
//! stable across releases, so seeds are derived with FNV-1a + a splitmix64
//! finalizer instead.

pub(crate) fn fnv1a(bytes: &[u8], mut state: u64) -> u64 {
    for &b in bytes {
        state ^= b as u64;
        state = state.wrapping_mul(0x100_0000_01b3);
    }
    state
}

pub(crate) fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed for one (sample, purpose) pair, independent of processing order.
pub(crate) fn derive_seed(base: u64, recording_id: &str, cycle_index: usize, salt: u64) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ base.rotate_left(17);
    h = fnv1a(recording_id.as_bytes(), h);
    h = fnv1a(&cycle_index.to_le_bytes(), h);
    h = fnv1a(&salt.to_le_bytes(), h);
    splitmix(h)
}
