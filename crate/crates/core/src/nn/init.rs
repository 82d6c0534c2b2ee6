//! Glorot (Xavier) uniform initialization.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Scalar;

/// i.i.d. uniform on [-L, L] with L = sqrt(6 / (fan_in + fan_out)).
/// Values are drawn in f64 and cast, so the stream only depends on the seed.
pub fn glorot_uniform_init<S: Scalar>(fan_in: usize, fan_out: usize, count: usize, seed: u64) -> Vec<S> {
    assert!(fan_in > 0 && fan_out > 0, "fans must be positive");
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| S::from_f64(rng.gen_range(-limit..=limit))).collect()
}

/// Draw from an existing stream; used when several tensors share one
/// seeded generator.
pub(crate) fn glorot_uniform_from<S: Scalar>(
    fan_in: usize,
    fan_out: usize,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<S> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..count).map(|_| S::from_f64(rng.gen_range(-limit..=limit))).collect()
}
