//! Fixtures shared by the criterion benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xpikesim_core::spike::{BitMatrix, SpikeTensor};
use xpikesim_core::{HeadActivations, IntMatrix};

pub fn random_head(tokens: usize, head_dim: usize, steps: usize, seed: u64) -> HeadActivations {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seq = || -> Vec<BitMatrix> {
        (0..steps).map(|_| BitMatrix::from_fn(head_dim, tokens, |_, _| rng.random_bool(0.5))).collect()
    };
    let (q, k, v) = (seq(), seq(), seq());
    HeadActivations::new(q, k, v).expect("consistent shapes")
}

pub fn random_weights(rows: usize, cols: usize, seed: u64) -> IntMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    IntMatrix::from_fn(rows, cols, |_, _| rng.random_range(-15..=15))
}

pub fn random_spikes(tokens: usize, steps: usize, features: usize, seed: u64) -> SpikeTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SpikeTensor::from_fn(tokens, steps, features, |_, _, _| rng.random_bool(0.3))
}
