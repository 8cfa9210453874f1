//! Fixed workloads shared by the criterion benches.

use clickstream_core::synthetic::{generate_dataset, Preset};
use clickstream_core::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Balanced `separable-mid` sample.
pub fn sessions(per_class: usize, seed: u64) -> Dataset {
    generate_dataset(&Preset::SeparableMid.spec(per_class, per_class, seed)).expect("preset is valid")
}

/// Tie-heavy integer series like ordinal-coded sessions.
pub fn series(len: usize, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen_range(1..=6)).collect()
}
