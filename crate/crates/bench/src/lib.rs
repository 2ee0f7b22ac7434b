//! Shared fixtures for the criterion benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robustbar::synthetic::{random_instance, CorpusSpec, Instance};

/// `n` arbitrage-free quote sets generated from seeded random walks; the same
/// seed always yields the same instances.
pub fn instances(n: usize, seed: u64) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = CorpusSpec::default();
    (0..n).map(|_| random_instance(&mut rng, &spec)).collect()
}

/// The first generated instance with at least `levels` quoted barrier levels.
pub fn instance_with_levels(levels: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = CorpusSpec::default();
    loop {
        let inst = random_instance(&mut rng, &spec);
        if inst.model.num_levels() >= levels {
            return inst;
        }
    }
}
