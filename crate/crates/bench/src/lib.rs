//! Shared inputs for the pipeline benchmarks.

use kernelsmith::preprocess::{prepare, EncodedDataset};
use kernelsmith::{fixtures, rng, Dataset};
use rand::Rng;

/// Named fixtures used across benchmarks, smallest first.
pub fn datasets() -> Vec<(&'static str, Dataset)> {
    vec![("iris", fixtures::iris()), ("wine", fixtures::wine()), ("wdbc", fixtures::wdbc())]
}

pub fn encoded(d: &Dataset) -> EncodedDataset {
    prepare(d, true).expect("fixture encodes").0
}

/// `n` random labels in `0..k`.
pub fn labels(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut r = rng::stream(seed, 0);
    (0..n).map(|_| r.random_range(0..k)).collect()
}
