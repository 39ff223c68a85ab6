//! Fixtures shared by the criterion benchmarks.

use modix_core::{generate_synthetic, GeneratorSpec, MultimodalSequence};

/// Low-rank noisy vision, unit-scale text.
pub fn fixture(n_t: usize, n_v: usize, d: usize) -> MultimodalSequence {
    let spec = GeneratorSpec { vision_rank: (d / 8).max(1), noise: 0.05, seed: 42, ..GeneratorSpec::new(n_t, n_v, d) };
    generate_synthetic(&spec).expect("benchmark fixture spec is valid")
}
