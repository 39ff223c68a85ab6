#![allow(dead_code)]

use modix_core::{generate_synthetic, EmbeddingMatrix, GeneratorSpec, Modality, MultimodalSequence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random small sequence with mixed scales, ranks and noise levels.
pub fn random_sequence(rng: &mut ChaCha8Rng, max_t: usize, max_v: usize, max_d: usize) -> MultimodalSequence {
    let d = rng.random_range(2..=max_d);
    let spec = GeneratorSpec {
        n_t: rng.random_range(1..=max_t),
        n_v: rng.random_range(1..=max_v),
        d,
        text_scale: [0.1, 0.5, 1.0, 2.0, 5.0][rng.random_range(0..5)],
        vision_rank: rng.random_range(1..=d),
        noise: [0.0, 1e-3, 0.05, 0.5][rng.random_range(0..4)],
        seed: rng.random(),
    };
    generate_synthetic(&spec).unwrap()
}

/// Degenerate cases: single tokens, repeated rows, zero rows.
pub fn degenerate_sequence(rng: &mut ChaCha8Rng, kind: usize) -> MultimodalSequence {
    let d = rng.random_range(2..=12);
    let row = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..d).map(|_| rng.random_range(-2.0..2.0)).collect() };
    let block = |rows: Vec<Vec<f64>>| EmbeddingMatrix::from_rows(&rows).unwrap();
    let (text, vision) = match kind % 4 {
        0 => (block(vec![row(rng)]), block(vec![row(rng)])),
        1 => {
            let r = row(rng);
            (block(vec![r.clone(); 5]), block((0..7).map(|_| row(rng)).collect()))
        }
        2 => (block(vec![vec![0.0; d]; 3]), block((0..4).map(|_| row(rng)).chain([vec![0.0; d]]).collect())),
        _ => {
            let r = row(rng);
            (block(vec![r.clone(); 3]), block(vec![r; 9]))
        }
    };
    MultimodalSequence::new(vec![(Modality::Text, text), (Modality::Vision, vision)]).unwrap()
}
