use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{EmbeddingMatrix, Modality, MultimodalSequence, SequenceMeta};
use crate::error::{Error, Result};

/// Parameters of a synthetic `[text; vision]` sequence.
///
/// Text rows are i.i.d. standard normal scaled by `text_scale`. Vision rows are
/// random combinations of `vision_rank` random directions plus isotropic
/// Gaussian noise of standard deviation `noise`, which emulates redundant
/// image patches when the rank is small.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorSpec {
    pub n_t: usize,
    pub n_v: usize,
    pub d: usize,
    pub text_scale: f64,
    pub vision_rank: usize,
    pub noise: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    /// Full-rank vision, unit text scale, no noise, seed 0.
    pub fn new(n_t: usize, n_v: usize, d: usize) -> Self {
        Self { n_t, n_v, d, text_scale: 1.0, vision_rank: d, noise: 0.0, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidGeneratorSpec(msg));
        if self.n_t == 0 || self.n_v == 0 {
            return bad(format!("token counts must be >= 1 (n_t={}, n_v={})", self.n_t, self.n_v));
        }
        if self.d < 2 {
            return bad(format!("d must be >= 2, got {}", self.d));
        }
        if self.vision_rank == 0 || self.vision_rank > self.d {
            return bad(format!("vision_rank must lie in [1, {}], got {}", self.d, self.vision_rank));
        }
        if !(self.text_scale.is_finite() && self.text_scale > 0.0) {
            return bad(format!("text_scale must be positive, got {}", self.text_scale));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return bad(format!("noise must be non-negative, got {}", self.noise));
        }
        Ok(())
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n_t={},n_v={},d={},text_scale={},vision_rank={},noise={},seed={}",
            self.n_t, self.n_v, self.d, self.text_scale, self.vision_rank, self.noise, self.seed
        )
    }
}

/// Parses `key=value` pairs separated by commas, e.g.
/// `n_t=4,n_v=8,d=6,vision_rank=1,seed=7`. `n_t`, `n_v` and `d` are required.
impl FromStr for GeneratorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidGeneratorSpec(msg);
        let (mut n_t, mut n_v, mut d) = (None, None, None);
        let (mut text_scale, mut vision_rank, mut noise, mut seed) = (None, None, None, None);
        for pair in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = pair.split_once('=').ok_or_else(|| bad(format!("expected key=value, got {pair:?}")))?;
            let value = value.trim();
            let int = || value.parse::<usize>().map_err(|e| bad(format!("{key}: {e}")));
            let real = || value.parse::<f64>().map_err(|e| bad(format!("{key}: {e}")));
            match key.trim().replace('-', "_").as_str() {
                "n_t" => n_t = Some(int()?),
                "n_v" => n_v = Some(int()?),
                "d" => d = Some(int()?),
                "text_scale" => text_scale = Some(real()?),
                "vision_rank" => vision_rank = Some(int()?),
                "noise" => noise = Some(real()?),
                "seed" => seed = Some(value.parse::<u64>().map_err(|e| bad(format!("seed: {e}")))?),
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        let (Some(n_t), Some(n_v), Some(d)) = (n_t, n_v, d) else {
            return Err(bad("n_t, n_v and d are required".into()));
        };
        let mut spec = GeneratorSpec::new(n_t, n_v, d);
        spec.text_scale = text_scale.unwrap_or(spec.text_scale);
        spec.vision_rank = vision_rank.unwrap_or(spec.vision_rank);
        spec.noise = noise.unwrap_or(spec.noise);
        spec.seed = seed.unwrap_or(spec.seed);
        Ok(spec)
    }
}

pub fn generate_synthetic(spec: &GeneratorSpec) -> Result<MultimodalSequence> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut normal = move || -> f64 { rng.sample(StandardNormal) };

    let d = spec.d;
    let text: Vec<f64> = (0..spec.n_t * d).map(|_| spec.text_scale * normal()).collect();

    let basis: Vec<f64> = (0..spec.vision_rank * d).map(|_| normal()).collect();
    let mut vision = vec![0.0; spec.n_v * d];
    for row in vision.chunks_exact_mut(d) {
        for dir in basis.chunks_exact(d) {
            let coef = normal();
            for (x, b) in row.iter_mut().zip(dir) {
                *x += coef * b;
            }
        }
    }
    if spec.noise > 0.0 {
        for x in &mut vision {
            *x += spec.noise * normal();
        }
    }

    let seq = MultimodalSequence::new(vec![
        (Modality::Text, EmbeddingMatrix::new(spec.n_t, d, text)?),
        (Modality::Vision, EmbeddingMatrix::new(spec.n_v, d, vision)?),
    ])?;
    Ok(seq.with_meta(SequenceMeta {
        source_id: format!("synthetic:{spec}"),
        generator: Some(spec.to_string()),
        seed: Some(spec.seed),
    }))
}
