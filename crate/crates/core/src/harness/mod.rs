//! Single-layer rotary attention simulator.
//!
//! Tokens get synthetic query/key content, are rotated at their plan positions,
//! and attend through a row softmax. The per-modality attention mass shows how
//! the visual stride moves the fixed per-query budget between modalities.

mod oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::json::{serialize_f64, Fixed};
use crate::rope::{dot, rotate_in_place, RotaryConfig};
use crate::seqio::{Modality, PerModality};
use crate::stride::PositionPlan;

pub use oracle::{oracle_pipeline, ORACLE_MAX_DIM, ORACLE_MAX_TOKENS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentMode {
    /// One random unit vector shared by every query and key.
    #[default]
    Tied,
    /// Independent random unit query and key per token.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnessSpec {
    pub n_t: usize,
    pub n_v: usize,
    pub head_dim: usize,
    pub content_mode: ContentMode,
    pub causal: bool,
    pub seeds: Vec<u64>,
}

impl HarnessSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_t == 0 || self.n_v == 0 {
            return Err(Error::InvalidConfig(format!(
                "harness needs n_t, n_v >= 1, got {} and {}",
                self.n_t, self.n_v
            )));
        }
        if self.head_dim == 0 || self.head_dim % 2 != 0 {
            return Err(Error::InvalidConfig(format!("head_dim must be even, got {}", self.head_dim)));
        }
        Ok(())
    }

    /// Vision precedes text under a causal mask so text queries can see it.
    pub fn layout(&self) -> Vec<(Modality, usize)> {
        if self.causal {
            vec![(Modality::Vision, self.n_v), (Modality::Text, self.n_t)]
        } else {
            vec![(Modality::Text, self.n_t), (Modality::Vision, self.n_v)]
        }
    }

    pub fn total_tokens(&self) -> usize {
        self.n_t + self.n_v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionDiagnostics {
    pub n: usize,
    /// Row-major `n x n` attention weights.
    pub rows: Vec<f64>,
    pub modalities: Vec<Modality>,
    /// Attention mass each query puts on each modality.
    pub per_query: Vec<PerModality<f64>>,
    /// `per_query` summed over all queries.
    pub total: PerModality<f64>,
    pub scale: f64,
}

impl AttentionDiagnostics {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.n..(i + 1) * self.n]
    }

    pub fn last_text_query(&self) -> Option<usize> {
        self.modalities.iter().rposition(|&m| m == Modality::Text)
    }

    /// Per-modality mass of the last text token's attention row.
    pub fn last_text_mass(&self) -> PerModality<f64> {
        self.last_text_query().map(|i| self.per_query[i]).unwrap_or_default()
    }
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// One simulated attention layer for one content seed.
pub fn run_harness(
    spec: &HarnessSpec,
    plan: &PositionPlan,
    cfg: &RotaryConfig,
    seed: u64,
) -> Result<AttentionDiagnostics> {
    spec.validate()?;
    let n = spec.total_tokens();
    if plan.len() != n {
        return Err(Error::LengthMismatch { expected: n, found: plan.len() });
    }
    if cfg.head_dim() != spec.head_dim {
        return Err(Error::DimensionMismatch { expected: spec.head_dim, found: cfg.head_dim() });
    }
    let modalities = plan.token_modalities();
    let n_text = modalities.iter().filter(|&&m| m == Modality::Text).count();
    if n_text != spec.n_t {
        return Err(Error::LengthMismatch { expected: spec.n_t, found: n_text });
    }

    let dim = spec.head_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut queries, mut keys) = match spec.content_mode {
        ContentMode::Tied => {
            let u = unit_vector(&mut rng, dim);
            (u.repeat(n), u.repeat(n))
        }
        ContentMode::Random => {
            let mut q = Vec::with_capacity(n * dim);
            let mut k = Vec::with_capacity(n * dim);
            for _ in 0..n {
                q.extend(unit_vector(&mut rng, dim));
                k.extend(unit_vector(&mut rng, dim));
            }
            (q, k)
        }
    };
    for (i, &p) in plan.indices.iter().enumerate() {
        rotate_in_place(&mut queries[i * dim..(i + 1) * dim], p, cfg)?;
        rotate_in_place(&mut keys[i * dim..(i + 1) * dim], p, cfg)?;
    }

    let scale = 1.0 / (dim as f64).sqrt();
    let mut rows = vec![0.0; n * n];
    let mut per_query = Vec::with_capacity(n);
    let mut total = PerModality::new(0.0, 0.0);
    for (i, row) in rows.chunks_exact_mut(n).enumerate() {
        let q = &queries[i * dim..(i + 1) * dim];
        let visible = if spec.causal { i + 1 } else { n };
        let mut max = f64::NEG_INFINITY;
        for (j, w) in row[..visible].iter_mut().enumerate() {
            *w = scale * dot(q, &keys[j * dim..(j + 1) * dim]);
            max = max.max(*w);
        }
        let mut sum = 0.0;
        for w in &mut row[..visible] {
            *w = (*w - max).exp();
            sum += *w;
        }
        let mut mass = PerModality::new(0.0, 0.0);
        for (w, &m) in row[..visible].iter_mut().zip(&modalities) {
            *w /= sum;
            *mass.get_mut(m) += *w;
        }
        total.text += mass.text;
        total.vision += mass.vision;
        per_query.push(mass);
    }

    Ok(AttentionDiagnostics { n, rows, modalities, per_query, total, scale })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub last_text_query: PerModality<Fixed>,
    pub total: PerModality<Fixed>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanAggregates {
    /// Mean over seeds of the last text query's per-modality mass.
    pub last_text_query: PerModality<Fixed>,
    /// Mean over seeds of the attention mass summed over all queries.
    pub total: PerModality<Fixed>,
    /// `A_text / A_vision` for the last text query, from the means.
    #[serde(serialize_with = "serialize_f64")]
    pub text_to_vision_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnessReport {
    pub spec: HarnessSpec,
    #[serde(serialize_with = "serialize_f64")]
    pub delta_vision: f64,
    pub per_seed: Vec<SeedRecord>,
    pub mean_aggregates: MeanAggregates,
}

impl HarnessReport {
    pub fn mean_last_text_mass(&self) -> PerModality<f64> {
        self.mean_aggregates.last_text_query.map(|x| x.0)
    }
}

/// Runs every seed of `spec` (in parallel) and averages in seed order.
pub fn run_seeds(spec: &HarnessSpec, plan: &PositionPlan, cfg: &RotaryConfig) -> Result<HarnessReport> {
    if spec.seeds.is_empty() {
        return Err(Error::InvalidConfig("harness needs at least one seed".into()));
    }
    let runs: Vec<(u64, PerModality<f64>, PerModality<f64>)> = spec
        .seeds
        .par_iter()
        .map(|&seed| {
            let d = run_harness(spec, plan, cfg, seed)?;
            Ok((seed, d.last_text_mass(), d.total))
        })
        .collect::<Result<_>>()?;

    let k = runs.len() as f64;
    let mut last = PerModality::new(0.0, 0.0);
    let mut total = PerModality::new(0.0, 0.0);
    for (_, l, t) in &runs {
        last.text += l.text;
        last.vision += l.vision;
        total.text += t.text;
        total.vision += t.vision;
    }
    let last = last.map(|x| x / k);
    let total = total.map(|x| x / k);

    Ok(HarnessReport {
        spec: spec.clone(),
        delta_vision: plan.delta_vision,
        per_seed: runs
            .into_iter()
            .map(|(seed, l, t)| SeedRecord { seed, last_text_query: l.map(Fixed), total: t.map(Fixed) })
            .collect(),
        mean_aggregates: MeanAggregates {
            last_text_query: last.map(Fixed),
            total: total.map(Fixed),
            text_to_vision_ratio: last.text / last.vision,
        },
    })
}
