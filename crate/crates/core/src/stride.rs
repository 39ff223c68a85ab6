//! Visual stride from unified contributions, and reconstruction of the
//! real-valued position index vector.

use serde::Serialize;

use crate::config::{AnalysisConfig, StrideBounds};
use crate::contribution::{analyze, ContributionReport};
use crate::error::{Error, Result};
use crate::json::{self, serialize_f64, serialize_f64_slice};
use crate::seqio::{Modality, MultimodalSequence};

/// Text keeps the pretrained unit spacing.
pub const TEXT_STRIDE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayoutEntry {
    pub modality: Modality,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositionPlan {
    #[serde(serialize_with = "serialize_f64")]
    pub delta_text: f64,
    #[serde(serialize_with = "serialize_f64")]
    pub delta_vision: f64,
    pub layout: Vec<LayoutEntry>,
    #[serde(serialize_with = "serialize_f64_slice")]
    pub indices: Vec<f64>,
}

impl PositionPlan {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn stride(&self, modality: Modality) -> f64 {
        match modality {
            Modality::Text => self.delta_text,
            Modality::Vision => self.delta_vision,
        }
    }

    /// Modality of every token, in sequence order.
    pub fn token_modalities(&self) -> Vec<Modality> {
        self.layout.iter().flat_map(|e| std::iter::repeat(e.modality).take(e.count)).collect()
    }

    pub fn to_json(&self) -> String {
        json::to_string(self).expect("plan serialization is infallible")
    }

    /// `u64` count followed by the indices as little-endian `f64`.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 8 * self.indices.len());
        out.extend_from_slice(&(self.indices.len() as u64).to_le_bytes());
        for p in &self.indices {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn indices_from_le_bytes(bytes: &[u8]) -> Result<Vec<f64>> {
        let head: [u8; 8] = bytes
            .get(..8)
            .and_then(|h| h.try_into().ok())
            .ok_or(Error::TruncatedPayload { expected: 8, available: bytes.len() as u64 })?;
        let n = u64::from_le_bytes(head);
        let expected = n.checked_mul(8).and_then(|b| b.checked_add(8)).unwrap_or(u64::MAX);
        if expected != bytes.len() as u64 {
            return Err(Error::TruncatedPayload { expected, available: bytes.len() as u64 });
        }
        Ok(bytes[8..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

/// `C~_text / C~_vision`.
pub fn compute_stride(report: &ContributionReport) -> Result<f64> {
    let c = report.c_tilde;
    if c.vision.is_nan() || c.vision <= 0.0 {
        return Err(Error::ZeroContribution(Modality::Vision));
    }
    if c.text.is_nan() || c.text <= 0.0 {
        return Err(Error::ZeroContribution(Modality::Text));
    }
    let delta = c.text / c.vision;
    if !delta.is_finite() {
        return Err(Error::ZeroContribution(Modality::Vision));
    }
    Ok(delta)
}

pub fn clamp_stride(delta: f64, bounds: Option<StrideBounds>) -> f64 {
    match bounds {
        Some(b) => delta.clamp(b.min, b.max),
        None => delta,
    }
}

/// Builds position indices for an ordered layout.
///
/// The first token sits at 0. Each run advances by its own stride (1 for text,
/// `delta_vision` for vision), its first token one stride past the previous
/// run's last index. Indices inside a run are `start + stride * k`, so for
/// `[text n_t; vision n_v]` vision token `i` lands exactly on
/// `(n_t - 1) + delta_vision * (i - n_t + 1)`.
pub fn reconstruct_indices(layout: &[(Modality, usize)], delta_vision: f64) -> Result<PositionPlan> {
    if !(delta_vision.is_finite() && delta_vision > 0.0) {
        return Err(Error::InvalidStride(delta_vision));
    }
    let total: usize = layout.iter().map(|(_, n)| n).sum();
    if total == 0 {
        return Err(Error::EmptyLayout);
    }
    let mut indices = Vec::with_capacity(total);
    let mut last: Option<f64> = None;
    for &(modality, count) in layout {
        if count == 0 {
            continue;
        }
        let stride = match modality {
            Modality::Text => TEXT_STRIDE,
            Modality::Vision => delta_vision,
        };
        match last {
            None => indices.extend((0..count).map(|k| stride * k as f64)),
            Some(prev) => indices.extend((0..count).map(|k| prev + stride * (k + 1) as f64)),
        }
        last = indices.last().copied();
    }
    Ok(PositionPlan {
        delta_text: TEXT_STRIDE,
        delta_vision,
        layout: layout
            .iter()
            .filter(|(_, n)| *n > 0)
            .map(|&(modality, count)| LayoutEntry { modality, count })
            .collect(),
        indices,
    })
}

/// Analysis, stride, and index reconstruction in one pass.
pub fn plan(seq: &MultimodalSequence, config: &AnalysisConfig) -> Result<(ContributionReport, PositionPlan)> {
    let report = analyze(seq, config)?;
    let delta = clamp_stride(compute_stride(&report)?, config.stride_bounds);
    let plan = reconstruct_indices(&seq.layout(), delta)?;
    Ok((report, plan))
}
