//! Rotary position encoding over real-valued positions.

use serde::Serialize;

use crate::error::{Error, Result};

/// Which coordinates form a rotated pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairLayout {
    /// `(x[2k], x[2k+1])`.
    #[default]
    Interleaved,
    /// `(x[k], x[k + d/2])`.
    HalfSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RotaryConfig {
    head_dim: usize,
    base: f64,
    frequencies: Vec<f64>,
    layout: PairLayout,
}

impl RotaryConfig {
    /// Geometric schedule `theta_k = base^(-2k / head_dim)`, `k = 0..head_dim/2`.
    pub fn new(head_dim: usize, base: f64) -> Result<Self> {
        check_head_dim(head_dim)?;
        if !(base.is_finite() && base > 1.0) {
            return Err(Error::InvalidConfig(format!("rotary base must exceed 1, got {base}")));
        }
        let d = head_dim as f64;
        let frequencies = (0..head_dim / 2).map(|k| 1.0 / base.powf(2.0 * k as f64 / d)).collect();
        Ok(Self { head_dim, base, frequencies, layout: PairLayout::Interleaved })
    }

    /// Explicit per-pair frequencies. Zero frequencies are allowed, which turns
    /// the corresponding rotation into the identity.
    pub fn with_frequencies(head_dim: usize, frequencies: Vec<f64>) -> Result<Self> {
        check_head_dim(head_dim)?;
        if frequencies.len() != head_dim / 2 {
            return Err(Error::LengthMismatch { expected: head_dim / 2, found: frequencies.len() });
        }
        if frequencies.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
            return Err(Error::InvalidConfig("frequencies must be finite and non-negative".into()));
        }
        Ok(Self { head_dim, base: f64::INFINITY, frequencies, layout: PairLayout::Interleaved })
    }

    /// All rotations collapse to the identity (the `base -> inf` limit).
    pub fn frozen(head_dim: usize) -> Result<Self> {
        Self::with_frequencies(head_dim, vec![0.0; head_dim / 2])
    }

    pub fn with_layout(mut self, layout: PairLayout) -> Self {
        self.layout = layout;
        self
    }

    pub fn head_dim(&self) -> usize {
        self.head_dim
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn layout(&self) -> PairLayout {
        self.layout
    }

    fn pair(&self, k: usize) -> (usize, usize) {
        match self.layout {
            PairLayout::Interleaved => (2 * k, 2 * k + 1),
            PairLayout::HalfSplit => (k, k + self.head_dim / 2),
        }
    }
}

fn check_head_dim(head_dim: usize) -> Result<()> {
    if head_dim == 0 || head_dim % 2 != 0 {
        return Err(Error::InvalidConfig(format!("head_dim must be even and positive, got {head_dim}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotatedVector {
    pub values: Vec<f64>,
    pub position: f64,
}

/// Rotates every pair `k` of `v` by `theta_k * position`.
pub fn rotate_in_place(v: &mut [f64], position: f64, cfg: &RotaryConfig) -> Result<()> {
    if v.len() != cfg.head_dim {
        return Err(Error::DimensionMismatch { expected: cfg.head_dim, found: v.len() });
    }
    for (k, &theta) in cfg.frequencies.iter().enumerate() {
        let (sin, cos) = (theta * position).sin_cos();
        let (a, b) = cfg.pair(k);
        let (x, y) = (v[a], v[b]);
        v[a] = x * cos - y * sin;
        v[b] = x * sin + y * cos;
    }
    Ok(())
}

pub fn rotate(v: &[f64], position: f64, cfg: &RotaryConfig) -> Result<RotatedVector> {
    let mut values = v.to_vec();
    rotate_in_place(&mut values, position, cfg)?;
    Ok(RotatedVector { values, position })
}

/// `<R(p_q) q, R(p_k) k>`.
pub fn attention_score(q: &[f64], k: &[f64], p_q: f64, p_k: f64, cfg: &RotaryConfig) -> Result<f64> {
    if q.len() != k.len() {
        return Err(Error::DimensionMismatch { expected: q.len(), found: k.len() });
    }
    let q = rotate(q, p_q, cfg)?;
    let k = rotate(k, p_k, cfg)?;
    Ok(dot(&q.values, &k.values))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn frequency_schedule() {
        let cfg = RotaryConfig::new(4, 10_000.0).unwrap();
        assert_eq!(cfg.frequencies(), &[1.0, 0.01]);
        let cfg = RotaryConfig::new(64, 10_000.0).unwrap();
        assert!(cfg.frequencies().windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
    }

    #[test]
    fn bad_configs() {
        assert!(RotaryConfig::new(3, 10_000.0).is_err());
        assert!(RotaryConfig::new(0, 10_000.0).is_err());
        assert!(RotaryConfig::new(4, 0.5).is_err());
        assert!(RotaryConfig::with_frequencies(4, vec![1.0]).is_err());
    }

    #[test]
    fn zero_position_is_identity() {
        let cfg = RotaryConfig::new(8, 10_000.0).unwrap();
        let v = [0.3, -1.0, 2.0, 0.5, 0.0, 7.0, -3.0, 1.5];
        assert_eq!(rotate(&v, 0.0, &cfg).unwrap().values, v);
    }

    #[test]
    fn quarter_and_full_turn() {
        let cfg = RotaryConfig::new(2, 10_000.0).unwrap();
        let r = rotate(&[1.0, 0.0], PI / 2.0, &cfg).unwrap().values;
        assert!(r[0].abs() < 1e-12 && (r[1] - 1.0).abs() < 1e-12);
        let r = rotate(&[1.0, 0.0], 2.0 * PI, &cfg).unwrap().values;
        assert!((r[0] - 1.0).abs() < 1e-9 && r[1].abs() < 1e-9);
    }

    #[test]
    fn half_split_pairs() {
        let cfg = RotaryConfig::new(4, 10_000.0).unwrap().with_layout(PairLayout::HalfSplit);
        // Pair 0 is (x0, x2) and rotates at frequency 1.
        let r = rotate(&[1.0, 0.0, 0.0, 0.0], PI / 2.0, &cfg).unwrap().values;
        assert!(r[0].abs() < 1e-12 && (r[2] - 1.0).abs() < 1e-12 && r[1] == 0.0);
    }

    #[test]
    fn score_examples() {
        let cfg = RotaryConfig::new(8, 10_000.0).unwrap();
        let q = [0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7, 0.8];
        let k = [1.0, -1.0, 0.5, 0.25, 0.0, 2.0, -0.5, 1.0];
        let same = attention_score(&q, &k, 5.5, 5.5, &cfg).unwrap();
        assert!((same - dot(&q, &k)).abs() < 1e-12);
        let a = attention_score(&q, &k, 3.0, 7.0, &cfg).unwrap();
        let b = attention_score(&q, &k, 103.0, 107.0, &cfg).unwrap();
        assert!((a - b).abs() < 1e-9);

        // Tied content: sum_k cos(theta_k * delta) * (q_2k^2 + q_2k+1^2).
        let norm = dot(&q, &q).sqrt();
        let u: Vec<f64> = q.iter().map(|x| x / norm).collect();
        let delta = 2.75;
        let expected: f64 = cfg
            .frequencies()
            .iter()
            .enumerate()
            .map(|(k, t)| (t * delta).cos() * (u[2 * k].powi(2) + u[2 * k + 1].powi(2)))
            .sum();
        let got = attention_score(&u, &u, 1.0, 1.0 + delta, &cfg).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let cfg = RotaryConfig::new(4, 10_000.0).unwrap();
        assert!(matches!(rotate(&[1.0; 3], 1.0, &cfg), Err(Error::DimensionMismatch { .. })));
        assert!(attention_score(&[1.0; 4], &[1.0; 2], 0.0, 1.0, &cfg).is_err());
    }

    #[test]
    fn frozen_config_never_rotates() {
        let cfg = RotaryConfig::frozen(4).unwrap();
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(rotate(&v, 1234.5, &cfg).unwrap().values, v);
    }
}
