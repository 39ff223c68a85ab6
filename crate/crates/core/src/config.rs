use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How raw entropy proxies are turned into intra-modal shares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NormalizationMode {
    /// `H_m / sum(H)`. Only meaningful when every entropy is positive.
    #[serde(rename = "raw")]
    RawRatio,
    /// Min-max shift with a 0.1 floor, then `x / sum(x)`. Order preserving for
    /// negative entropies too.
    #[default]
    #[serde(rename = "shift")]
    ShiftMinMax,
}

impl NormalizationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NormalizationMode::RawRatio => "raw",
            NormalizationMode::ShiftMinMax => "shift",
        }
    }
}

impl std::str::FromStr for NormalizationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(NormalizationMode::RawRatio),
            "shift" => Ok(NormalizationMode::ShiftMinMax),
            other => Err(Error::InvalidConfig(format!("normalization must be raw or shift, got {other:?}"))),
        }
    }
}

/// Optional clamp applied to the visual stride. Off by default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrideBounds {
    pub min: f64,
    pub max: f64,
}

impl Default for StrideBounds {
    fn default() -> Self {
        Self { min: 0.1, max: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Weight of the intra-modal term in the geometric-mean fusion.
    pub alpha: f64,
    /// Ridge added to each covariance before the log-determinant.
    pub epsilon: f64,
    pub normalization_mode: NormalizationMode,
    /// Lower clamp for directional alignment scores.
    pub clamp_floor: f64,
    /// Above this embedding dimension, modalities with fewer tokens than `d`
    /// take the token-Gram eigenvalue path.
    pub gram_threshold: usize,
    pub stride_bounds: Option<StrideBounds>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            epsilon: 1e-6,
            normalization_mode: NormalizationMode::ShiftMinMax,
            clamp_floor: 1e-6,
            gram_threshold: 512,
            stride_bounds: None,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::AlphaOutOfRange(self.alpha));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.clamp_floor.is_finite() && self.clamp_floor > 0.0) {
            return Err(Error::InvalidConfig(format!("clamp floor must be positive, got {}", self.clamp_floor)));
        }
        if let Some(b) = self.stride_bounds {
            if !(b.min > 0.0 && b.min <= b.max && b.max.is_finite()) {
                return Err(Error::InvalidConfig(format!("bad stride bounds [{}, {}]", b.min, b.max)));
            }
        }
        Ok(())
    }
}
