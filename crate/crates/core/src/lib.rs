//! Information-driven positional index rescaling for multimodal token
//! sequences.
//!
//! The pipeline reads text and vision embeddings, scores how much information
//! each modality carries (covariance entropy within a modality, cosine
//! alignment across modalities), turns the ratio of fused scores into a visual
//! position stride, and rebuilds the rotary position indices with text kept at
//! unit spacing.
//!
//! ```
//! use modix_core::{plan, AnalysisConfig, GeneratorSpec, generate_synthetic};
//!
//! let seq = generate_synthetic(&GeneratorSpec { vision_rank: 1, ..GeneratorSpec::new(8, 32, 16) })?;
//! let (report, positions) = plan(&seq, &AnalysisConfig::default())?;
//! assert!((report.c_tilde.sum() - 1.0).abs() < 1e-12);
//! assert_eq!(positions.indices.len(), 40);
//! # Ok::<(), modix_core::Error>(())
//! ```

pub mod config;
pub mod contribution;
pub mod error;
pub mod harness;
pub mod json;
pub mod rope;
pub mod seqio;
pub mod stride;

pub use config::{AnalysisConfig, NormalizationMode, StrideBounds};
pub use contribution::{analyze, ContributionReport};
pub use error::{Error, ErrorClass, Result};
pub use harness::{oracle_pipeline, run_harness, run_seeds, AttentionDiagnostics, ContentMode, HarnessSpec};
pub use rope::{attention_score, rotate, PairLayout, RotaryConfig};
pub use seqio::{
    generate_synthetic, load_sequence, save_sequence, EmbeddingMatrix, GeneratorSpec, Modality, MultimodalSequence,
    PerModality,
};
pub use stride::{compute_stride, plan, reconstruct_indices, PositionPlan};
