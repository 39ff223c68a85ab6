//! Multimodal sequence model, the MEMB embedding container, and synthetic
//! fixtures.

mod container;
mod synth;

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use container::{decode_sequence, encode_sequence, load_sequence, save_sequence, MAGIC, VERSION};
pub use synth::{generate_synthetic, GeneratorSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Vision,
}

impl Modality {
    pub const ALL: [Modality; 2] = [Modality::Text, Modality::Vision];

    pub fn tag(self) -> u8 {
        match self {
            Modality::Text => 0,
            Modality::Vision => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Modality::Text),
            1 => Some(Modality::Vision),
            _ => None,
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Text => "text",
            Modality::Vision => "vision",
        })
    }
}

/// One value per modality. Serializes as `{"text": .., "vision": ..}`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerModality<T> {
    pub text: T,
    pub vision: T,
}

impl<T> PerModality<T> {
    pub fn new(text: T, vision: T) -> Self {
        Self { text, vision }
    }

    pub fn get(&self, m: Modality) -> &T {
        match m {
            Modality::Text => &self.text,
            Modality::Vision => &self.vision,
        }
    }

    pub fn get_mut(&mut self, m: Modality) -> &mut T {
        match m {
            Modality::Text => &mut self.text,
            Modality::Vision => &mut self.vision,
        }
    }

    pub fn map<U>(self, mut f: impl FnMut(T) -> U) -> PerModality<U> {
        PerModality { text: f(self.text), vision: f(self.vision) }
    }
}

impl PerModality<f64> {
    pub fn sum(&self) -> f64 {
        self.text + self.vision
    }
}

/// Row-major `rows x cols` matrix of finite embedding coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidSequence(format!("embedding matrix must be at least 1x1, got {rows}x{cols}")));
        }
        if values.len() != rows * cols {
            return Err(Error::LengthMismatch { expected: rows * cols, found: values.len() });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { row: pos / cols, col: pos % cols });
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, found: r.len() });
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, values)
    }

    /// Stacks matrices vertically, preserving order.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a EmbeddingMatrix>) -> Result<Self> {
        let mut it = parts.into_iter().peekable();
        let cols = it.peek().map(|m| m.cols).ok_or(Error::EmptyLayout)?;
        let mut rows = 0;
        let mut values = Vec::new();
        for m in it {
            if m.cols != cols {
                return Err(Error::DimensionMismatch { expected: cols, found: m.cols });
            }
            rows += m.rows;
            values.extend_from_slice(&m.values);
        }
        Ok(Self { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.cols)
    }

    /// The matrix transposed into nalgebra's column-major layout: a `cols x rows`
    /// matrix whose columns are the embeddings.
    pub fn to_columns(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.cols, self.rows, &self.values)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceMeta {
    pub source_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Ordered modality segments sharing one embedding dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct MultimodalSequence {
    segments: Vec<(Modality, EmbeddingMatrix)>,
    dim: usize,
    pub meta: SequenceMeta,
}

impl MultimodalSequence {
    pub fn new(segments: Vec<(Modality, EmbeddingMatrix)>) -> Result<Self> {
        let Some((_, first)) = segments.first() else {
            return Err(Error::InvalidSequence("no segments".into()));
        };
        let dim = first.cols();
        for (_, m) in &segments {
            if m.cols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: m.cols() });
            }
        }
        for needed in Modality::ALL {
            if !segments.iter().any(|(m, _)| *m == needed) {
                return Err(Error::InvalidSequence(format!("no {needed} segment")));
            }
        }
        Ok(Self { segments, dim, meta: SequenceMeta::default() })
    }

    /// The canonical `[text; vision]` two-block sequence.
    pub fn two_block(text: EmbeddingMatrix, vision: EmbeddingMatrix) -> Result<Self> {
        Self::new(vec![(Modality::Text, text), (Modality::Vision, vision)])
    }

    pub fn with_meta(mut self, meta: SequenceMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn segments(&self) -> &[(Modality, EmbeddingMatrix)] {
        &self.segments
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn total_tokens(&self) -> usize {
        self.segments.iter().map(|(_, m)| m.rows()).sum()
    }

    pub fn token_count(&self, modality: Modality) -> usize {
        self.segments.iter().filter(|(m, _)| *m == modality).map(|(_, e)| e.rows()).sum()
    }

    pub fn layout(&self) -> Vec<(Modality, usize)> {
        self.segments.iter().map(|(m, e)| (*m, e.rows())).collect()
    }

    /// All segments of one modality stacked in sequence order.
    pub fn pooled(&self, modality: Modality) -> EmbeddingMatrix {
        EmbeddingMatrix::concat(self.segments.iter().filter(|(m, _)| *m == modality).map(|(_, e)| e))
            .expect("constructor guarantees a segment of every modality with shared dim")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nan() {
        let err = EmbeddingMatrix::new(1, 2, vec![0.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteValue { row: 0, col: 1 }));
    }

    #[test]
    fn needs_both_modalities() {
        let m = EmbeddingMatrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let err = MultimodalSequence::new(vec![(Modality::Text, m)]).unwrap_err();
        assert!(matches!(err, Error::InvalidSequence(_)));
        assert!(matches!(MultimodalSequence::new(vec![]), Err(Error::InvalidSequence(_))));
    }

    #[test]
    fn pooling_preserves_order() {
        let a = EmbeddingMatrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let b = EmbeddingMatrix::from_rows(&[[0.0, 1.0], [2.0, 2.0]]).unwrap();
        let v = EmbeddingMatrix::from_rows(&[[5.0, 5.0]]).unwrap();
        let seq =
            MultimodalSequence::new(vec![(Modality::Text, a), (Modality::Vision, v), (Modality::Text, b)]).unwrap();
        let t = seq.pooled(Modality::Text);
        assert_eq!(t.rows(), 3);
        assert_eq!(t.values(), &[1.0, 0.0, 0.0, 1.0, 2.0, 2.0]);
        assert_eq!(seq.total_tokens(), 4);
        assert_eq!(seq.token_count(Modality::Text), 3);
    }

    #[test]
    fn column_view_is_transpose() {
        let m = EmbeddingMatrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let c = m.to_columns();
        assert_eq!(c.shape(), (3, 2));
        assert_eq!(c[(2, 1)], 6.0);
    }
}
