//! MEMB v1 container.
//!
//! Little-endian throughout:
//!
//! ```text
//! "MEMB"            4 bytes
//! version  u32      = 1
//! d        u32
//! segments u32
//! per segment:  modality u8 (0 text, 1 vision), 3 zero bytes, n_tokens u64
//! payloads: n_tokens * d f32, row-major, in header order
//! ```
//!
//! Nothing may follow the last payload.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{EmbeddingMatrix, Modality, MultimodalSequence, SequenceMeta};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"MEMB";
pub const VERSION: u32 = 1;

const FILE_HEADER_LEN: u64 = 16;
const SEGMENT_HEADER_LEN: u64 = 12;

pub fn load_sequence(path: impl AsRef<Path>) -> Result<MultimodalSequence> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let seq = decode_sequence(&bytes)?;
    Ok(seq.with_meta(SequenceMeta { source_id: path.display().to_string(), ..Default::default() }))
}

pub fn save_sequence(seq: &MultimodalSequence, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_sequence(seq)?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

/// Serializes to MEMB bytes. Fails if any value overflows `f32`.
pub fn encode_sequence(seq: &MultimodalSequence) -> Result<Vec<u8>> {
    let segments = seq.segments();
    if segments.is_empty() {
        return Err(Error::InvalidSequence("no segments".into()));
    }
    let dim = u32::try_from(seq.dim()).map_err(|_| Error::InvalidSequence(format!("d = {} exceeds u32", seq.dim())))?;
    let count = u32::try_from(segments.len()).map_err(|_| Error::InvalidSequence("too many segments".into()))?;

    let payload: usize = segments.iter().map(|(_, m)| m.values().len() * 4).sum();
    let mut out = Vec::with_capacity(16 + 12 * segments.len() + payload);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    for (modality, m) in segments {
        out.push(modality.tag());
        out.extend_from_slice(&[0; 3]);
        out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    }
    for (_, m) in segments {
        for (i, &v) in m.values().iter().enumerate() {
            let narrowed = v as f32;
            if !narrowed.is_finite() {
                return Err(Error::NonFiniteValue { row: i / m.cols(), col: i % m.cols() });
            }
            out.extend_from_slice(&narrowed.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(Error::TruncatedPayload { expected: (self.pos + n) as u64, available: self.bytes.len() as u64 })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_sequence(bytes: &[u8]) -> Result<MultimodalSequence> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic: [u8; 4] = cur.take(4)?.try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::MagicMismatch { found: magic });
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let dim = cur.u32()? as usize;
    if dim == 0 {
        return Err(Error::InvalidHeader("d = 0".into()));
    }
    let count = cur.u32()? as u64;
    if count == 0 {
        return Err(Error::InvalidSequence("no segments".into()));
    }

    // Check the declared sizes against the file before allocating anything.
    let headers_end = FILE_HEADER_LEN + SEGMENT_HEADER_LEN * count;
    if headers_end > bytes.len() as u64 {
        return Err(Error::TruncatedPayload { expected: headers_end, available: bytes.len() as u64 });
    }
    let mut headers = Vec::with_capacity(count as usize);
    let mut expected = headers_end as u128;
    for i in 0..count {
        let head = cur.take(4)?;
        let modality = Modality::from_tag(head[0])
            .ok_or_else(|| Error::InvalidHeader(format!("segment {i}: modality tag {}", head[0])))?;
        if head[1..] != [0, 0, 0] {
            return Err(Error::InvalidHeader(format!("segment {i}: reserved bytes not zero")));
        }
        let n = cur.u64()?;
        if n == 0 {
            return Err(Error::EmptySegment(modality));
        }
        expected += n as u128 * dim as u128 * 4;
        headers.push((modality, n));
    }
    let available = bytes.len() as u128;
    if expected > available {
        return Err(Error::TruncatedPayload {
            expected: u64::try_from(expected).unwrap_or(u64::MAX),
            available: bytes.len() as u64,
        });
    }
    if expected < available {
        return Err(Error::TrailingBytes((available - expected) as u64));
    }

    let mut segments = Vec::with_capacity(headers.len());
    for (modality, n) in headers {
        let n = n as usize;
        let raw = cur.take(n * dim * 4)?;
        let values: Vec<f64> = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
        segments.push((modality, EmbeddingMatrix::new(n, dim, values)?));
    }
    MultimodalSequence::new(segments)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> MultimodalSequence {
        let text = EmbeddingMatrix::new(3, 4, (0..12).map(|i| i as f64 * 0.5).collect()).unwrap();
        let vision = EmbeddingMatrix::new(5, 4, (0..20).map(|i| -(i as f64) * 0.25).collect()).unwrap();
        MultimodalSequence::two_block(text, vision).unwrap()
    }

    #[test]
    fn round_trip() {
        let seq = fixture();
        let back = decode_sequence(&encode_sequence(&seq).unwrap()).unwrap();
        assert_eq!(back.total_tokens(), 8);
        assert_eq!(back.dim(), 4);
        assert_eq!(back.segments(), seq.segments());
    }

    #[test]
    fn file_round_trip_sets_source() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seq.memb");
        save_sequence(&fixture(), &path).unwrap();
        let back = load_sequence(&path).unwrap();
        assert_eq!(back.segments(), fixture().segments());
        assert!(back.meta.source_id.ends_with("seq.memb"));
    }

    #[test]
    fn header_layout() {
        let bytes = encode_sequence(&fixture()).unwrap();
        assert_eq!(&bytes[..4], b"MEMB");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 2);
        assert_eq!(&bytes[16..20], &[0, 0, 0, 0]);
        assert_eq!(u64::from_le_bytes(bytes[20..28].try_into().unwrap()), 3);
        assert_eq!(bytes[28], 1);
        assert_eq!(bytes.len(), 16 + 24 + 8 * 4 * 4);
    }

    #[test]
    fn wrong_magic() {
        let mut bytes = encode_sequence(&fixture()).unwrap();
        bytes[0] = b'X';
        assert!(matches!(decode_sequence(&bytes), Err(Error::MagicMismatch { .. })));
    }

    #[test]
    fn wrong_version() {
        let mut bytes = encode_sequence(&fixture()).unwrap();
        bytes[4] = 2;
        assert!(matches!(decode_sequence(&bytes), Err(Error::UnsupportedVersion(2))));
    }

    #[test]
    fn missing_row_is_truncation() {
        let text = EmbeddingMatrix::new(10, 2, vec![1.0; 20]).unwrap();
        let vision = EmbeddingMatrix::new(1, 2, vec![1.0; 2]).unwrap();
        let seq = MultimodalSequence::new(vec![(Modality::Vision, vision), (Modality::Text, text)]).unwrap();
        let mut bytes = encode_sequence(&seq).unwrap();
        bytes.truncate(bytes.len() - 8);
        assert!(matches!(decode_sequence(&bytes), Err(Error::TruncatedPayload { .. })));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = encode_sequence(&fixture()).unwrap();
        bytes.push(0);
        assert!(matches!(decode_sequence(&bytes), Err(Error::TrailingBytes(1))));
    }

    #[test]
    fn huge_declared_count_does_not_allocate() {
        let mut bytes = encode_sequence(&fixture()).unwrap();
        bytes[20..28].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(decode_sequence(&bytes), Err(Error::TruncatedPayload { .. })));
    }

    #[test]
    fn non_finite_payload() {
        let mut bytes = encode_sequence(&fixture()).unwrap();
        let at = 16 + 24 + 4 * 5;
        bytes[at..at + 4].copy_from_slice(&f32::INFINITY.to_le_bytes());
        assert!(matches!(decode_sequence(&bytes), Err(Error::NonFiniteValue { row: 1, col: 1 })));
    }

    #[test]
    fn bad_reserved_and_tag() {
        let mut bytes = encode_sequence(&fixture()).unwrap();
        bytes[17] = 1;
        assert!(matches!(decode_sequence(&bytes), Err(Error::InvalidHeader(_))));
        let mut bytes = encode_sequence(&fixture()).unwrap();
        bytes[16] = 7;
        assert!(matches!(decode_sequence(&bytes), Err(Error::InvalidHeader(_))));
    }

    #[test]
    fn f32_overflow_caught_before_writing() {
        let text = EmbeddingMatrix::new(1, 1, vec![1e300]).unwrap();
        let vision = EmbeddingMatrix::new(1, 1, vec![1.0]).unwrap();
        let seq = MultimodalSequence::two_block(text, vision).unwrap();
        assert!(matches!(encode_sequence(&seq), Err(Error::NonFiniteValue { .. })));
    }
}
