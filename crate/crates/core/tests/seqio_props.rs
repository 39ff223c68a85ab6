use modix_core::seqio::{decode_sequence, encode_sequence};
use modix_core::{EmbeddingMatrix, Modality, MultimodalSequence};
use proptest::prelude::*;

fn segment() -> impl Strategy<Value = (bool, usize)> {
    (prop::bool::ANY, 1usize..6)
}

fn sequence() -> impl Strategy<Value = MultimodalSequence> {
    (1usize..6, prop::collection::vec(segment(), 0..4), any::<u64>()).prop_map(|(d, extra, salt)| {
        let mut segs = vec![(Modality::Text, 2), (Modality::Vision, 3)];
        segs.extend(extra.into_iter().map(|(v, n)| (if v { Modality::Vision } else { Modality::Text }, n)));
        let mut k = salt;
        let segments = segs
            .into_iter()
            .map(|(m, n)| {
                let values = (0..n * d)
                    .map(|_| {
                        k = k.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                        // f32-representable values round-trip exactly.
                        ((k >> 40) as f32 / 1024.0 - 8192.0) as f64
                    })
                    .collect();
                (m, EmbeddingMatrix::new(n, d, values).unwrap())
            })
            .collect();
        MultimodalSequence::new(segments).unwrap()
    })
}

proptest! {
    #[test]
    fn container_round_trip(seq in sequence()) {
        let back = decode_sequence(&encode_sequence(&seq).unwrap()).unwrap();
        prop_assert_eq!(back.segments(), seq.segments());
    }

    #[test]
    fn truncation_never_panics(seq in sequence(), cut in 0usize..64) {
        let bytes = encode_sequence(&seq).unwrap();
        let keep = bytes.len().saturating_sub(cut + 1);
        prop_assert!(decode_sequence(&bytes[..keep]).is_err());
    }
}
