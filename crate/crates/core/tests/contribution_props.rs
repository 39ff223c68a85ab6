mod common;

use modix_core::contribution::{
    covariance_summary, directional_scores, entropy_proxy, fuse_contributions, similarity_matrix,
};
use modix_core::{
    analyze, generate_synthetic, AnalysisConfig, EmbeddingMatrix, GeneratorSpec, Modality, MultimodalSequence,
    PerModality,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn assert_reports_close(a: &modix_core::ContributionReport, b: &modix_core::ContributionReport, tol: f64) {
    for ((name, x), (_, y)) in a.fields().into_iter().zip(b.fields()) {
        assert!((x - y).abs() <= tol, "{name}: {x} vs {y}");
    }
}

fn shuffled_rows(m: &EmbeddingMatrix, rng: &mut impl Rng) -> EmbeddingMatrix {
    let mut rows: Vec<Vec<f64>> = m.iter_rows().map(<[f64]>::to_vec).collect();
    rows.shuffle(rng);
    EmbeddingMatrix::from_rows(&rows).unwrap()
}

fn doubled_rows(m: &EmbeddingMatrix) -> EmbeddingMatrix {
    let rows: Vec<Vec<f64>> = m.iter_rows().flat_map(|r| [r.to_vec(), r.to_vec()]).collect();
    EmbeddingMatrix::from_rows(&rows).unwrap()
}

#[test]
fn normalizations_sum_to_one() {
    let mut rng = common::rng(1);
    let cfg = AnalysisConfig::default();
    for case in 0..200 {
        let seq = if case % 4 == 0 {
            common::degenerate_sequence(&mut rng, case / 4)
        } else {
            common::random_sequence(&mut rng, 16, 48, 24)
        };
        let r = analyze(&seq, &cfg).unwrap();
        for (name, v) in [("intra", r.intra.i_intra), ("inter", r.inter.i_inter), ("c_tilde", r.c_tilde)] {
            assert!((v.sum() - 1.0).abs() <= 1e-12, "case {case} {name}: {v:?}");
            assert!(v.text > 0.0 && v.vision > 0.0 && v.text < 1.0 && v.vision < 1.0);
        }
    }
}

#[test]
fn row_permutation_invariance() {
    let mut rng = common::rng(2);
    let cfg = AnalysisConfig::default();
    for _ in 0..30 {
        let seq = common::random_sequence(&mut rng, 12, 40, 16);
        let text = seq.pooled(Modality::Text);
        let vision = seq.pooled(Modality::Vision);
        let base = analyze(&seq, &cfg).unwrap();
        let permuted =
            MultimodalSequence::two_block(shuffled_rows(&text, &mut rng), shuffled_rows(&vision, &mut rng)).unwrap();
        assert_reports_close(&base, &analyze(&permuted, &cfg).unwrap(), 1e-9);
    }
}

#[test]
fn row_duplication_invariance() {
    let mut rng = common::rng(3);
    let cfg = AnalysisConfig::default();
    for _ in 0..30 {
        let seq = common::random_sequence(&mut rng, 10, 30, 16);
        let text = seq.pooled(Modality::Text);
        let vision = seq.pooled(Modality::Vision);
        let base = analyze(&seq, &cfg).unwrap();
        let doubled = MultimodalSequence::two_block(doubled_rows(&text), vision.clone()).unwrap();
        assert_reports_close(&base, &analyze(&doubled, &cfg).unwrap(), 1e-9);
        let doubled = MultimodalSequence::two_block(text, doubled_rows(&vision)).unwrap();
        assert_reports_close(&base, &analyze(&doubled, &cfg).unwrap(), 1e-9);
    }
}

fn random_orthogonal(d: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    m.qr().q()
}

#[test]
fn entropy_rotation_invariance() {
    let mut rng = common::rng(4);
    for _ in 0..20 {
        let seq = common::random_sequence(&mut rng, 16, 40, 20);
        let vision = seq.pooled(Modality::Vision);
        let q = random_orthogonal(vision.cols(), &mut rng);
        // Rows times Q^T: rotate each embedding.
        let rotated = (q * vision.to_columns()).transpose();
        let rows: Vec<Vec<f64>> = rotated.row_iter().map(|r| r.iter().copied().collect()).collect();
        let rotated = EmbeddingMatrix::from_rows(&rows).unwrap();
        let h =
            |m: &EmbeddingMatrix| entropy_proxy(&covariance_summary(m, Modality::Vision, 512).unwrap(), 1e-6).unwrap();
        let (a, b) = (h(&vision), h(&rotated));
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

#[test]
fn gram_and_direct_paths_agree() {
    let mut rng = common::rng(5);
    for _ in 0..25 {
        let d = rng.random_range(8..=128);
        let n = rng.random_range(1..d);
        let spec =
            GeneratorSpec { text_scale: rng.random_range(0.1..3.0), seed: rng.random(), ..GeneratorSpec::new(n, 1, d) };
        let text = generate_synthetic(&spec).unwrap().pooled(Modality::Text);
        let gram = covariance_summary(&text, Modality::Text, 0).unwrap();
        let direct = covariance_summary(&text, Modality::Text, usize::MAX).unwrap();
        assert!(gram.sigma.is_none() && direct.sigma.is_some());
        let (hg, hd) = (entropy_proxy(&gram, 1e-6).unwrap(), entropy_proxy(&direct, 1e-6).unwrap());
        assert!((hg - hd).abs() <= 1e-6 * hd.abs() + 1e-8, "n={n} d={d}: {hg} vs {hd}");
    }
}

#[test]
fn covariance_is_symmetric_psd() {
    let mut rng = common::rng(6);
    for _ in 0..20 {
        let seq = common::random_sequence(&mut rng, 16, 32, 16);
        for m in [Modality::Text, Modality::Vision] {
            let cov = covariance_summary(&seq.pooled(m), m, 512).unwrap();
            let sigma = cov.sigma.unwrap();
            assert!((&sigma - sigma.transpose()).amax() <= 1e-12);
            let eig = sigma.symmetric_eigenvalues();
            assert!(eig.iter().all(|&l| l >= -1e-9));
        }
    }
}

#[test]
fn symmetric_sequence_is_balanced() {
    let mut rng = common::rng(8);
    for _ in 0..10 {
        let seq = common::random_sequence(&mut rng, 16, 4, 12);
        let text = seq.pooled(Modality::Text);
        let mirrored = MultimodalSequence::two_block(text.clone(), text).unwrap();
        let r = analyze(&mirrored, &AnalysisConfig::default()).unwrap();
        assert!((r.c_tilde.text - 0.5).abs() <= 1e-9);
    }
}

#[test]
fn degenerate_vision_loses_to_full_rank_text() {
    for seed in 0..10 {
        let spec = GeneratorSpec { vision_rank: 1, seed, ..GeneratorSpec::new(24, 48, 12) };
        let r = analyze(&generate_synthetic(&spec).unwrap(), &AnalysisConfig::default()).unwrap();
        assert!(r.intra.h.text > r.intra.h.vision);
        assert!(r.c_tilde.text > r.c_tilde.vision, "seed {seed}: {:?}", r.c_tilde);
    }
}

proptest! {
    #[test]
    fn cosine_and_directional_bounds(
        t in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 5), 1..8),
        v in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 5), 1..8),
    ) {
        let s = similarity_matrix(&EmbeddingMatrix::from_rows(&t).unwrap(), &EmbeddingMatrix::from_rows(&v).unwrap()).unwrap();
        prop_assert!(s.iter().all(|x| (-1.0..=1.0).contains(x)));
        let (a, b) = directional_scores(&s).unwrap();
        prop_assert!((-1.0..=1.0).contains(&a) && (-1.0..=1.0).contains(&b));
    }

    #[test]
    fn fusion_monotone_in_intra(
        x in 0.05f64..0.9,
        step in 0.001f64..0.05,
        inter_t in 0.05f64..0.95,
        alpha in 0.01f64..0.99,
    ) {
        let inter = PerModality::new(inter_t, 1.0 - inter_t);
        let lo = fuse_contributions(PerModality::new(x, 1.0 - x), inter, alpha).unwrap();
        let hi = fuse_contributions(PerModality::new(x + step, 1.0 - x - step), inter, alpha).unwrap();
        prop_assert!(hi.c_tilde.text > lo.c_tilde.text);
    }

    #[test]
    fn fusion_endpoints(x in 0.01f64..0.99, y in 0.01f64..0.99) {
        let intra = PerModality::new(x, 1.0 - x);
        let inter = PerModality::new(y, 1.0 - y);
        let at_one = fuse_contributions(intra, inter, 1.0).unwrap().c_tilde;
        let at_zero = fuse_contributions(intra, inter, 0.0).unwrap().c_tilde;
        prop_assert!((at_one.text - x).abs() <= 1e-12 && (at_one.vision - (1.0 - x)).abs() <= 1e-12);
        prop_assert!((at_zero.text - y).abs() <= 1e-12 && (at_zero.vision - (1.0 - y)).abs() <= 1e-12);
    }
}
