//! Per-modality information contributions.
//!
//! Two pathways feed the fused score:
//!
//! * intra-modal: half the log-determinant of the ridge-regularized covariance
//!   of each modality's embeddings, normalized across modalities;
//! * inter-modal: mean of per-token maximum cosine similarity against the
//!   other modality, in both directions, normalized across modalities.
//!
//! The two shares are combined with a weighted geometric mean and renormalized.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, SVD};
use serde::Serialize;

use crate::config::{AnalysisConfig, NormalizationMode};
use crate::error::{Error, Result};
use crate::json::{self, serialize_f64, Fixed};
use crate::seqio::{EmbeddingMatrix, Modality, MultimodalSequence, PerModality};

/// Floor added after min-max shifting so the least informative modality keeps
/// a non-zero share.
pub const SHIFT_FLOOR: f64 = 0.1;
/// Contributions are floored here before exponentiation.
pub const FUSION_FLOOR: f64 = 1e-9;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// Largest `n * d^2` for which the square-root factor of the covariance is
/// kept. Above it the log-determinant comes from a Cholesky factorization of
/// the formed covariance.
pub const ROOT_FACTOR_BUDGET: usize = 1 << 26;

/// Mean and second-moment spectrum of one modality.
#[derive(Debug, Clone)]
pub struct CovarianceSummary {
    pub modality: Modality,
    pub n: usize,
    pub dim: usize,
    pub mean: DVector<f64>,
    /// `d x d` covariance with the `1/n` estimator. `None` on the Gram path.
    pub sigma: Option<DMatrix<f64>>,
    /// Eigenvalues of `(1/n) E~ E~^T`, the `n x n` token Gram matrix.
    pub gram_eigenvalues: Option<Vec<f64>>,
    /// Upper-trapezoidal `R` with `R^T R = Sigma`, from a QR factorization of
    /// the scaled centered embeddings. Present only for small problems.
    pub root: Option<DMatrix<f64>>,
}

/// Computes mean and covariance of `seg`.
///
/// When the modality has fewer tokens than dimensions and `d` exceeds
/// `gram_threshold`, only the Gram spectrum is computed; it shares its non-zero
/// eigenvalues with the covariance. The Gram eigenvalues are squared singular
/// values of the centered tokens, which keeps the null directions at roundoff
/// far below any sensible `epsilon`.
pub fn covariance_summary(
    seg: &EmbeddingMatrix,
    modality: Modality,
    gram_threshold: usize,
) -> Result<CovarianceSummary> {
    let (n, d) = (seg.rows(), seg.cols());
    if n == 0 {
        return Err(Error::EmptySegment(modality));
    }
    if let Some(pos) = seg.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue { row: pos / d, col: pos % d });
    }

    let mut centered = seg.to_columns();
    let mean = centered.column_sum() / n as f64;
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let inv_n = 1.0 / n as f64;

    if n < d && d > gram_threshold {
        let svd = SVD::try_new(centered * inv_n.sqrt(), false, false, EIGEN_EPS, EIGEN_MAX_ITER)
            .ok_or(Error::FactorizationFailure)?;
        let mut eigs: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
        eigs.resize(n, 0.0);
        return Ok(CovarianceSummary {
            modality,
            n,
            dim: d,
            mean,
            sigma: None,
            gram_eigenvalues: Some(eigs),
            root: None,
        });
    }

    let sigma = symmetrize(&centered * centered.transpose() * inv_n);
    let root = (n.saturating_mul(d).saturating_mul(d) <= ROOT_FACTOR_BUDGET)
        .then(|| (centered.transpose() * inv_n.sqrt()).qr().r());
    Ok(CovarianceSummary { modality, n, dim: d, mean, sigma: Some(sigma), gram_eigenvalues: None, root })
}

fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let k = m.nrows();
    for i in 0..k {
        for j in (i + 1)..k {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    m
}

/// `H = 1/2 log det(Sigma + eps I)` in nats.
///
/// With a square-root factor available, `Sigma + eps I = A^T A` for
/// `A = [R; sqrt(eps) I]` and `H = sum log |diag(qr(A).R)|`. Forming `Sigma`
/// perturbs its null directions by about `u * |Sigma|`, which is not small next
/// to `eps`; orthogonal factorization of the data avoids that. Otherwise the
/// formed covariance is Cholesky-factored, falling back to a clamped
/// eigendecomposition.
pub fn entropy_proxy(cov: &CovarianceSummary, epsilon: f64) -> Result<f64> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
    }
    if let Some(root) = &cov.root {
        return Ok(root_log_det(root, epsilon) * 0.5);
    }
    match (&cov.sigma, &cov.gram_eigenvalues) {
        (Some(sigma), _) => direct_log_det(sigma, epsilon).map(|ld| 0.5 * ld),
        (None, Some(eigs)) => {
            let r = eigs.len();
            let spectrum: f64 = eigs.iter().map(|&l| (l.max(0.0) + epsilon).ln()).sum();
            let null_space = (cov.dim - r) as f64 * epsilon.ln();
            Ok(0.5 * (spectrum + null_space))
        }
        (None, None) => Err(Error::FactorizationFailure),
    }
}

fn root_log_det(root: &DMatrix<f64>, epsilon: f64) -> f64 {
    let (r, d) = root.shape();
    let mut stacked = DMatrix::zeros(r + d, d);
    stacked.view_mut((0, 0), (r, d)).copy_from(root);
    stacked.view_mut((r, 0), (d, d)).fill_diagonal(epsilon.sqrt());
    let upper = stacked.qr().r();
    2.0 * upper.diagonal().iter().map(|x| x.abs().ln()).sum::<f64>()
}

fn direct_log_det(sigma: &DMatrix<f64>, epsilon: f64) -> Result<f64> {
    let mut reg = sigma.clone();
    for i in 0..reg.nrows() {
        reg[(i, i)] += epsilon;
    }
    if let Some(chol) = Cholesky::new(reg) {
        return Ok(2.0 * chol.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>());
    }
    let eig = SymmetricEigen::try_new(sigma.clone(), EIGEN_EPS, EIGEN_MAX_ITER).ok_or(Error::FactorizationFailure)?;
    let ld = eig.eigenvalues.iter().map(|&l| (l.max(0.0) + epsilon).ln()).sum::<f64>();
    if ld.is_finite() {
        Ok(ld)
    } else {
        Err(Error::FactorizationFailure)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntraScores {
    /// Raw entropy proxies, nats.
    pub h: PerModality<f64>,
    pub i_intra: PerModality<f64>,
    pub normalization_mode: NormalizationMode,
}

pub fn intra_contributions(h: PerModality<f64>, mode: NormalizationMode) -> Result<IntraScores> {
    if !(h.text.is_finite() && h.vision.is_finite()) {
        return Err(Error::InvalidConfig(format!("entropies must be finite, got {h:?}")));
    }
    let i_intra = match mode {
        NormalizationMode::RawRatio => {
            if h.text <= 0.0 || h.vision <= 0.0 {
                return Err(Error::RawRatioRequiresPositive { text: h.text, vision: h.vision });
            }
            let total = h.sum();
            h.map(|x| x / total)
        }
        NormalizationMode::ShiftMinMax => {
            let lo = h.text.min(h.vision);
            let spread = h.text.max(h.vision) - lo;
            if spread < 1e-12 {
                PerModality::new(0.5, 0.5)
            } else {
                let shifted = h.map(|x| (x - lo) / spread + SHIFT_FLOOR);
                let total = shifted.sum();
                shifted.map(|x| x / total)
            }
        }
    };
    Ok(IntraScores { h, i_intra, normalization_mode: mode })
}

/// Cosine similarity of every text row against every vision row, `n_t x n_v`.
/// Zero rows compare as the zero vector.
pub fn similarity_matrix(text: &EmbeddingMatrix, vision: &EmbeddingMatrix) -> Result<DMatrix<f64>> {
    if text.cols() != vision.cols() {
        return Err(Error::DimensionMismatch { expected: text.cols(), found: vision.cols() });
    }
    let t = unit_columns(text.to_columns());
    let v = unit_columns(vision.to_columns());
    let mut s = t.transpose() * v;
    s.apply(|x| *x = x.clamp(-1.0, 1.0));
    Ok(s)
}

fn unit_columns(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for mut col in m.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    m
}

/// `(mean_i max_j S_ij, mean_j max_i S_ij)`.
pub fn directional_scores(s: &DMatrix<f64>) -> Result<(f64, f64)> {
    let (rows, cols) = s.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidSequence("empty similarity matrix".into()));
    }
    let mut row_max = vec![f64::NEG_INFINITY; rows];
    let mut col_sum = 0.0;
    for col in s.column_iter() {
        let mut best = f64::NEG_INFINITY;
        for (i, &x) in col.iter().enumerate() {
            best = best.max(x);
            row_max[i] = row_max[i].max(x);
        }
        col_sum += best;
    }
    let s_text = row_max.iter().sum::<f64>() / rows as f64;
    Ok((s_text, col_sum / cols as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterScores {
    /// Text-to-vision alignment before clamping.
    pub s_text: f64,
    /// Vision-to-text alignment before clamping.
    pub s_vision: f64,
    pub i_inter: PerModality<f64>,
    pub clamp_floor: f64,
}

pub fn inter_contributions(s_text: f64, s_vision: f64, clamp_floor: f64) -> InterScores {
    let t = s_text.max(clamp_floor);
    let v = s_vision.max(clamp_floor);
    let i_inter = if t == clamp_floor && v == clamp_floor {
        PerModality::new(0.5, 0.5)
    } else {
        PerModality::new(t / (t + v), v / (t + v))
    };
    InterScores { s_text, s_vision, i_inter, clamp_floor }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fusion {
    pub c: PerModality<f64>,
    pub c_tilde: PerModality<f64>,
}

/// `C_m = intra_m^alpha * inter_m^(1 - alpha)`, then `C~ = C / sum(C)`.
pub fn fuse_contributions(i_intra: PerModality<f64>, i_inter: PerModality<f64>, alpha: f64) -> Result<Fusion> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    for (name, v) in [("intra", i_intra), ("inter", i_inter)] {
        if !(v.text > 0.0 && v.vision > 0.0) || !v.text.is_finite() || !v.vision.is_finite() {
            return Err(Error::NonPositiveContribution(format!("{name} = {v:?}")));
        }
        if (v.sum() - 1.0).abs() > 1e-9 {
            return Err(Error::NonPositiveContribution(format!("{name} sums to {}", v.sum())));
        }
    }
    let c = PerModality::new(
        i_intra.text.max(FUSION_FLOOR).powf(alpha) * i_inter.text.max(FUSION_FLOOR).powf(1.0 - alpha),
        i_intra.vision.max(FUSION_FLOOR).powf(alpha) * i_inter.vision.max(FUSION_FLOOR).powf(1.0 - alpha),
    );
    let total = c.sum();
    Ok(Fusion { c, c_tilde: c.map(|x| x / total) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContributionReport {
    pub intra: IntraScores,
    pub inter: InterScores,
    pub alpha: f64,
    pub epsilon: f64,
    pub c: PerModality<f64>,
    pub c_tilde: PerModality<f64>,
}

impl ContributionReport {
    pub fn from_parts(intra: IntraScores, inter: InterScores, alpha: f64, epsilon: f64) -> Result<Self> {
        let Fusion { c, c_tilde } = fuse_contributions(intra.i_intra, inter.i_inter, alpha)?;
        Ok(Self { intra, inter, alpha, epsilon, c, c_tilde })
    }

    /// Every scalar in the report, with a stable name, for field-wise comparison.
    pub fn fields(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("alpha", self.alpha),
            ("epsilon", self.epsilon),
            ("h.text", self.intra.h.text),
            ("h.vision", self.intra.h.vision),
            ("i_intra.text", self.intra.i_intra.text),
            ("i_intra.vision", self.intra.i_intra.vision),
            ("s_raw.text_to_vision", self.inter.s_text),
            ("s_raw.vision_to_text", self.inter.s_vision),
            ("i_inter.text", self.inter.i_inter.text),
            ("i_inter.vision", self.inter.i_inter.vision),
            ("c.text", self.c.text),
            ("c.vision", self.c.vision),
            ("c_tilde.text", self.c_tilde.text),
            ("c_tilde.vision", self.c_tilde.vision),
        ]
    }

    pub fn to_json(&self) -> String {
        json::to_string(&ReportDoc::from(self)).expect("report serialization is infallible")
    }
}

#[derive(Serialize)]
struct DirectionalDoc {
    #[serde(serialize_with = "serialize_f64")]
    text_to_vision: f64,
    #[serde(serialize_with = "serialize_f64")]
    vision_to_text: f64,
}

/// Fixed-schema JSON view of a report.
#[derive(Serialize)]
pub(crate) struct ReportDoc {
    #[serde(serialize_with = "serialize_f64")]
    alpha: f64,
    #[serde(serialize_with = "serialize_f64")]
    epsilon: f64,
    normalization_mode: NormalizationMode,
    h: PerModality<Fixed>,
    i_intra: PerModality<Fixed>,
    s_raw: DirectionalDoc,
    i_inter: PerModality<Fixed>,
    c: PerModality<Fixed>,
    c_tilde: PerModality<Fixed>,
}

impl From<&ContributionReport> for ReportDoc {
    fn from(r: &ContributionReport) -> Self {
        Self {
            alpha: r.alpha,
            epsilon: r.epsilon,
            normalization_mode: r.intra.normalization_mode,
            h: r.intra.h.map(Fixed),
            i_intra: r.intra.i_intra.map(Fixed),
            s_raw: DirectionalDoc { text_to_vision: r.inter.s_text, vision_to_text: r.inter.s_vision },
            i_inter: r.inter.i_inter.map(Fixed),
            c: r.c.map(Fixed),
            c_tilde: r.c_tilde.map(Fixed),
        }
    }
}

impl Serialize for ContributionReport {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ReportDoc::from(self).serialize(s)
    }
}

/// Runs both pathways on a sequence, pooling every segment of a modality first.
pub fn analyze(seq: &MultimodalSequence, config: &AnalysisConfig) -> Result<ContributionReport> {
    config.validate()?;
    let text = seq.pooled(Modality::Text);
    let vision = seq.pooled(Modality::Vision);

    let h = PerModality::new(
        entropy_proxy(&covariance_summary(&text, Modality::Text, config.gram_threshold)?, config.epsilon)?,
        entropy_proxy(&covariance_summary(&vision, Modality::Vision, config.gram_threshold)?, config.epsilon)?,
    );
    let intra = intra_contributions(h, config.normalization_mode)?;

    let s = similarity_matrix(&text, &vision)?;
    let (s_text, s_vision) = directional_scores(&s)?;
    let inter = inter_contributions(s_text, s_vision, config.clamp_floor);

    ContributionReport::from_parts(intra, inter, config.alpha, config.epsilon)
}
