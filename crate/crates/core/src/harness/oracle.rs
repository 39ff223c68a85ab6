//! Brute-force recomputation of the analysis and index pipeline.
//!
//! Uses nested loops and a one-sided Jacobi eigensolver; shares no numerical
//! code with the main path so that agreement between the two is evidence.

use crate::config::{AnalysisConfig, NormalizationMode};
use crate::contribution::{ContributionReport, InterScores, IntraScores};
use crate::error::{Error, Result};
use crate::seqio::{Modality, MultimodalSequence, PerModality};
use crate::stride::{LayoutEntry, PositionPlan};

pub const ORACLE_MAX_TOKENS: usize = 256;
pub const ORACLE_MAX_DIM: usize = 64;

fn rows_of(seq: &MultimodalSequence, modality: Modality) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for (m, e) in seq.segments() {
        if *m == modality {
            for i in 0..e.rows() {
                out.push(e.row(i).to_vec());
            }
        }
    }
    out
}

/// Columns of `[E~ / sqrt(n); sqrt(eps) I]`, so that `A^T A = Sigma + eps I`
/// with `Sigma` the `1/n` covariance.
fn augmented_columns(rows: &[Vec<f64>], epsilon: f64) -> Vec<Vec<f64>> {
    let n = rows.len();
    let d = rows[0].len();
    let mut mean = vec![0.0; d];
    for r in rows {
        for j in 0..d {
            mean[j] += r[j];
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let scale = 1.0 / (n as f64).sqrt();
    let mut cols = vec![vec![0.0; n + d]; d];
    for (i, r) in rows.iter().enumerate() {
        for j in 0..d {
            cols[j][i] = (r[j] - mean[j]) * scale;
        }
    }
    for (j, col) in cols.iter_mut().enumerate() {
        col[n + j] = epsilon.sqrt();
    }
    cols
}

/// Eigenvalues of `A^T A` by one-sided (Hestenes) Jacobi: plane rotations
/// orthogonalize the columns of `A`, after which the squared column norms are
/// the eigenvalues.
fn one_sided_jacobi_eigenvalues(mut cols: Vec<Vec<f64>>) -> Vec<f64> {
    let d = cols.len();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..d {
            for q in (p + 1)..d {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for (x, y) in cols[p].iter().zip(&cols[q]) {
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..cols[p].len() {
                    let (x, y) = (cols[p][k], cols[q][k]);
                    cols[p][k] = c * x - s * y;
                    cols[q][k] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    cols.iter().map(|c| c.iter().map(|x| x * x).sum()).collect()
}

fn entropy(rows: &[Vec<f64>], epsilon: f64) -> f64 {
    let eigs = one_sided_jacobi_eigenvalues(augmented_columns(rows, epsilon));
    let mut log_det = 0.0;
    for l in eigs {
        log_det += l.ln();
    }
    log_det / 2.0
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut ab = 0.0;
    let mut aa = 0.0;
    let mut bb = 0.0;
    for k in 0..a.len() {
        ab += a[k] * b[k];
        aa += a[k] * a[k];
        bb += b[k] * b[k];
    }
    if aa == 0.0 || bb == 0.0 {
        return 0.0;
    }
    let c = ab / (aa.sqrt() * bb.sqrt());
    c.clamp(-1.0, 1.0)
}

pub fn oracle_pipeline(
    seq: &MultimodalSequence,
    config: &AnalysisConfig,
) -> Result<(ContributionReport, PositionPlan)> {
    config.validate()?;
    let tokens = seq.total_tokens();
    if tokens > ORACLE_MAX_TOKENS || seq.dim() > ORACLE_MAX_DIM {
        return Err(Error::OracleSizeExceeded {
            tokens,
            dim: seq.dim(),
            max_tokens: ORACLE_MAX_TOKENS,
            max_dim: ORACLE_MAX_DIM,
        });
    }
    let text = rows_of(seq, Modality::Text);
    let vision = rows_of(seq, Modality::Vision);
    let eps = config.epsilon;

    let h_t = entropy(&text, eps);
    let h_v = entropy(&vision, eps);
    let (i_t, i_v) = match config.normalization_mode {
        NormalizationMode::RawRatio => {
            if h_t <= 0.0 || h_v <= 0.0 {
                return Err(Error::RawRatioRequiresPositive { text: h_t, vision: h_v });
            }
            (h_t / (h_t + h_v), h_v / (h_t + h_v))
        }
        NormalizationMode::ShiftMinMax => {
            let lo = if h_t < h_v { h_t } else { h_v };
            let hi = if h_t < h_v { h_v } else { h_t };
            if hi - lo < 1e-12 {
                (0.5, 0.5)
            } else {
                let a = (h_t - lo) / (hi - lo) + 0.1;
                let b = (h_v - lo) / (hi - lo) + 0.1;
                (a / (a + b), b / (a + b))
            }
        }
    };

    let mut sim = vec![vec![0.0; vision.len()]; text.len()];
    for (i, t) in text.iter().enumerate() {
        for (j, v) in vision.iter().enumerate() {
            sim[i][j] = cosine(t, v);
        }
    }
    let mut s_t = 0.0;
    for row in &sim {
        let mut best = row[0];
        for &x in row {
            if x > best {
                best = x;
            }
        }
        s_t += best;
    }
    s_t /= text.len() as f64;
    let mut s_v = 0.0;
    for j in 0..vision.len() {
        let mut best = sim[0][j];
        for row in &sim {
            if row[j] > best {
                best = row[j];
            }
        }
        s_v += best;
    }
    s_v /= vision.len() as f64;

    let floor = config.clamp_floor;
    let ct = if s_t < floor { floor } else { s_t };
    let cv = if s_v < floor { floor } else { s_v };
    let (e_t, e_v) = if ct == floor && cv == floor { (0.5, 0.5) } else { (ct / (ct + cv), cv / (ct + cv)) };

    let alpha = config.alpha;
    let fused_t = i_t.max(1e-9).powf(alpha) * e_t.max(1e-9).powf(1.0 - alpha);
    let fused_v = i_v.max(1e-9).powf(alpha) * e_v.max(1e-9).powf(1.0 - alpha);
    let u_t = fused_t / (fused_t + fused_v);
    let u_v = fused_v / (fused_t + fused_v);

    let mut delta = u_t / u_v;
    if let Some(b) = config.stride_bounds {
        delta = delta.max(b.min).min(b.max);
    }

    // Piecewise index reconstruction, evaluated token by token.
    let mut indices = Vec::with_capacity(tokens);
    let mut layout = Vec::new();
    let mut run_start_prev: Option<f64> = None;
    for (m, e) in seq.segments() {
        let step = if *m == Modality::Text { 1.0 } else { delta };
        for k in 0..e.rows() {
            indices.push(match run_start_prev {
                None => step * k as f64,
                Some(prev) => prev + step * (k as f64 + 1.0),
            });
        }
        run_start_prev = indices.last().copied();
        layout.push(LayoutEntry { modality: *m, count: e.rows() });
    }

    let report = ContributionReport {
        intra: IntraScores {
            h: PerModality::new(h_t, h_v),
            i_intra: PerModality::new(i_t, i_v),
            normalization_mode: config.normalization_mode,
        },
        inter: InterScores { s_text: s_t, s_vision: s_v, i_inter: PerModality::new(e_t, e_v), clamp_floor: floor },
        alpha,
        epsilon: eps,
        c: PerModality::new(fused_t, fused_v),
        c_tilde: PerModality::new(u_t, u_v),
    };
    let plan = PositionPlan { delta_text: 1.0, delta_vision: delta, layout, indices };
    Ok((report, plan))
}
