//! Reconstruction scoring: per-pair MSE/PSNR after optimal matching, label
//! accuracy, and the rank-correlation helper used by the gradient-scale sweep.
//!
//! The MSE here is the L2 norm of the difference divided by the input
//! dimension (not the squared norm), and PSNR is `-10·log10(MSE)`. Mean PSNR
//! is the mean of per-pair PSNRs, which differs from the PSNR of the mean MSE.

use crate::linalg::{hungarian, DenseMatrix};
use crate::model::Batch;
use thiserror::Error;

/// Exact-recovery pairs report infinite PSNR; aggregation caps them here so a
/// handful of exact solves cannot blow up the mean.
pub const PSNR_CAP: f64 = 300.0;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("negative mse {0}")]
    NegativeMse(f64),
}

/// `‖a − b‖₂ / dim`.
pub fn mse(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch { left: a.len(), right: b.len() });
    }
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sq.sqrt() / a.len() as f64)
}

/// `-10 · log10(mse)`; an exact match (mse = 0) reports positive infinity.
pub fn psnr(mse_value: f64) -> Result<f64, MetricsError> {
    if mse_value < 0.0 {
        return Err(MetricsError::NegativeMse(mse_value));
    }
    if mse_value == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * mse_value.log10())
}

/// Matched scores over the best reconstruction/truth pairing.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MatchedScore {
    /// `(recon index, truth index)` pairs of the optimal assignment.
    pub pairs: Vec<(usize, usize)>,
    pub per_pair_mse: Vec<f64>,
    /// Per-pair PSNR, capped at [`PSNR_CAP`] for exact recoveries.
    pub per_pair_psnr: Vec<f64>,
    pub mean_mse: f64,
    pub mean_psnr: f64,
    /// Label multiset-intersection size over the truth batch size.
    pub lacc: f64,
    /// Number of pairs whose raw PSNR was infinite.
    pub exact_pairs: usize,
    /// Set when the two batches had different sizes (scored on the smaller).
    pub size_mismatch: bool,
}

/// Hungarian matching on the pairwise-MSE cost, then per-pair metrics.
pub fn match_and_score(recon: &Batch, truth: &Batch) -> MatchedScore {
    let size_mismatch = recon.len() != truth.len();
    let n = recon.len().max(truth.len());
    // Virtual rows/cols for the smaller side carry zero cost, so the optimal
    // assignment on the real block is unaffected.
    let cost = DenseMatrix::from_fn(n, n, |r, t| {
        if r < recon.len() && t < truth.len() {
            mse(&recon.inputs[r], &truth.inputs[t]).expect("equal input dims")
        } else {
            0.0
        }
    });
    let assignment = hungarian(&cost).expect("square finite cost");
    let pairs: Vec<(usize, usize)> = assignment
        .into_iter()
        .filter(|&(r, t)| r < recon.len() && t < truth.len())
        .collect();

    let per_pair_mse: Vec<f64> = pairs.iter().map(|&(r, t)| cost.get(r, t)).collect();
    let raw_psnr: Vec<f64> = per_pair_mse.iter().map(|&m| psnr(m).unwrap()).collect();
    let exact_pairs = raw_psnr.iter().filter(|p| p.is_infinite()).count();
    let per_pair_psnr: Vec<f64> = raw_psnr.iter().map(|p| p.min(PSNR_CAP)).collect();

    let count = pairs.len().max(1) as f64;
    let mean_mse = per_pair_mse.iter().sum::<f64>() / count;
    let mean_psnr = per_pair_psnr.iter().sum::<f64>() / count;

    // Label accuracy: multiset intersection of the label lists.
    let mut truth_counts = std::collections::HashMap::new();
    for &y in &truth.labels {
        *truth_counts.entry(y).or_insert(0usize) += 1;
    }
    let mut common = 0usize;
    for &y in &recon.labels {
        if let Some(c) = truth_counts.get_mut(&y) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    let lacc = common as f64 / truth.len() as f64;

    MatchedScore {
        pairs,
        per_pair_mse,
        per_pair_psnr,
        mean_mse,
        mean_psnr,
        lacc,
        exact_pairs,
        size_mismatch,
    }
}

/// Spearman rank correlation with average ranks on ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = xs.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mean) * (b - mean);
        var_x += (a - mean) * (a - mean);
        var_y += (b - mean) * (b - mean);
    }
    if var_x == 0.0 || var_y == 0.0 {
        return 0.0;
    }
    cov / (var_x.sqrt() * var_y.sqrt())
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = avg;
        }
        i = j + 1;
    }
    out
}
