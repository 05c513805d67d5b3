//! Statistical portrait of a token vocabulary: rank-frequency counts, Zipf
//! fit, Gini coefficient, cluster-quality scores, and a 2-D PCA projection.
//!
//! The Zipf fit is ordinary least squares on (log10 rank, log10 count); the
//! reported deviation is the RMSE of the log10 residuals over the fitted
//! rank range.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::patching::Patch;
use crate::quantizer::Codebook;

/// Above this many points, silhouette falls back to seeded uniform subsampling.
pub const SILHOUETTE_EXACT_LIMIT: usize = 50_000;
const SILHOUETTE_SUBSAMPLE_SEED: u64 = 0x51_1C;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("empty token list")]
    EmptyTokens,
    #[error("token {token} out of range for K = {k}")]
    TokenOutOfRange { token: usize, k: usize },
    #[error("counts must be positive and sorted descending")]
    InvalidCounts,
    #[error("rank range [{lo}, {hi}] needs at least 3 ranks within 1..={available}")]
    InvalidRankRange {
        lo: usize,
        hi: usize,
        available: usize,
    },
    #[error("gini needs a non-empty list with a positive sum")]
    DegenerateGini,
    #[error("gini input contains a negative value")]
    NegativeCount,
    #[error("need at least 2 non-empty clusters, got {0}")]
    SingleCluster(usize),
    #[error("all points are identical; silhouette is undefined")]
    AllPointsIdentical,
    #[error("{got} labels for {patches} patches")]
    LabelMismatch { patches: usize, got: usize },
    #[error("PCA needs at least {needed} patches, got {got}")]
    TooFewPatches { got: usize, needed: usize },
    #[error("PCA needs patch dimension >= 2, got {0}")]
    PatchDimTooSmall(usize),
    #[error("data has zero variance in every direction")]
    RankZeroData,
}

/// Descending token counts; rank r (1-based) is `counts[r - 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankFrequency {
    counts: Vec<u64>,
    total: u64,
}

impl RankFrequency {
    pub fn from_counts(counts: Vec<u64>) -> Result<Self, StatsError> {
        if counts.is_empty() || counts.contains(&0) || counts.windows(2).any(|w| w[0] < w[1]) {
            return Err(StatsError::InvalidCounts);
        }
        let total = counts.iter().sum();
        Ok(Self { counts, total })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of observed ranks.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Tally observed tokens and sort the counts descending. Unobserved tokens
/// are excluded.
pub fn rank_frequency(tokens: &[usize], k: usize) -> Result<RankFrequency, StatsError> {
    if tokens.is_empty() {
        return Err(StatsError::EmptyTokens);
    }
    let mut tally = vec![0u64; k];
    for &t in tokens {
        if t >= k {
            return Err(StatsError::TokenOutOfRange { token: t, k });
        }
        tally[t] += 1;
    }
    let mut counts: Vec<u64> = tally.into_iter().filter(|&c| c > 0).collect();
    counts.sort_unstable_by(|a, b| b.cmp(a));
    RankFrequency::from_counts(counts)
}

/// Token counts per token id, sorted by (count desc, token asc). Feeds the
/// frequency-ordered centroid report.
pub fn cluster_sizes(tokens: &[usize], k: usize) -> Result<Vec<(usize, u64)>, StatsError> {
    if tokens.is_empty() {
        return Err(StatsError::EmptyTokens);
    }
    let mut tally = vec![0u64; k];
    for &t in tokens {
        if t >= k {
            return Err(StatsError::TokenOutOfRange { token: t, k });
        }
        tally[t] += 1;
    }
    let mut sizes: Vec<(usize, u64)> = tally.into_iter().enumerate().collect();
    sizes.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(sizes)
}

/// Power-law fit of a rank-frequency curve in log10-log10 space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZipfFit {
    /// Negated OLS slope, positive for decaying counts.
    pub exponent: f64,
    /// OLS intercept in log10 space.
    pub intercept: f64,
    /// RMSE of the log10 residuals.
    pub deviation: f64,
    /// 1-based inclusive rank range the fit covers.
    pub rank_range: (usize, usize),
}

impl ZipfFit {
    /// Conformity score 1 / (1 + deviation): 1 for a perfect power law,
    /// falling toward 0 as the log-log residuals grow.
    pub fn conformity(&self) -> f64 {
        1.0 / (1.0 + self.deviation)
    }
}

pub(crate) fn log_log_ols(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let mse: f64 = points
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + slope * p.0);
            r * r
        })
        .sum::<f64>()
        / n;
    (slope, intercept, mse.sqrt())
}

/// OLS fit over `rank_range` (1-based inclusive; defaults to every observed
/// rank). Needs at least 3 ranks in range.
pub fn fit_zipf(
    rf: &RankFrequency,
    rank_range: Option<(usize, usize)>,
) -> Result<ZipfFit, StatsError> {
    let available = rf.len();
    let (lo, hi) = rank_range.unwrap_or((1, available));
    if lo < 1 || hi > available || hi < lo + 2 {
        return Err(StatsError::InvalidRankRange { lo, hi, available });
    }
    let points: Vec<(f64, f64)> = (lo..=hi)
        .map(|r| ((r as f64).log10(), (rf.counts()[r - 1] as f64).log10()))
        .collect();
    let (slope, intercept, deviation) = log_log_ols(&points);
    Ok(ZipfFit {
        exponent: -slope,
        intercept,
        deviation,
        rank_range: (lo, hi),
    })
}

/// Gini coefficient: sum_ij |x_i - x_j| / (2 n sum(x)). 0 for uniform input,
/// approaching 1 for a single spike.
pub fn gini(counts: &[f64]) -> Result<f64, StatsError> {
    if counts.is_empty() {
        return Err(StatsError::DegenerateGini);
    }
    if counts.iter().any(|&c| c < 0.0) {
        return Err(StatsError::NegativeCount);
    }
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return Err(StatsError::DegenerateGini);
    }
    let n = counts.len();
    let mut abs_diff_sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            abs_diff_sum += (counts[i] - counts[j]).abs();
        }
    }
    Ok(abs_diff_sum / (2.0 * n as f64 * total))
}

/// Standard internal cluster-validation scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterQuality {
    pub silhouette: f64,
    pub davies_bouldin: f64,
    pub calinski_harabasz: f64,
}

/// Silhouette, Davies-Bouldin, and Calinski-Harabasz for a labeled patch set.
///
/// Silhouette uses exact pairwise distances up to [`SILHOUETTE_EXACT_LIMIT`]
/// points and a fixed-seed uniform subsample beyond that. Davies-Bouldin and
/// Calinski-Harabasz use the empirical cluster means.
pub fn cluster_quality(
    patches: &[Patch],
    labels: &[usize],
    codebook: &Codebook,
) -> Result<ClusterQuality, StatsError> {
    if labels.len() != patches.len() {
        return Err(StatsError::LabelMismatch {
            patches: patches.len(),
            got: labels.len(),
        });
    }
    for &l in labels {
        if l >= codebook.k {
            return Err(StatsError::TokenOutOfRange {
                token: l,
                k: codebook.k,
            });
        }
    }
    let k = codebook.k;
    let dim = codebook.p;
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    let non_empty = counts.iter().filter(|&&c| c > 0).count();
    if non_empty < 2 {
        return Err(StatsError::SingleCluster(non_empty));
    }

    let silhouette = silhouette_score(patches, labels, k)?;

    // Cluster means and scatters.
    let mut means = vec![vec![0.0f64; dim]; k];
    for (p, &l) in patches.iter().zip(labels) {
        for (m, &v) in means[l].iter_mut().zip(&p.values) {
            *m += v;
        }
    }
    for (mean, &count) in means.iter_mut().zip(&counts) {
        if count > 0 {
            for m in mean.iter_mut() {
                *m /= count as f64;
            }
        }
    }
    let mut scatter = vec![0.0f64; k]; // mean distance to own cluster mean
    let mut within_ss = 0.0f64;
    for (p, &l) in patches.iter().zip(labels) {
        let d2: f64 = p
            .values
            .iter()
            .zip(&means[l])
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        scatter[l] += d2.sqrt();
        within_ss += d2;
    }
    for (s, &count) in scatter.iter_mut().zip(&counts) {
        if count > 0 {
            *s /= count as f64;
        }
    }

    let occupied: Vec<usize> = (0..k).filter(|&c| counts[c] > 0).collect();
    let mut db_sum = 0.0f64;
    for &i in &occupied {
        let mut worst = 0.0f64;
        for &j in &occupied {
            if i == j {
                continue;
            }
            let m: f64 = means[i]
                .iter()
                .zip(&means[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let s = scatter[i] + scatter[j];
            let ratio = if m > 0.0 {
                s / m
            } else if s == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(ratio);
        }
        db_sum += worst;
    }
    let davies_bouldin = db_sum / occupied.len() as f64;

    let n = patches.len() as f64;
    let mut grand = vec![0.0f64; dim];
    for p in patches {
        for (g, &v) in grand.iter_mut().zip(&p.values) {
            *g += v;
        }
    }
    for g in grand.iter_mut() {
        *g /= n;
    }
    let mut between_ss = 0.0f64;
    for &c in &occupied {
        let d2: f64 = means[c]
            .iter()
            .zip(&grand)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        between_ss += counts[c] as f64 * d2;
    }
    let kk = occupied.len() as f64;
    let calinski_harabasz = if within_ss > 0.0 {
        (between_ss / (kk - 1.0)) / (within_ss / (n - kk))
    } else if between_ss > 0.0 {
        f64::INFINITY
    } else {
        return Err(StatsError::AllPointsIdentical);
    };

    Ok(ClusterQuality {
        silhouette,
        davies_bouldin,
        calinski_harabasz,
    })
}

fn silhouette_score(patches: &[Patch], labels: &[usize], k: usize) -> Result<f64, StatsError> {
    let n = patches.len();
    let (sub_patches, sub_labels): (Vec<&Patch>, Vec<usize>) = if n > SILHOUETTE_EXACT_LIMIT {
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(SILHOUETTE_SUBSAMPLE_SEED);
        idx.shuffle(&mut rng);
        idx.truncate(SILHOUETTE_EXACT_LIMIT);
        idx.sort_unstable();
        (
            idx.iter().map(|&i| &patches[i]).collect(),
            idx.iter().map(|&i| labels[i]).collect(),
        )
    } else {
        (patches.iter().collect(), labels.to_vec())
    };
    let m = sub_patches.len();
    let mut counts = vec![0usize; k];
    for &l in &sub_labels {
        counts[l] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(StatsError::SingleCluster(1));
    }

    let scores: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| {
            let own = sub_labels[i];
            if counts[own] == 1 {
                return 0.0; // singleton: conventionally zero
            }
            let mut sums = vec![0.0f64; k];
            let xi = &sub_patches[i].values;
            for j in 0..m {
                if j == i {
                    continue;
                }
                let d: f64 = xi
                    .iter()
                    .zip(&sub_patches[j].values)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                sums[sub_labels[j]] += d;
            }
            let a = sums[own] / (counts[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own && counts[c] > 0)
                .map(|c| sums[c] / counts[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom == 0.0 {
                f64::NAN // undefined at this point
            } else {
                (b - a) / denom
            }
        })
        .collect();

    if scores.iter().all(|s| s.is_nan()) {
        return Err(StatsError::AllPointsIdentical);
    }
    let mean = scores
        .iter()
        .map(|s| if s.is_nan() { 0.0 } else { *s })
        .sum::<f64>()
        / m as f64;
    Ok(mean)
}

/// Top-2 principal component projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection2D {
    pub coordinates: Vec<[f64; 2]>,
    pub explained_variance_ratio: [f64; 2],
}

/// PCA via eigendecomposition of the sample covariance. Component signs are
/// fixed so each component's largest-magnitude loading is positive.
pub fn pca2(patches: &[Patch]) -> Result<Projection2D, StatsError> {
    let n = patches.len();
    if n < 3 {
        return Err(StatsError::TooFewPatches { got: n, needed: 3 });
    }
    let p = patches[0].len();
    if p < 2 {
        return Err(StatsError::PatchDimTooSmall(p));
    }

    let mut mean = vec![0.0f64; p];
    for patch in patches {
        for (m, &v) in mean.iter_mut().zip(&patch.values) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }

    // Per-chunk partial covariance sums merged in fixed chunk order.
    let partials: Vec<Vec<f64>> = patches
        .par_chunks(4096)
        .map(|chunk| {
            let mut acc = vec![0.0f64; p * p];
            let mut centered = vec![0.0f64; p];
            for patch in chunk {
                for ((c, &v), &m) in centered.iter_mut().zip(&patch.values).zip(&mean) {
                    *c = v - m;
                }
                for i in 0..p {
                    let ci = centered[i];
                    for j in i..p {
                        acc[i * p + j] += ci * centered[j];
                    }
                }
            }
            acc
        })
        .collect();
    let mut cov = vec![0.0f64; p * p];
    for partial in &partials {
        for (c, &v) in cov.iter_mut().zip(partial) {
            *c += v;
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..p {
        for j in i..p {
            let v = cov[i * p + j] / denom;
            cov[i * p + j] = v;
            cov[j * p + i] = v;
        }
    }

    let cov = DMatrix::from_row_slice(p, p, &cov);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|&l| l.max(0.0)).sum();
    if total <= f64::MIN_POSITIVE {
        return Err(StatsError::RankZeroData);
    }

    let mut components = [vec![0.0f64; p], vec![0.0f64; p]];
    let mut ratios = [0.0f64; 2];
    for (slot, &col) in order.iter().take(2).enumerate() {
        ratios[slot] = eig.eigenvalues[col].max(0.0) / total;
        let mut v: Vec<f64> = (0..p).map(|r| eig.eigenvectors[(r, col)]).collect();
        let lead = (0..p)
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()))
            .unwrap();
        if v[lead] < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
        components[slot] = v;
    }

    let coordinates: Vec<[f64; 2]> = patches
        .par_iter()
        .map(|patch| {
            let mut out = [0.0f64; 2];
            for (slot, comp) in components.iter().enumerate() {
                out[slot] = patch
                    .values
                    .iter()
                    .zip(&mean)
                    .zip(comp)
                    .map(|((&v, &m), &c)| (v - m) * c)
                    .sum();
            }
            out
        })
        .collect();

    Ok(Projection2D {
        coordinates,
        explained_variance_ratio: ratios,
    })
}
