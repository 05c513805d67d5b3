//! K-centroid codebook learning and nearest-centroid assignment.
//!
//! Seeding is k-means++ (D-squared weighting). Training uses mini-batch
//! updates with per-center count learning rates; when the batch size covers
//! the whole pool the update degenerates to full-batch Lloyd iterations.
//! Everything is bit-deterministic given (patches, K, config), regardless of
//! thread count: parallel passes only fill per-point slots, and every
//! reduction runs in fixed order.

use std::collections::HashSet;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::patching::Patch;

#[derive(Debug, Error)]
pub enum QuantizerError {
    #[error("K must be >= 1, got {0}")]
    InvalidK(usize),
    #[error("cannot fit a codebook on an empty patch list")]
    NoPatches,
    #[error("invalid fit config: {0}")]
    InvalidConfig(String),
    #[error("patch has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("only {distinct} distinct patches available for K = {k}")]
    FewerDistinctPatches { distinct: usize, k: usize },
    #[error("centroids {a} and {b} are identical")]
    IdenticalCentroids { a: usize, b: usize },
    #[error("centroid {row} contains a non-finite value")]
    NonFiniteCentroid { row: usize },
    #[error("need at least 2 centroids, codebook has {k}")]
    TooFewCentroids { k: usize },
    #[error("codebook file version {got} is not supported (expected {expected})")]
    UnsupportedVersion { got: u32, expected: u32 },
    #[error("codebook io: {0}")]
    Io(#[from] std::io::Error),
    #[error("codebook json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Learned codebook: K centroids of dimension P plus training metadata.
///
/// Serialized as versioned JSON with row-major centroid arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub version: u32,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "P")]
    pub p: usize,
    pub seed: u64,
    pub centroids: Vec<Vec<f64>>,
    pub iterations_run: usize,
    pub final_shift: f64,
}

impl Codebook {
    pub const FORMAT_VERSION: u32 = 1;

    pub fn build(
        centroids: Vec<Vec<f64>>,
        seed: u64,
        iterations_run: usize,
        final_shift: f64,
    ) -> Result<Self, QuantizerError> {
        let k = centroids.len();
        if k < 1 {
            return Err(QuantizerError::InvalidK(0));
        }
        let p = centroids[0].len();
        let codebook = Self {
            version: Self::FORMAT_VERSION,
            k,
            p,
            seed,
            centroids,
            iterations_run,
            final_shift,
        };
        codebook.validate()?;
        Ok(codebook)
    }

    pub fn validate(&self) -> Result<(), QuantizerError> {
        if self.version != Self::FORMAT_VERSION {
            return Err(QuantizerError::UnsupportedVersion {
                got: self.version,
                expected: Self::FORMAT_VERSION,
            });
        }
        if self.k != self.centroids.len() || self.k < 1 {
            return Err(QuantizerError::InvalidK(self.centroids.len()));
        }
        for (row, c) in self.centroids.iter().enumerate() {
            if c.len() != self.p {
                return Err(QuantizerError::DimensionMismatch {
                    expected: self.p,
                    got: c.len(),
                });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(QuantizerError::NonFiniteCentroid { row });
            }
        }
        for a in 0..self.k {
            for b in (a + 1)..self.k {
                if dist2(&self.centroids[a], &self.centroids[b]) == 0.0 {
                    return Err(QuantizerError::IdenticalCentroids { a, b });
                }
            }
        }
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<(), QuantizerError> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self, QuantizerError> {
        let raw = std::fs::read_to_string(path)?;
        let codebook: Self = serde_json::from_str(&raw)?;
        codebook.validate()?;
        Ok(codebook)
    }
}

/// Nearest-centroid result: token id and its L2 distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub token: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub batch_size: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            batch_size: 1024,
            max_iters: 200,
            tol: 1e-4,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

#[inline]
fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Lowest-index nearest centroid and its squared distance.
fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = 0usize;
    let mut best_d2 = f64::INFINITY;
    for (c, cent) in centroids.iter().enumerate() {
        let d = dist2(cent, x);
        if d < best_d2 {
            best_d2 = d;
            best = c;
        }
    }
    (best, best_d2)
}

fn check_dims(patches: &[Patch]) -> Result<usize, QuantizerError> {
    let Some(first) = patches.first() else {
        return Err(QuantizerError::NoPatches);
    };
    let dim = first.len();
    for p in patches {
        if p.len() != dim {
            return Err(QuantizerError::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
    }
    Ok(dim)
}

/// Require at least `k` distinct patch vectors, scanning only until satisfied.
fn check_distinct(patches: &[Patch], k: usize) -> Result<(), QuantizerError> {
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    for p in patches {
        if seen.len() >= k {
            return Ok(());
        }
        seen.insert(p.values.iter().map(|v| v.to_bits()).collect());
    }
    if seen.len() >= k {
        Ok(())
    } else {
        Err(QuantizerError::FewerDistinctPatches {
            distinct: seen.len(),
            k,
        })
    }
}

/// k-means++ seeding: D-squared weighted draws, deterministic given the seed.
pub fn kmeanspp_init(
    patches: &[Patch],
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, QuantizerError> {
    if k < 1 {
        return Err(QuantizerError::InvalidK(k));
    }
    check_dims(patches)?;
    check_distinct(patches, k)?;

    let n = patches.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.random_range(0..n);
    let mut centers: Vec<Vec<f64>> = vec![patches[first].values.clone()];
    let mut d2 = vec![f64::INFINITY; n];

    while centers.len() < k {
        let last = centers.last().unwrap();
        d2.par_iter_mut()
            .zip(patches.par_iter())
            .for_each(|(d, p)| {
                let nd = dist2(last, &p.values);
                if nd < *d {
                    *d = nd;
                }
            });
        let total: f64 = d2.iter().sum();
        // total > 0: fewer centers than distinct points leaves some d2 positive
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        for (i, &w) in d2.iter().enumerate() {
            acc += w;
            if acc >= u && w > 0.0 {
                chosen = Some(i);
                break;
            }
        }
        let chosen =
            chosen.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("positive weight"));
        centers.push(patches[chosen].values.clone());
    }
    Ok(centers)
}

/// Per-point nearest-centroid pass; order-preserving, so thread-count neutral.
fn assign_all(centroids: &[Vec<f64>], patches: &[Patch]) -> Vec<(usize, f64)> {
    patches
        .par_iter()
        .map(|p| nearest(centroids, &p.values))
        .collect()
}

/// Reseed empty clusters to the globally worst-fit point until every cluster
/// holds at least one training patch.
fn repair_empty_clusters(centroids: &mut [Vec<f64>], patches: &[Patch]) {
    for _ in 0..centroids.len() {
        let assignments = assign_all(centroids, patches);
        let mut counts = vec![0u64; centroids.len()];
        for &(c, _) in &assignments {
            counts[c] += 1;
        }
        let empties: Vec<usize> = (0..centroids.len()).filter(|&c| counts[c] == 0).collect();
        if empties.is_empty() {
            return;
        }
        // Rank points by how badly they fit; hand the worst to the empty slots.
        let mut order: Vec<usize> = (0..patches.len()).collect();
        order.sort_by(|&a, &b| assignments[b].1.total_cmp(&assignments[a].1));
        let mut filled = false;
        for (slot, &point) in empties.iter().zip(order.iter()) {
            if assignments[point].1 == 0.0 {
                break;
            }
            centroids[*slot] = patches[point].values.clone();
            filled = true;
        }
        if !filled {
            return;
        }
    }
}

/// Learn a K-centroid codebook.
///
/// With `batch_size >= patches.len()` every iteration is a full Lloyd step
/// (assignment plus exact mean update); otherwise each iteration samples one
/// mini-batch and moves each sampled point's center by a 1/count learning
/// rate. Training stops after `max_iters` iterations or when the largest
/// centroid movement in an iteration drops below `tol`.
pub fn fit(patches: &[Patch], k: usize, config: &FitConfig) -> Result<Codebook, QuantizerError> {
    if config.batch_size < 1 {
        return Err(QuantizerError::InvalidConfig(
            "batch_size must be >= 1".into(),
        ));
    }
    if config.max_iters < 1 {
        return Err(QuantizerError::InvalidConfig(
            "max_iters must be >= 1".into(),
        ));
    }
    if config.tol.is_nan() || config.tol < 0.0 {
        return Err(QuantizerError::InvalidConfig("tol must be >= 0".into()));
    }
    let dim = check_dims(patches)?;
    let mut centroids = kmeanspp_init(patches, k, config.seed)?;
    let n = patches.len();

    let mut iterations_run = 0usize;
    let mut final_shift = 0.0f64;

    if config.batch_size >= n {
        for iter in 1..=config.max_iters {
            let assignments = assign_all(&centroids, patches);
            let mut sums = vec![vec![0.0f64; dim]; k];
            let mut counts = vec![0u64; k];
            for (p, &(c, _)) in patches.iter().zip(&assignments) {
                counts[c] += 1;
                for (s, &v) in sums[c].iter_mut().zip(&p.values) {
                    *s += v;
                }
            }
            let mut new_centroids = centroids.clone();
            for c in 0..k {
                if counts[c] > 0 {
                    for (nc, s) in new_centroids[c].iter_mut().zip(&sums[c]) {
                        *nc = s / counts[c] as f64;
                    }
                }
            }
            if counts.contains(&0) {
                // Worst-fit points (relative to the pre-update centroids) take
                // over the empty slots.
                let empties: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| assignments[b].1.total_cmp(&assignments[a].1));
                for (slot, &point) in empties.iter().zip(order.iter()) {
                    if assignments[point].1 == 0.0 {
                        break;
                    }
                    new_centroids[*slot] = patches[point].values.clone();
                }
            }
            let shift = centroids
                .iter()
                .zip(&new_centroids)
                .map(|(a, b)| dist2(a, b).sqrt())
                .fold(0.0f64, f64::max);
            centroids = new_centroids;
            iterations_run = iter;
            final_shift = shift;
            if shift < config.tol {
                break;
            }
        }
    } else {
        // Separate stream from the seeding draws.
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut counts = vec![0u64; k];
        for iter in 1..=config.max_iters {
            let batch: Vec<usize> = (0..config.batch_size)
                .map(|_| rng.random_range(0..n))
                .collect();
            let snapshot = centroids.clone();
            let cached: Vec<usize> = batch
                .par_iter()
                .map(|&i| nearest(&snapshot, &patches[i].values).0)
                .collect();
            for (&i, &c) in batch.iter().zip(&cached) {
                counts[c] += 1;
                let eta = 1.0 / counts[c] as f64;
                for (cd, &xv) in centroids[c].iter_mut().zip(&patches[i].values) {
                    *cd += eta * (xv - *cd);
                }
            }
            let shift = snapshot
                .iter()
                .zip(&centroids)
                .map(|(a, b)| dist2(a, b).sqrt())
                .fold(0.0f64, f64::max);
            iterations_run = iter;
            final_shift = shift;
            if shift < config.tol {
                break;
            }
        }
    }

    repair_empty_clusters(&mut centroids, patches);
    Codebook::build(centroids, config.seed, iterations_run, final_shift)
}

/// Map a patch to its nearest centroid. Ties break toward the lowest index.
pub fn assign(codebook: &Codebook, patch: &Patch) -> Result<Assignment, QuantizerError> {
    if patch.len() != codebook.p {
        return Err(QuantizerError::DimensionMismatch {
            expected: codebook.p,
            got: patch.len(),
        });
    }
    let (token, d2) = nearest(&codebook.centroids, &patch.values);
    Ok(Assignment {
        token,
        distance: d2.sqrt(),
    })
}

/// Assign every patch, in order.
pub fn assign_batch(
    codebook: &Codebook,
    patches: &[Patch],
) -> Result<Vec<Assignment>, QuantizerError> {
    for p in patches {
        if p.len() != codebook.p {
            return Err(QuantizerError::DimensionMismatch {
                expected: codebook.p,
                got: p.len(),
            });
        }
    }
    Ok(patches
        .par_iter()
        .map(|p| {
            let (token, d2) = nearest(&codebook.centroids, &p.values);
            Assignment {
                token,
                distance: d2.sqrt(),
            }
        })
        .collect())
}

/// Per-cluster sum of squared distances from assigned patches to their centroid.
pub fn wcss(codebook: &Codebook, patches: &[Patch]) -> Result<Vec<f64>, QuantizerError> {
    let assignments = assign_batch(codebook, patches)?;
    let mut out = vec![0.0f64; codebook.k];
    for a in &assignments {
        out[a.token] += a.distance * a.distance;
    }
    Ok(out)
}

/// All pairwise centroid L2 distances, ascending. Length K(K-1)/2.
pub fn inter_centroid_distances(codebook: &Codebook) -> Result<Vec<f64>, QuantizerError> {
    if codebook.k < 2 {
        return Err(QuantizerError::TooFewCentroids { k: codebook.k });
    }
    let mut out = Vec::with_capacity(codebook.k * (codebook.k - 1) / 2);
    for a in 0..codebook.k {
        for b in (a + 1)..codebook.k {
            out.push(dist2(&codebook.centroids[a], &codebook.centroids[b]).sqrt());
        }
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Largest assignment distance over a patch set: the empirical covering
/// radius of the codebook, comparable against a target epsilon.
pub fn quantization_radius(codebook: &Codebook, patches: &[Patch]) -> Result<f64, QuantizerError> {
    let assignments = assign_batch(codebook, patches)?;
    Ok(assignments
        .iter()
        .map(|a| a.distance)
        .fold(0.0f64, f64::max))
}
