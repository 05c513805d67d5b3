//! Information-bottleneck experiment: does patch quantization discard noise
//! (lower I(X; Z)) while keeping label information (I(Y; Z))?
//!
//! X = S + N with a level-template signal and i.i.d. Gaussian noise.
//! Z_point is a fine per-coordinate grid quantization of X; Z_patch is the
//! codebook token of X. Both encodings are deterministic in X, so
//! I(X; Z) = H(Z) and the plug-in entropy of Z estimates it.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::TheoryError;
use crate::patching::Patch;
use crate::quantizer::{assign_batch, fit, FitConfig};

/// Plug-in Shannon mutual information (bits) of an empirical joint table.
pub fn mi_plugin(joint: &[Vec<u64>]) -> Result<f64, TheoryError> {
    let total: u64 = joint.iter().flatten().sum();
    if total == 0 {
        return Err(TheoryError::EmptyTable);
    }
    let n_cols = joint.first().map_or(0, |r| r.len());
    if joint.iter().any(|r| r.len() != n_cols) {
        return Err(TheoryError::InvalidInput("ragged joint table".into()));
    }
    let n = total as f64;
    let row_sums: Vec<f64> = joint
        .iter()
        .map(|r| r.iter().sum::<u64>() as f64 / n)
        .collect();
    let mut col_sums = vec![0.0f64; n_cols];
    for row in joint {
        for (c, &v) in row.iter().enumerate() {
            col_sums[c] += v as f64 / n;
        }
    }
    let mut mi = 0.0f64;
    for (r, row) in joint.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if v > 0 {
                let p = v as f64 / n;
                mi += p * (p / (row_sums[r] * col_sums[c])).log2();
            }
        }
    }
    Ok(mi.max(0.0))
}

/// Plug-in entropy (bits) of a count vector.
pub(crate) fn plugin_entropy(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IbConfig {
    pub signal_levels: usize,
    pub noise_sigma: f64,
    pub n_samples: usize,
    pub patch_len: usize,
    pub k: usize,
    pub seed: u64,
    /// Per-coordinate grid resolution of the pointwise representation.
    pub point_grid_bins: usize,
    /// Shuffle Y after generating X, making the label independent of the data.
    pub shuffle_labels: bool,
}

impl Default for IbConfig {
    fn default() -> Self {
        Self {
            signal_levels: 4,
            noise_sigma: 0.5,
            n_samples: 50_000,
            patch_len: 16,
            k: 8,
            seed: 0,
            point_grid_bins: 64,
            shuffle_labels: false,
        }
    }
}

/// The four plug-in information quantities of the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IbResult {
    pub i_x_zpoint: f64,
    pub i_x_zpatch: f64,
    pub i_y_zpoint: f64,
    pub i_y_zpatch: f64,
}

impl IbResult {
    /// The direction the bottleneck argument predicts: compression improves
    /// while at least `retention` of the label information survives.
    pub fn direction_holds(&self, retention: f64) -> bool {
        self.i_x_zpatch < self.i_x_zpoint && self.i_y_zpatch >= retention * self.i_y_zpoint
    }
}

/// Draw labels Y uniform over the signal levels, set X to the level template
/// plus Gaussian noise, and compare the grid encoding against the codebook
/// token encoding.
pub fn ib_experiment(config: &IbConfig) -> Result<IbResult, TheoryError> {
    if config.signal_levels < 2 {
        return Err(TheoryError::InvalidInput(
            "need at least 2 signal levels".into(),
        ));
    }
    if config.k < config.signal_levels {
        return Err(TheoryError::DegenerateCodebook {
            k: config.k,
            signal_levels: config.signal_levels,
        });
    }
    if config.n_samples < 10 * config.k {
        return Err(TheoryError::InvalidInput(format!(
            "n_samples must be >= 10 K = {}, got {}",
            10 * config.k,
            config.n_samples
        )));
    }
    if config.patch_len < 1 || config.point_grid_bins < 2 {
        return Err(TheoryError::InvalidInput(
            "patch_len must be >= 1 and point_grid_bins >= 2".into(),
        ));
    }
    if config.noise_sigma.is_nan() || config.noise_sigma < 0.0 {
        return Err(TheoryError::InvalidInput("noise_sigma must be >= 0".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n_samples;
    let levels = config.signal_levels;
    let p = config.patch_len;

    let mut ys: Vec<usize> = (0..n).map(|_| rng.random_range(0..levels)).collect();
    let noise = if config.noise_sigma > 0.0 {
        Some(Normal::new(0.0, config.noise_sigma).map_err(|e| {
            TheoryError::InvalidInput(format!("noise sigma {}: {e}", config.noise_sigma))
        })?)
    } else {
        None
    };
    // Unit-spaced constant templates: level l has amplitude l.
    let xs: Vec<Vec<f64>> = ys
        .iter()
        .map(|&y| {
            (0..p)
                .map(|_| {
                    let s = y as f64;
                    match &noise {
                        Some(dist) => s + dist.sample(&mut rng),
                        None => s,
                    }
                })
                .collect()
        })
        .collect();
    if config.shuffle_labels {
        ys.shuffle(&mut rng);
    }

    // Z_patch: codebook token of the raw vector (no per-patch normalization
    // here; the encoding must keep the level information it is judged on).
    let patches: Vec<Patch> = xs
        .iter()
        .enumerate()
        .map(|(i, v)| Patch {
            values: v.clone(),
            series: 0,
            start: i,
            zero_variance: false,
        })
        .collect();
    let codebook = fit(&patches, config.k, &FitConfig::with_seed(config.seed))?;
    let tokens: Vec<usize> = assign_batch(&codebook, &patches)?
        .iter()
        .map(|a| a.token)
        .collect();

    // Z_point: per-coordinate uniform grid over the observed range.
    let bins = config.point_grid_bins;
    let mut lo = vec![f64::INFINITY; p];
    let mut hi = vec![f64::NEG_INFINITY; p];
    for x in &xs {
        for (j, &v) in x.iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    let mut point_ids: HashMap<Vec<u16>, usize> = HashMap::new();
    let zpoints: Vec<usize> = xs
        .iter()
        .map(|x| {
            let key: Vec<u16> = x
                .iter()
                .enumerate()
                .map(|(j, &v)| {
                    if hi[j] > lo[j] {
                        let t = (v - lo[j]) / (hi[j] - lo[j]);
                        ((t * bins as f64) as usize).min(bins - 1) as u16
                    } else {
                        0
                    }
                })
                .collect();
            let next = point_ids.len();
            *point_ids.entry(key).or_insert(next)
        })
        .collect();
    let n_zpoint = point_ids.len();

    // Deterministic encodings: I(X; Z) = H(Z).
    let mut zpoint_counts = vec![0u64; n_zpoint];
    for &z in &zpoints {
        zpoint_counts[z] += 1;
    }
    let mut token_counts = vec![0u64; config.k];
    for &t in &tokens {
        token_counts[t] += 1;
    }
    let i_x_zpoint = plugin_entropy(&zpoint_counts);
    let i_x_zpatch = plugin_entropy(&token_counts);

    let mut joint_point = vec![vec![0u64; n_zpoint]; levels];
    let mut joint_patch = vec![vec![0u64; config.k]; levels];
    for ((&y, &z), &t) in ys.iter().zip(&zpoints).zip(&tokens) {
        joint_point[y][z] += 1;
        joint_patch[y][t] += 1;
    }
    let i_y_zpoint = mi_plugin(&joint_point)?;
    let i_y_zpatch = mi_plugin(&joint_patch)?;

    Ok(IbResult {
        i_x_zpoint,
        i_x_zpatch,
        i_y_zpoint,
        i_y_zpatch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mi_product_form_is_zero() {
        // counts r_i * c_j factorize exactly.
        let joint = vec![vec![1, 2], vec![2, 4]];
        assert_eq!(mi_plugin(&joint).unwrap(), 0.0);
    }

    #[test]
    fn mi_perfect_correlation_is_one_bit() {
        let joint = vec![vec![50, 0], vec![0, 50]];
        assert!((mi_plugin(&joint).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mi_hand_case() {
        let joint = vec![vec![40, 10], vec![10, 40]];
        let expected = 0.278_071_905_112_637_7; // 0.8 log2(1.6) + 0.2 log2(0.4)
        assert!((mi_plugin(&joint).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn mi_empty_table_rejected() {
        assert!(matches!(
            mi_plugin(&[vec![0, 0], vec![0, 0]]).unwrap_err(),
            TheoryError::EmptyTable
        ));
    }

    #[test]
    fn noiseless_levels_separate_perfectly() {
        let config = IbConfig {
            signal_levels: 4,
            noise_sigma: 0.0,
            n_samples: 2_000,
            patch_len: 8,
            k: 4,
            seed: 1,
            ..IbConfig::default()
        };
        let result = ib_experiment(&config).unwrap();
        // Tokens separate levels exactly, so I(Y; Z_patch) equals the plug-in
        // label entropy, which sits at log2(levels) up to sampling wobble.
        assert!((result.i_y_zpatch - 2.0).abs() < 0.01, "{result:?}");
        assert!((result.i_y_zpoint - result.i_y_zpatch).abs() < 1e-9);
    }

    #[test]
    fn shuffled_labels_carry_no_information() {
        let config = IbConfig {
            n_samples: 50_000,
            shuffle_labels: true,
            seed: 2,
            ..IbConfig::default()
        };
        let result = ib_experiment(&config).unwrap();
        assert!(result.i_y_zpatch <= 0.02, "{result:?}");
    }

    #[test]
    fn direction_holds_at_reference_config() {
        let result = ib_experiment(&IbConfig {
            seed: 3,
            ..IbConfig::default()
        })
        .unwrap();
        assert!(
            result.direction_holds(0.9),
            "compression/prediction direction failed: {result:?}"
        );
        assert!(result.i_x_zpatch <= (8f64).log2() + 1e-9);
    }

    #[test]
    fn degenerate_codebook_rejected() {
        let config = IbConfig {
            signal_levels: 8,
            k: 4,
            ..IbConfig::default()
        };
        assert!(matches!(
            ib_experiment(&config).unwrap_err(),
            TheoryError::DegenerateCodebook { .. }
        ));
    }
}
