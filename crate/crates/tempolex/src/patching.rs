//! Fixed-length patch extraction and per-patch z-normalization.
//!
//! A series of length L yields floor((L - P) / S) + 1 patches; patch m covers
//! indices [mS, mS + P). Normalization uses the population standard deviation
//! so that every non-degenerate normalized patch has L2 norm exactly sqrt(P).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ChannelSeries;

/// Patches with population std below this are flattened to the zero vector.
pub const ZERO_VARIANCE_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum PatchError {
    #[error("patch length must be >= 1, got {0}")]
    InvalidPatchLen(usize),
    #[error("stride must be >= 1, got {0}")]
    InvalidStride(usize),
    #[error("series {id} has length {len}, shorter than patch length {patch_len}")]
    SeriesTooShort {
        id: String,
        len: usize,
        patch_len: usize,
    },
}

/// Patch length P and stride S.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchConfig {
    pub patch_len: usize,
    pub stride: usize,
}

impl PatchConfig {
    pub fn new(patch_len: usize, stride: usize) -> Result<Self, PatchError> {
        if patch_len < 1 {
            return Err(PatchError::InvalidPatchLen(patch_len));
        }
        if stride < 1 {
            return Err(PatchError::InvalidStride(stride));
        }
        Ok(Self { patch_len, stride })
    }

    /// Non-overlapping windows: stride equals patch length.
    pub fn non_overlapping(patch_len: usize) -> Result<Self, PatchError> {
        Self::new(patch_len, patch_len)
    }

    /// Number of patches a series of length `len` yields, if any.
    pub fn patch_count(&self, len: usize) -> Option<usize> {
        if len < self.patch_len {
            None
        } else {
            Some((len - self.patch_len) / self.stride + 1)
        }
    }
}

impl Default for PatchConfig {
    fn default() -> Self {
        Self {
            patch_len: 16,
            stride: 16,
        }
    }
}

/// A length-P window of a series, identified by source series index and start offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub values: Vec<f64>,
    pub series: u32,
    pub start: usize,
    pub zero_variance: bool,
}

impl Patch {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Slice a series into raw (un-normalized) patches.
pub fn extract_patches(
    series: &ChannelSeries,
    series_index: u32,
    config: &PatchConfig,
) -> Result<Vec<Patch>, PatchError> {
    let len = series.len();
    let Some(count) = config.patch_count(len) else {
        return Err(PatchError::SeriesTooShort {
            id: series.id(),
            len,
            patch_len: config.patch_len,
        });
    };
    let mut patches = Vec::with_capacity(count);
    for m in 0..count {
        let start = m * config.stride;
        patches.push(Patch {
            values: series.values[start..start + config.patch_len].to_vec(),
            series: series_index,
            start,
            zero_variance: false,
        });
    }
    Ok(patches)
}

/// Z-normalize to mean 0, population std 1. Constant patches become the zero
/// vector with `zero_variance` set; they quantize like any other patch.
pub fn znormalize(patch: &Patch) -> Patch {
    let n = patch.values.len() as f64;
    let mean = patch.values.iter().sum::<f64>() / n;
    let var = patch
        .values
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n;
    let std = var.sqrt();
    if std < ZERO_VARIANCE_EPS {
        return Patch {
            values: vec![0.0; patch.values.len()],
            series: patch.series,
            start: patch.start,
            zero_variance: true,
        };
    }
    Patch {
        values: patch.values.iter().map(|v| (v - mean) / std).collect(),
        series: patch.series,
        start: patch.start,
        zero_variance: false,
    }
}

/// Extract and z-normalize in one pass.
pub fn extract_normalized(
    series: &ChannelSeries,
    series_index: u32,
    config: &PatchConfig,
) -> Result<Vec<Patch>, PatchError> {
    let mut patches = extract_patches(series, series_index, config)?;
    for p in &mut patches {
        *p = znormalize(p);
    }
    Ok(patches)
}
