//! Token sequences as a language: transition structure, n-gram coverage,
//! per-sequence entropy and complexity.
//!
//! Consecutive-pair statistics never cross a sequence boundary; a series
//! boundary is a hard stop.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ChannelSeries;
use crate::patching::{extract_normalized, PatchConfig, PatchError};
use crate::quantizer::{assign_batch, Codebook, QuantizerError};

#[derive(Debug, Error)]
pub enum GrammarError {
    #[error(transparent)]
    Patch(#[from] PatchError),
    #[error(transparent)]
    Quantizer(#[from] QuantizerError),
    #[error("token {token} out of range for K = {k}")]
    TokenOutOfRange { token: usize, k: usize },
    #[error("no consecutive token pairs available")]
    NoPairs,
    #[error("n must be >= 1")]
    InvalidN,
    #[error("every sequence is shorter than n = {n}")]
    AllSequencesTooShort { n: usize },
    #[error("K^n = {k}^{n} overflows the possible-gram counter")]
    PossibleOverflow { k: usize, n: usize },
    #[error("empty token sequence")]
    EmptySequence,
}

/// The symbolic form of one series under a fixed codebook and patch config.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub series_id: String,
    pub tokens: Vec<usize>,
}

/// Patch, z-normalize, and assign, in order.
pub fn tokenize_series(
    series: &ChannelSeries,
    codebook: &Codebook,
    config: &PatchConfig,
) -> Result<TokenSequence, GrammarError> {
    let patches = extract_normalized(series, 0, config)?;
    let assignments = assign_batch(codebook, &patches)?;
    Ok(TokenSequence {
        series_id: series.id(),
        tokens: assignments.iter().map(|a| a.token).collect(),
    })
}

/// Row-stochastic transition estimates with their supporting pair counts.
/// Rows without support stay all-zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    probs: Vec<Vec<f64>>,
    support_counts: Vec<Vec<u64>>,
}

impl TransitionMatrix {
    pub fn k(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn support_counts(&self) -> &[Vec<u64>] {
        &self.support_counts
    }

    pub fn total_pairs(&self) -> u64 {
        self.support_counts.iter().flatten().sum()
    }
}

/// Pool consecutive-pair counts across sequences (never across a boundary)
/// and row-normalize.
pub fn transition_matrix(
    sequences: &[TokenSequence],
    k: usize,
) -> Result<TransitionMatrix, GrammarError> {
    let mut counts = vec![vec![0u64; k]; k];
    for seq in sequences {
        for &t in &seq.tokens {
            if t >= k {
                return Err(GrammarError::TokenOutOfRange { token: t, k });
            }
        }
        for w in seq.tokens.windows(2) {
            counts[w[0]][w[1]] += 1;
        }
    }
    if counts.iter().flatten().all(|&c| c == 0) {
        return Err(GrammarError::NoPairs);
    }
    let probs = counts
        .iter()
        .map(|row| {
            let sum: u64 = row.iter().sum();
            if sum == 0 {
                vec![0.0; k]
            } else {
                row.iter().map(|&c| c as f64 / sum as f64).collect()
            }
        })
        .collect();
    Ok(TransitionMatrix {
        probs,
        support_counts: counts,
    })
}

/// Count-weighted diagonal mass: the fraction of all observed transitions
/// that stay in the same state.
pub fn self_transition_mass(tm: &TransitionMatrix) -> f64 {
    let total: u64 = tm.support_counts.iter().flatten().sum();
    let diag: u64 = (0..tm.k()).map(|i| tm.support_counts[i][i]).sum();
    diag as f64 / total as f64
}

/// Unique n-gram coverage against the K^n possibilities, plus the most
/// frequent n-grams (ties break lexicographically).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NGramStats {
    pub n: usize,
    pub observed_unique: u64,
    pub possible: u64,
    pub coverage: f64,
    pub top: Vec<(Vec<usize>, u64)>,
}

pub fn ngram_stats(
    sequences: &[TokenSequence],
    k: usize,
    n: usize,
    top_m: usize,
) -> Result<NGramStats, GrammarError> {
    if n < 1 {
        return Err(GrammarError::InvalidN);
    }
    let mut grams: HashMap<Vec<usize>, u64> = HashMap::new();
    for seq in sequences {
        for &t in &seq.tokens {
            if t >= k {
                return Err(GrammarError::TokenOutOfRange { token: t, k });
            }
        }
        if seq.tokens.len() < n {
            continue;
        }
        for w in seq.tokens.windows(n) {
            *grams.entry(w.to_vec()).or_insert(0) += 1;
        }
    }
    if grams.is_empty() {
        return Err(GrammarError::AllSequencesTooShort { n });
    }
    let observed_unique = grams.len() as u64;
    let possible = (k as u64)
        .checked_pow(n as u32)
        .ok_or(GrammarError::PossibleOverflow { k, n })?;
    let coverage = observed_unique as f64 / possible as f64;
    let mut top: Vec<(Vec<usize>, u64)> = grams.into_iter().collect();
    top.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    top.truncate(top_m);
    Ok(NGramStats {
        n,
        observed_unique,
        possible,
        coverage,
        top,
    })
}

/// Shannon entropy (base 2) of the sequence's own unigram distribution.
pub fn sequence_entropy(seq: &TokenSequence) -> Result<f64, GrammarError> {
    if seq.tokens.is_empty() {
        return Err(GrammarError::EmptySequence);
    }
    // Ordered map: the float accumulation order must not vary run to run.
    let mut tally: BTreeMap<usize, u64> = BTreeMap::new();
    for &t in &seq.tokens {
        *tally.entry(t).or_insert(0) += 1;
    }
    let n = seq.tokens.len() as f64;
    let h = tally
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>();
    Ok(h.max(0.0))
}

/// LZ76 exhaustive-history phrase count (Kaspar-Schuster scan).
pub fn lz76_phrase_count(tokens: &[usize]) -> usize {
    let n = tokens.len();
    if n == 0 {
        return 0;
    }
    if n == 1 {
        return 1;
    }
    let mut c = 1usize;
    let mut l = 1usize;
    let mut i = 0usize;
    let mut k = 1usize;
    let mut k_max = 1usize;
    loop {
        if tokens[i + k - 1] != tokens[l + k - 1] {
            if k > k_max {
                k_max = k;
            }
            i += 1;
            if i == l {
                c += 1;
                l += k_max;
                if l + 1 > n {
                    break;
                }
                i = 0;
                k = 1;
                k_max = 1;
            } else {
                k = 1;
            }
        } else {
            k += 1;
            if l + k > n {
                c += 1;
                break;
            }
        }
    }
    c
}

/// LZ76 phrase count, normalized by the random-sequence rate n / log_K(n)
/// when n > K; shorter sequences report the raw count.
pub fn lz_complexity(seq: &TokenSequence, k: usize) -> Result<f64, GrammarError> {
    if seq.tokens.is_empty() {
        return Err(GrammarError::EmptySequence);
    }
    let n = seq.tokens.len();
    let c = lz76_phrase_count(&seq.tokens) as f64;
    if n > k && k >= 2 {
        let log_k_n = (n as f64).ln() / (k as f64).ln();
        Ok(c * log_k_n / n as f64)
    } else {
        Ok(c)
    }
}

/// Per-sequence summary row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceFeatures {
    pub series_id: String,
    pub entropy_bits: f64,
    pub complexity: f64,
    pub unique_tokens: usize,
}

pub fn sequence_features(seq: &TokenSequence, k: usize) -> Result<SequenceFeatures, GrammarError> {
    let entropy_bits = sequence_entropy(seq)?;
    let complexity = lz_complexity(seq, k)?;
    let mut seen: Vec<bool> = vec![false; k];
    for &t in &seq.tokens {
        if t >= k {
            return Err(GrammarError::TokenOutOfRange { token: t, k });
        }
        seen[t] = true;
    }
    Ok(SequenceFeatures {
        series_id: seq.series_id.clone(),
        entropy_bits,
        complexity,
        unique_tokens: seen.iter().filter(|&&s| s).count(),
    })
}
