//! Beta-mixing coefficients: exact values for finite Markov chains, plug-in
//! lower-bound estimates for token streams, and the patch-tokenization
//! preservation experiment.
//!
//! For a stationary finite chain, beta(k) is the stationary-weighted total
//! variation between the k-step transition rows and the stationary law. The
//! empirical side estimates the TV between the lag-k pair distribution and
//! the product of its marginals, which lower-bounds the sequence's true
//! beta coefficient, so a violated preservation inequality is a genuine
//! falsification while satisfaction is supporting evidence.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::TheoryError;
use crate::corpus::ChannelSeries;
use crate::patching::{extract_normalized, PatchConfig};
use crate::quantizer::{assign_batch, fit, FitConfig};

const ROW_SUM_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-9;

/// A stationary finite-state Markov chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovSource {
    transition: Vec<Vec<f64>>,
    stationary: Vec<f64>,
}

impl MarkovSource {
    /// Validate row stochasticity and stationarity of the supplied vector.
    pub fn new(transition: Vec<Vec<f64>>, stationary: Vec<f64>) -> Result<Self, TheoryError> {
        let m = transition.len();
        if m == 0 || stationary.len() != m {
            return Err(TheoryError::NotStochastic(
                "transition matrix and stationary vector sizes disagree".into(),
            ));
        }
        for (i, row) in transition.iter().enumerate() {
            if row.len() != m {
                return Err(TheoryError::NotStochastic(format!(
                    "row {i} has wrong length"
                )));
            }
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(TheoryError::NotStochastic(format!(
                    "row {i} has entries outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(TheoryError::NotStochastic(format!(
                    "row {i} sums to {sum}, not 1"
                )));
            }
        }
        let total: f64 = stationary.iter().sum();
        if stationary.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > STATIONARY_TOL {
            return Err(TheoryError::NotStochastic(
                "stationary vector is not a probability distribution".into(),
            ));
        }
        for j in 0..m {
            let propagated: f64 = (0..m).map(|i| stationary[i] * transition[i][j]).sum();
            if (propagated - stationary[j]).abs() > STATIONARY_TOL {
                return Err(TheoryError::NotStochastic(format!(
                    "stationary check failed at state {j}: {propagated} vs {}",
                    stationary[j]
                )));
            }
        }
        Ok(Self {
            transition,
            stationary,
        })
    }

    /// Solve for the stationary distribution of an ergodic chain.
    pub fn from_transition(transition: Vec<Vec<f64>>) -> Result<Self, TheoryError> {
        let m = transition.len();
        if m == 0 {
            return Err(TheoryError::NotStochastic("empty transition matrix".into()));
        }
        // (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1.
        let mut a = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                a[(i, j)] = transition[j][i] - if i == j { 1.0 } else { 0.0 };
            }
        }
        for j in 0..m {
            a[(m - 1, j)] = 1.0;
        }
        let mut b = DVector::<f64>::zeros(m);
        b[m - 1] = 1.0;
        let pi = a.lu().solve(&b).ok_or(TheoryError::SingularChain)?;
        Self::new(transition, pi.iter().copied().collect())
    }

    /// Two states, each staying put with probability `stay`.
    pub fn two_state_sticky(stay: f64) -> Result<Self, TheoryError> {
        if !(0.0..=1.0).contains(&stay) {
            return Err(TheoryError::InvalidInput(format!(
                "stay probability {stay} outside [0, 1]"
            )));
        }
        Self::new(
            vec![vec![stay, 1.0 - stay], vec![1.0 - stay, stay]],
            vec![0.5, 0.5],
        )
    }

    pub fn n_states(&self) -> usize {
        self.transition.len()
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// Sample a stationary realization: the initial state is drawn from the
    /// stationary law, then the chain steps forward.
    pub fn sample_states(&self, n: usize, seed: u64) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = |dist: &[f64], rng: &mut ChaCha8Rng| -> usize {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (s, &p) in dist.iter().enumerate() {
                acc += p;
                if u < acc {
                    return s;
                }
            }
            dist.len() - 1
        };
        let mut out = Vec::with_capacity(n);
        if n == 0 {
            return out;
        }
        let mut state = draw(&self.stationary, &mut rng);
        out.push(state);
        for _ in 1..n {
            state = draw(&self.transition[state], &mut rng);
            out.push(state);
        }
        out
    }
}

/// Exact beta(k) of a stationary finite chain:
/// sum_i pi_i * TV(P^k(i, .), pi).
pub fn markov_beta_exact(source: &MarkovSource, k: usize) -> Result<f64, TheoryError> {
    if k < 1 {
        return Err(TheoryError::InvalidInput("lag k must be >= 1".into()));
    }
    let m = source.n_states();
    let p = DMatrix::from_fn(m, m, |i, j| source.transition[i][j]);
    let pk = matrix_power(&p, k);
    let beta = (0..m)
        .map(|i| {
            let tv: f64 = (0..m)
                .map(|j| (pk[(i, j)] - source.stationary[j]).abs())
                .sum::<f64>()
                / 2.0;
            source.stationary[i] * tv
        })
        .sum();
    Ok(beta)
}

fn matrix_power(p: &DMatrix<f64>, mut k: usize) -> DMatrix<f64> {
    let m = p.nrows();
    let mut result = DMatrix::<f64>::identity(m, m);
    let mut base = p.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        base = &base * &base;
        k >>= 1;
    }
    result
}

/// Lag-k block pairs of a token stream, encoded as integers.
///
/// A block of `order` consecutive symbols ending at position e pairs with the
/// block starting at e + k. With `order` = 1 this is simply (t[i], t[i + k]).
fn block_pairs(
    tokens: &[usize],
    k: usize,
    order: usize,
) -> Result<(Vec<(u64, u64)>, u64), TheoryError> {
    if k < 1 || order < 1 {
        return Err(TheoryError::InvalidInput(
            "lag k and block order must be >= 1".into(),
        ));
    }
    let n = tokens.len();
    let span = 2 * order + k - 1;
    if n < span + 1 {
        return Err(TheoryError::InsufficientSample {
            pairs: 0,
            needed: 1,
        });
    }
    let alphabet = tokens.iter().max().map_or(0, |&t| t as u64 + 1);
    let mut code_bound = 1u64;
    for _ in 0..order {
        code_bound = code_bound
            .checked_mul(alphabet)
            .ok_or_else(|| TheoryError::InvalidInput("block code overflows u64".into()))?;
    }
    let encode = |start: usize| -> u64 {
        let mut code = 0u64;
        for j in 0..order {
            code = code * alphabet + tokens[start + j] as u64;
        }
        code
    };
    let n_pairs = n - span;
    let mut pairs = Vec::with_capacity(n_pairs);
    for i in 0..n_pairs {
        pairs.push((encode(i), encode(i + order - 1 + k)));
    }
    Ok((pairs, code_bound))
}

/// Plug-in TV between the pair distribution and the product of its marginals.
fn tv_from_pairs(pairs: &[(u64, u64)], code_bound: u64) -> f64 {
    let n = pairs.len() as f64;
    if code_bound > 0 && code_bound <= 256 {
        let a = code_bound as usize;
        let mut joint = vec![0u64; a * a];
        let mut px = vec![0u64; a];
        let mut py = vec![0u64; a];
        for &(x, y) in pairs {
            joint[x as usize * a + y as usize] += 1;
            px[x as usize] += 1;
            py[y as usize] += 1;
        }
        let mut observed_abs = 0.0f64;
        let mut observed_prod = 0.0f64;
        for x in 0..a {
            for y in 0..a {
                let pj = joint[x * a + y] as f64 / n;
                if pj > 0.0 {
                    let prod = (px[x] as f64 / n) * (py[y] as f64 / n);
                    observed_abs += (pj - prod).abs();
                    observed_prod += prod;
                }
            }
        }
        return 0.5 * (observed_abs + 1.0 - observed_prod);
    }
    // Ordered maps keep the float accumulation order reproducible.
    let mut joint: BTreeMap<(u64, u64), u64> = BTreeMap::new();
    let mut px: BTreeMap<u64, u64> = BTreeMap::new();
    let mut py: BTreeMap<u64, u64> = BTreeMap::new();
    for &(x, y) in pairs {
        *joint.entry((x, y)).or_insert(0) += 1;
        *px.entry(x).or_insert(0) += 1;
        *py.entry(y).or_insert(0) += 1;
    }
    let mut observed_abs = 0.0f64;
    let mut observed_prod = 0.0f64;
    for (&(x, y), &c) in &joint {
        let pj = c as f64 / n;
        let prod = (px[&x] as f64 / n) * (py[&y] as f64 / n);
        observed_abs += (pj - prod).abs();
        observed_prod += prod;
    }
    0.5 * (observed_abs + 1.0 - observed_prod)
}

fn distinct_sides(pairs: &[(u64, u64)]) -> (usize, usize) {
    let mut xs: Vec<u64> = pairs.iter().map(|p| p.0).collect();
    let mut ys: Vec<u64> = pairs.iter().map(|p| p.1).collect();
    xs.sort_unstable();
    xs.dedup();
    ys.sort_unstable();
    ys.dedup();
    (xs.len(), ys.len())
}

/// Plug-in lower-bound estimate of the token stream's beta(k), restricted to
/// events over length-`order` blocks. Requires roughly 100 samples per
/// joint cell.
pub fn estimate_beta_empirical(
    tokens: &[usize],
    k: usize,
    order: usize,
) -> Result<f64, TheoryError> {
    let (pairs, code_bound) = block_pairs(tokens, k, order)?;
    let (dx, dy) = distinct_sides(&pairs);
    let needed = 100 * dx * dy;
    if pairs.len() < needed {
        return Err(TheoryError::InsufficientSample {
            pairs: pairs.len(),
            needed,
        });
    }
    Ok(tv_from_pairs(&pairs, code_bound))
}

/// One lag of the preservation experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingRow {
    pub lag: usize,
    /// Source-side gap kS - P + 1 implied by the lag.
    pub gap: usize,
    pub beta_token: f64,
    pub beta_token_se: f64,
    pub beta_source: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    pub n_points: usize,
    pub n_tokens: usize,
    pub patch_len: usize,
    pub stride: usize,
    pub k_clusters: usize,
    pub rows: Vec<MixingRow>,
    pub all_hold: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingConfig {
    pub patch: PatchConfig,
    pub k_clusters: usize,
    pub n_points: usize,
    pub max_lag: usize,
    pub bootstrap_reps: usize,
    pub seed: u64,
}

impl Default for MixingConfig {
    fn default() -> Self {
        Self {
            patch: PatchConfig::default(),
            k_clusters: 2,
            n_points: 1_000_000,
            max_lag: 5,
            bootstrap_reps: 30,
            seed: 0,
        }
    }
}

/// Generate a chain, tokenize it through the standard patch pipeline, and
/// check beta_token(k) <= beta_source(kS - P + 1) + 3 SE for each lag.
///
/// Requires the non-overlapping condition S >= P; overlapping patches are a
/// different regime with a different bound.
pub fn mixing_preservation_experiment(
    source: &MarkovSource,
    embedding: &[f64],
    config: &MixingConfig,
) -> Result<MixingReport, TheoryError> {
    let patch = config.patch;
    if patch.stride < patch.patch_len {
        return Err(TheoryError::NonOverlapRequired {
            patch_len: patch.patch_len,
            stride: patch.stride,
        });
    }
    if embedding.len() != source.n_states() {
        return Err(TheoryError::InvalidInput(format!(
            "embedding has {} entries for {} states",
            embedding.len(),
            source.n_states()
        )));
    }
    let states = source.sample_states(config.n_points, config.seed);
    let values: Vec<f64> = states.iter().map(|&s| embedding[s]).collect();
    let series = ChannelSeries::new("mixing", "chain", values)
        .map_err(|e| TheoryError::InvalidInput(e.to_string()))?;
    let patches = extract_normalized(&series, 0, &patch)?;
    let codebook = fit(
        &patches,
        config.k_clusters,
        &FitConfig::with_seed(config.seed),
    )?;
    let tokens: Vec<usize> = assign_batch(&codebook, &patches)?
        .iter()
        .map(|a| a.token)
        .collect();

    let mut rows = Vec::with_capacity(config.max_lag);
    for lag in 1..=config.max_lag {
        let gap = lag * patch.stride - patch.patch_len + 1;
        let beta_token = estimate_beta_empirical(&tokens, lag, 1)?;
        let beta_token_se = bootstrap_se(
            &tokens,
            lag,
            config.bootstrap_reps,
            config
                .seed
                .wrapping_mul(0x9e37_79b9_7f4a_7c15)
                .wrapping_add(lag as u64),
        )?;
        let beta_source = markov_beta_exact(source, gap)?;
        let holds = beta_token <= beta_source + 3.0 * beta_token_se;
        rows.push(MixingRow {
            lag,
            gap,
            beta_token,
            beta_token_se,
            beta_source,
            holds,
        });
    }
    let all_hold = rows.iter().all(|r| r.holds);
    Ok(MixingReport {
        n_points: config.n_points,
        n_tokens: tokens.len(),
        patch_len: patch.patch_len,
        stride: patch.stride,
        k_clusters: config.k_clusters,
        rows,
        all_hold,
    })
}

/// Circular block bootstrap over the lag-k pair sequence (block length about
/// sqrt(n) to respect serial dependence).
fn bootstrap_se(tokens: &[usize], k: usize, reps: usize, seed: u64) -> Result<f64, TheoryError> {
    let (pairs, code_bound) = block_pairs(tokens, k, 1)?;
    let n = pairs.len();
    let block = (n as f64).sqrt().ceil() as usize;
    let n_blocks = n.div_ceil(block);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut estimates = Vec::with_capacity(reps);
    let mut resampled = Vec::with_capacity(n_blocks * block);
    for _ in 0..reps {
        resampled.clear();
        for _ in 0..n_blocks {
            let start = rng.random_range(0..n);
            for offset in 0..block {
                resampled.push(pairs[(start + offset) % n]);
            }
        }
        resampled.truncate(n);
        estimates.push(tv_from_pairs(&resampled, code_bound));
    }
    let mean = estimates.iter().sum::<f64>() / reps as f64;
    let var = estimates
        .iter()
        .map(|e| (e - mean) * (e - mean))
        .sum::<f64>()
        / (reps - 1) as f64;
    Ok(var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iid_chain_has_zero_beta() {
        // Every row equals the stationary law: independence at all lags.
        let source =
            MarkovSource::new(vec![vec![0.3, 0.7], vec![0.3, 0.7]], vec![0.3, 0.7]).unwrap();
        for k in 1..=5 {
            assert!(markov_beta_exact(&source, k).unwrap() < 1e-12);
        }
    }

    #[test]
    fn identity_chain_beta_is_half() {
        let source =
            MarkovSource::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.5, 0.5]).unwrap();
        for k in [1, 3, 10] {
            assert!((markov_beta_exact(&source, k).unwrap() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn sticky_chain_beta_hand_value() {
        // TV([0.9, 0.1], [0.5, 0.5]) = 0.4 at every state.
        let source = MarkovSource::two_state_sticky(0.9).unwrap();
        assert!((markov_beta_exact(&source, 1).unwrap() - 0.4).abs() < 1e-12);
        // beta(k) = 0.5 * 0.8^k for this chain.
        for k in 1..=6 {
            let expected = 0.5 * 0.8f64.powi(k as i32);
            assert!((markov_beta_exact(&source, k).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn beta_non_increasing_for_ergodic_chain() {
        let source = MarkovSource::from_transition(vec![
            vec![0.7, 0.2, 0.1],
            vec![0.1, 0.8, 0.1],
            vec![0.25, 0.25, 0.5],
        ])
        .unwrap();
        let mut prev = f64::INFINITY;
        for k in 1..=10 {
            let b = markov_beta_exact(&source, k).unwrap();
            assert!(b <= prev + 1e-12, "beta rose at k = {k}");
            prev = b;
        }
    }

    #[test]
    fn from_transition_recovers_hand_stationary() {
        let source = MarkovSource::from_transition(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        // pi = (2/3, 1/3)
        assert!((source.stationary()[0] - 2.0 / 3.0).abs() < 1e-9);
        assert!((source.stationary()[1] - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn bad_matrices_rejected() {
        assert!(MarkovSource::new(vec![vec![0.5, 0.4]], vec![1.0]).is_err());
        assert!(MarkovSource::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]], vec![0.9, 0.2],).is_err());
        // Identity is singular for the stationary solve.
        assert!(MarkovSource::from_transition(vec![vec![1.0, 0.0], vec![0.0, 1.0],]).is_err());
    }

    #[test]
    fn empirical_estimate_near_zero_for_iid() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tokens: Vec<usize> = (0..100_000).map(|_| rng.random_range(0..4)).collect();
        let est = estimate_beta_empirical(&tokens, 1, 1).unwrap();
        assert!(est <= 0.02, "iid estimate {est}");
    }

    #[test]
    fn empirical_estimate_period_two() {
        let tokens: Vec<usize> = (0..10_000).map(|i| i % 2).collect();
        let est = estimate_beta_empirical(&tokens, 1, 1).unwrap();
        assert!((est - 0.5).abs() < 0.01, "{est}");
    }

    #[test]
    fn empirical_estimate_decays_with_lag() {
        let source = MarkovSource::two_state_sticky(0.9).unwrap();
        let tokens = source.sample_states(200_000, 5);
        let estimates: Vec<f64> = [1usize, 5, 25, 100]
            .iter()
            .map(|&k| estimate_beta_empirical(&tokens, k, 1).unwrap())
            .collect();
        for w in estimates.windows(2) {
            assert!(w[1] < w[0] + 0.01, "no decay: {estimates:?}");
        }
        assert!(estimates[3] < 0.05, "long-lag estimate {:?}", estimates[3]);
    }

    #[test]
    fn insufficient_sample_rejected() {
        let tokens: Vec<usize> = (0..50).map(|i| i % 4).collect();
        assert!(matches!(
            estimate_beta_empirical(&tokens, 1, 1).unwrap_err(),
            TheoryError::InsufficientSample { .. }
        ));
    }

    #[test]
    fn block_order_two_pairs_align() {
        // Past block ends at e, future block starts at e + k.
        let tokens = vec![0usize, 1, 2, 3, 4, 5];
        let (pairs, bound) = block_pairs(&tokens, 1, 2).unwrap();
        // First pair: block (0,1) with block (2,3) encoded base-6.
        assert_eq!(bound, 36);
        assert_eq!(pairs[0], (1, 2 * 6 + 3));
        assert_eq!(pairs.len(), 2);
    }

    #[test]
    fn preservation_holds_for_iid_source() {
        let source =
            MarkovSource::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]], vec![0.5, 0.5]).unwrap();
        let config = MixingConfig {
            patch: PatchConfig::new(4, 4).unwrap(),
            k_clusters: 2,
            n_points: 100_000,
            max_lag: 3,
            bootstrap_reps: 20,
            seed: 9,
        };
        let report = mixing_preservation_experiment(&source, &[0.0, 1.0], &config).unwrap();
        assert!(report.all_hold, "{:?}", report.rows);
        for row in &report.rows {
            assert!(row.beta_source < 1e-9);
            assert!(row.beta_token < 0.02);
        }
    }

    #[test]
    fn preservation_holds_for_sticky_chain() {
        let source = MarkovSource::two_state_sticky(0.95).unwrap();
        let config = MixingConfig {
            patch: PatchConfig::new(4, 4).unwrap(),
            k_clusters: 2,
            n_points: 200_000,
            max_lag: 5,
            bootstrap_reps: 20,
            seed: 2,
        };
        let report = mixing_preservation_experiment(&source, &[0.0, 1.0], &config).unwrap();
        assert!(report.all_hold, "{:?}", report.rows);
        // S = P makes the first gap exactly 1.
        assert_eq!(report.rows[0].gap, 1);
        assert!(
            (report.rows[0].beta_source - markov_beta_exact(&source, 1).unwrap()).abs() < 1e-15
        );
    }

    #[test]
    fn overlapping_patches_rejected() {
        let source = MarkovSource::two_state_sticky(0.9).unwrap();
        let config = MixingConfig {
            patch: PatchConfig::new(4, 2).unwrap(),
            ..MixingConfig::default()
        };
        assert!(matches!(
            mixing_preservation_experiment(&source, &[0.0, 1.0], &config).unwrap_err(),
            TheoryError::NonOverlapRequired { .. }
        ));
    }
}
