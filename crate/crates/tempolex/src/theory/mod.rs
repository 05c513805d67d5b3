//! Executable checks of the framework's theoretical claims: the covering
//! bound, GEM-driven rank-frequency tails, beta-mixing preservation under
//! tokenization, the dependence generalization bound, and the
//! information-bottleneck direction.

pub mod covering;
pub mod gem;
pub mod genbound;
pub mod ib;
pub mod mixing;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use covering::{covering_bound, CoveringInput};
pub use gem::{fit_tail_exponent, gem_sample, gem_sample_with, gem_weights, GemConfig, GemParams};
pub use genbound::{gen_bound, GenBoundInput};
pub use ib::{ib_experiment, mi_plugin, IbConfig, IbResult};
pub use mixing::{
    estimate_beta_empirical, markov_beta_exact, mixing_preservation_experiment, MarkovSource,
    MixingConfig, MixingReport, MixingRow,
};

use crate::patching::PatchError;
use crate::quantizer::QuantizerError;
use crate::vocabstats::{rank_frequency, RankFrequency, StatsError};

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("epsilon {epsilon} outside (0, {limit})")]
    EpsilonOutOfRange { epsilon: f64, limit: f64 },
    #[error("leftover stick mass {mass:.3e} exceeds {limit:.3e} at {n_atoms} atoms")]
    TruncationMassTooLarge {
        mass: f64,
        limit: f64,
        n_atoms: usize,
    },
    #[error("rank range needs {needed} ranks, only {available} observed")]
    InsufficientRanks { needed: usize, available: usize },
    #[error("{pairs} lag pairs observed, need at least {needed}")]
    InsufficientSample { pairs: usize, needed: usize },
    #[error("non-overlapping condition violated: stride {stride} < patch length {patch_len}")]
    NonOverlapRequired { patch_len: usize, stride: usize },
    #[error("stationary distribution solve failed (singular chain)")]
    SingularChain,
    #[error("not a stochastic matrix: {0}")]
    NotStochastic(String),
    #[error("joint count table is empty")]
    EmptyTable,
    #[error("codebook K = {k} cannot separate {signal_levels} signal levels")]
    DegenerateCodebook { k: usize, signal_levels: usize },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Quantizer(#[from] QuantizerError),
    #[error(transparent)]
    Patch(#[from] PatchError),
}

/// Which validation experiments to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Covering,
    Gem,
    GenBound,
    Mixing,
    Ib,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Covering,
        ExperimentKind::Gem,
        ExperimentKind::GenBound,
        ExperimentKind::Mixing,
        ExperimentKind::Ib,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Covering => "covering",
            ExperimentKind::Gem => "gem",
            ExperimentKind::GenBound => "genbound",
            ExperimentKind::Mixing => "mixing",
            ExperimentKind::Ib => "ib",
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "covering" => Ok(ExperimentKind::Covering),
            "gem" => Ok(ExperimentKind::Gem),
            "genbound" => Ok(ExperimentKind::GenBound),
            "mixing" => Ok(ExperimentKind::Mixing),
            "ib" => Ok(ExperimentKind::Ib),
            other => Err(format!(
                "unknown experiment {other:?}; expected covering, gem, genbound, mixing, or ib"
            )),
        }
    }
}

/// One experiment's inputs, outputs, verdict, and the tolerance it was judged at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentEntry {
    pub name: String,
    pub inputs: serde_json::Value,
    pub outputs: serde_json::Value,
    pub pass: bool,
    pub tolerance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub schema_version: u32,
    pub seed: u64,
    pub experiments: Vec<ExperimentEntry>,
}

impl TheoryReport {
    pub fn all_pass(&self) -> bool {
        self.experiments.iter().all(|e| e.pass)
    }
}

/// Run the selected experiments at their reference configurations.
pub fn run_experiments(kinds: &[ExperimentKind], seed: u64) -> TheoryReport {
    let experiments = kinds
        .iter()
        .map(|kind| match kind {
            ExperimentKind::Covering => covering_experiment(),
            ExperimentKind::Gem => gem_experiment(seed),
            ExperimentKind::GenBound => genbound_experiment(),
            ExperimentKind::Mixing => mixing_experiment(seed),
            ExperimentKind::Ib => ib_direction_experiment(seed),
        })
        .collect();
    TheoryReport {
        schema_version: 1,
        seed,
        experiments,
    }
}

fn covering_experiment() -> ExperimentEntry {
    let input = CoveringInput {
        patch_len: 16,
        epsilon: 4.0,
    };
    let bound = covering_bound(&input);
    let boundary_rejected = covering_bound(&CoveringInput {
        patch_len: 16,
        epsilon: 8.0,
    })
    .is_err();
    let pass = matches!(bound, Ok(b) if b == 14_348_907.0) && boundary_rejected;
    ExperimentEntry {
        name: "covering".into(),
        inputs: serde_json::json!({ "patch_len": 16, "epsilon": 4.0, "boundary_epsilon": 8.0 }),
        outputs: serde_json::json!({
            "bound": bound.as_ref().ok(),
            "expected": 14_348_907.0,
            "boundary_rejected": boundary_rejected,
        }),
        pass,
        tolerance: "exact (3^15); boundary epsilon = 2 sqrt(P) must be rejected".into(),
    }
}

fn gem_experiment(seed: u64) -> ExperimentEntry {
    // Deep-discount runs need a looser truncation-mass bound: the leftover
    // stick mass decays like N^(-(1-d)/d), and renormalization over the
    // retained atoms cannot change a rank-window slope.
    let cases = [
        (0.5, 1.0, 200_000usize, 1e-3, (1.6, 2.4)),
        (0.8, 1.0, 200_000usize, 0.2, (1.0, 1.5)),
        // d = 0 ranked weights decay exponentially, so the slope-2 reading
        // holds only over a bounded window; theta = 20 keeps ranks 10..100
        // populated at 1e6 draws.
        (0.0, 20.0, 5_000usize, 1e-6, (1.6, 2.4)),
    ];
    // The power law describes the EXPECTED ranked frequency; a single stick
    // realization wobbles around it by up to ~0.2 in the fitted slope, so
    // the runner fits the mean ranked-count curve over a few realizations.
    let realizations = 3u64;
    let mut outputs = Vec::new();
    let mut pass = true;
    for (d, theta, n_atoms, max_mass, (lo, hi)) in cases {
        let result = GemParams::new(d, theta).and_then(|params| {
            let config = GemConfig {
                n_atoms,
                max_truncation_mass: max_mass,
            };
            let mut curves: Vec<Vec<u64>> = Vec::new();
            for r in 0..realizations {
                let tokens = gem_sample_with(&params, 1_000_000, &config, seed.wrapping_add(r))?;
                curves.push(rank_frequency(&tokens, n_atoms)?.counts().to_vec());
            }
            let depth = curves.iter().map(Vec::len).min().unwrap_or(0);
            let mean_counts: Vec<u64> = (0..depth)
                .map(|rank| {
                    let sum: u64 = curves.iter().map(|c| c[rank]).sum();
                    (sum as f64 / realizations as f64).round() as u64
                })
                .collect();
            let rf = RankFrequency::from_counts(mean_counts)?;
            fit_tail_exponent(&rf, 10, 100)
        });
        match result {
            Ok(beta) => {
                let ok = beta >= lo && beta <= hi;
                pass &= ok;
                outputs.push(serde_json::json!({
                    "discount": d, "theta": theta, "beta": beta,
                    "band": [lo, hi], "within_band": ok,
                }));
            }
            Err(e) => {
                pass = false;
                outputs.push(serde_json::json!({
                    "discount": d, "theta": theta, "error": e.to_string(),
                }));
            }
        }
    }
    ExperimentEntry {
        name: "gem".into(),
        inputs: serde_json::json!({
            "n_tokens": 1_000_000, "fit_ranks": [10, 100], "realizations": realizations,
            "cases": [
                { "discount": 0.5, "theta": 1.0, "n_atoms": 200_000, "max_truncation_mass": 1e-3 },
                { "discount": 0.8, "theta": 1.0, "n_atoms": 200_000, "max_truncation_mass": 0.2 },
                { "discount": 0.0, "theta": 20.0, "n_atoms": 5_000, "max_truncation_mass": 1e-6 },
            ],
        }),
        outputs: serde_json::Value::Array(outputs),
        pass,
        tolerance: "mean ranked-count tail exponent within [1.6, 2.4] for d = 0.5, \
                    [1.0, 1.5] for d = 0.8, and [1.6, 2.4] for d = 0 (the Dirichlet case \
                    decays exponentially, so its slope-2 reading is window-bound: \
                    theta = 20, ranks 10..100)"
            .into(),
    }
}

fn genbound_experiment() -> ExperimentEntry {
    let input = GenBoundInput {
        stability: 0.01,
        variance_bound: 1.0,
        beta_sum: 1.0,
        n: 10_000,
        delta: 0.05,
    };
    let value = gen_bound(&input);
    let expected = 0.02 + (10.0 * 40.0f64.ln() / 1e4).sqrt();
    let example_ok = matches!(value, Ok(v) if (v - expected).abs() < 1e-12);
    let mut monotone = true;
    let mut prev = f64::INFINITY;
    let mut curve = Vec::new();
    for exp in 2..=6u32 {
        let b = gen_bound(&GenBoundInput {
            n: 10usize.pow(exp),
            ..input
        })
        .unwrap_or(f64::NAN);
        monotone &= b < prev;
        curve.push(serde_json::json!({ "n": 10usize.pow(exp), "bound": b }));
        prev = b;
    }
    ExperimentEntry {
        name: "genbound".into(),
        inputs: serde_json::to_value(input).unwrap(),
        outputs: serde_json::json!({
            "bound": value.as_ref().ok(),
            "expected": expected,
            "monotone_in_n": monotone,
            "curve": curve,
        }),
        pass: example_ok && monotone,
        tolerance: "worked example to 1e-12; bound strictly decreasing in n over 1e2..1e6. \
                    The (1+4B) constant is tied to the concentration inequality invoked; \
                    absolute values are indicative."
            .into(),
    }
}

fn mixing_experiment(seed: u64) -> ExperimentEntry {
    let config = MixingConfig {
        patch: crate::patching::PatchConfig {
            patch_len: 4,
            stride: 4,
        },
        k_clusters: 2,
        n_points: 1_000_000,
        max_lag: 5,
        bootstrap_reps: 30,
        seed,
    };
    let result = MarkovSource::two_state_sticky(0.95)
        .and_then(|source| mixing_preservation_experiment(&source, &[0.0, 1.0], &config));
    match result {
        Ok(report) => ExperimentEntry {
            name: "mixing".into(),
            inputs: serde_json::json!({
                "source": "two-state chain, stay probability 0.95",
                "config": config,
            }),
            pass: report.all_hold,
            outputs: serde_json::to_value(&report).unwrap(),
            tolerance: "beta_token(k) <= beta_source(kS - P + 1) + 3 bootstrap SE, k = 1..5".into(),
        },
        Err(e) => ExperimentEntry {
            name: "mixing".into(),
            inputs: serde_json::json!({ "config": config }),
            outputs: serde_json::json!({ "error": e.to_string() }),
            pass: false,
            tolerance: "beta_token(k) <= beta_source(kS - P + 1) + 3 bootstrap SE, k = 1..5".into(),
        },
    }
}

fn ib_direction_experiment(seed: u64) -> ExperimentEntry {
    let mut holds = 0usize;
    let n_seeds = 10usize;
    let mut runs = Vec::new();
    for offset in 0..n_seeds as u64 {
        let config = IbConfig {
            seed: seed.wrapping_add(offset),
            ..IbConfig::default()
        };
        match ib_experiment(&config) {
            Ok(result) => {
                let ok = result.direction_holds(0.9);
                holds += ok as usize;
                runs.push(serde_json::json!({
                    "seed": config.seed, "result": result, "direction_holds": ok,
                }));
            }
            Err(e) => runs.push(serde_json::json!({
                "seed": config.seed, "error": e.to_string(),
            })),
        }
    }
    ExperimentEntry {
        name: "ib".into(),
        inputs: serde_json::to_value(IbConfig::default()).unwrap(),
        outputs: serde_json::json!({ "holds": holds, "seeds": n_seeds, "runs": runs }),
        pass: holds * 10 >= 9 * n_seeds,
        tolerance: "I(X;Z_patch) < I(X;Z_point) and I(Y;Z_patch) >= 0.9 I(Y;Z_point) \
                    in at least 9 of 10 seeds"
            .into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experiment_kind_round_trip() {
        for kind in ExperimentKind::ALL {
            let parsed: ExperimentKind = kind.name().parse().unwrap();
            assert_eq!(parsed, kind);
        }
        assert!("bogus".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn cheap_experiments_pass() {
        let report = run_experiments(&[ExperimentKind::Covering, ExperimentKind::GenBound], 0);
        assert!(report.all_pass(), "{report:?}");
        assert_eq!(report.experiments.len(), 2);
    }

    #[test]
    fn report_serializes_with_entries() {
        let report = run_experiments(&[ExperimentKind::Covering], 1);
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"covering\""));
        assert!(json.contains("\"pass\""));
        assert!(json.contains("\"tolerance\""));
    }
}
