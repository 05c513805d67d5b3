//! tempolex: tokenize continuous time series into a discrete temporal
//! vocabulary and analyze its statistics.
//!
//! The pipeline segments series into fixed-length z-normalized patches,
//! quantizes them against a mini-batch k-means codebook, and studies the
//! resulting token streams: rank-frequency structure and Zipf fits, Gini
//! concentration, cluster quality, transition grammar and n-gram coverage,
//! plus numerical checks of the covering bound, GEM tail exponents,
//! beta-mixing preservation, the dependence generalization bound, and the
//! information-bottleneck direction.

pub mod corpus;
pub mod grammar;
pub mod patching;
pub mod pipeline;
pub mod quantizer;
pub mod svg;
pub mod theory;
pub mod vocabstats;

pub use corpus::{corpus_summary, load_corpus, load_csv, ChannelSeries, Corpus, CorpusSummary};
pub use grammar::{tokenize_series, TokenSequence};
pub use patching::{extract_patches, znormalize, Patch, PatchConfig};
pub use pipeline::{run_pipeline, run_sweep, Report, RunConfig};
pub use quantizer::{assign, fit, Assignment, Codebook, FitConfig};
pub use vocabstats::{fit_zipf, gini, rank_frequency, RankFrequency, ZipfFit};
