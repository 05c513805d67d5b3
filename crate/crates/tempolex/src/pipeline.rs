//! End-to-end runs: load -> patch -> fit -> tokenize -> stats -> grammar,
//! with machine-readable reports, plot-data CSVs, and parameter sweeps.
//!
//! Reports are deterministic byte-for-byte for a fixed (data, config, seed):
//! every serialized container is ordered and timings live in a separate
//! `timings.json`, never inside `report.json`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{corpus_summary, load_corpus, Corpus, CorpusSummary, LoadOptions};
use crate::grammar::{
    self, sequence_features, transition_matrix, NGramStats, SequenceFeatures, TokenSequence,
    TransitionMatrix,
};
use crate::patching::{extract_normalized, Patch, PatchConfig};
use crate::quantizer::{assign_batch, fit, inter_centroid_distances, wcss, Codebook, FitConfig};
use crate::svg;
use crate::theory::TheoryReport;
use crate::vocabstats::{
    cluster_quality, cluster_sizes, fit_zipf, gini, pca2, rank_frequency, Projection2D,
    RankFrequency, ZipfFit,
};

pub const SCHEMA_VERSION: u32 = 1;
/// Largest n for the n-gram coverage table.
pub const NGRAM_MAX_N: usize = 4;
/// How many top n-grams each table keeps.
pub const NGRAM_TOP: usize = 10;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
}

impl PipelineError {
    pub fn stage<E>(stage: &'static str) -> impl FnOnce(E) -> Self
    where
        E: std::error::Error + Send + Sync + 'static,
    {
        move |source| Self::Stage {
            stage,
            source: Box::new(source),
        }
    }

    /// CLI exit code: 2 for configuration problems, 1 for stage failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Stage { .. } => 1,
        }
    }
}

/// Sweep grid: the Cartesian product of patch lengths and vocabulary sizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub patch_lens: Vec<usize>,
    pub ks: Vec<usize>,
}

/// Full run configuration. `stride: None` means non-overlapping (stride = P).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data_glob: String,
    #[serde(default = "default_patch_len")]
    pub patch_len: usize,
    #[serde(default)]
    pub stride: Option<usize>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub interpolate: bool,
    #[serde(default)]
    pub emit_svg: bool,
    #[serde(default)]
    pub max_patches: Option<usize>,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    pub output_dir: PathBuf,
}

fn default_patch_len() -> usize {
    16
}
fn default_k() -> usize {
    32
}
fn default_batch_size() -> usize {
    1024
}
fn default_max_iters() -> usize {
    200
}
fn default_tol() -> f64 {
    1e-4
}

impl RunConfig {
    pub fn new(data_glob: impl Into<String>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_glob: data_glob.into(),
            patch_len: default_patch_len(),
            stride: None,
            k: default_k(),
            seed: 0,
            interpolate: false,
            emit_svg: false,
            max_patches: None,
            batch_size: default_batch_size(),
            max_iters: default_max_iters(),
            tol: default_tol(),
            sweep: None,
            output_dir: output_dir.into(),
        }
    }

    pub fn stride(&self) -> usize {
        self.stride.unwrap_or(self.patch_len)
    }

    pub fn patch_config(&self) -> Result<PatchConfig, PipelineError> {
        PatchConfig::new(self.patch_len, self.stride())
            .map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            batch_size: self.batch_size,
            max_iters: self.max_iters,
            tol: self.tol,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.data_glob.is_empty() {
            return Err(PipelineError::Config("data glob is empty".into()));
        }
        if self.k < 1 {
            return Err(PipelineError::Config("K must be >= 1".into()));
        }
        if self.batch_size < 1 || self.max_iters < 1 {
            return Err(PipelineError::Config(
                "batch_size and max_iters must be >= 1".into(),
            ));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(PipelineError::Config("tol must be >= 0".into()));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.patch_lens.is_empty() || sweep.ks.is_empty() {
                return Err(PipelineError::Config(
                    "sweep lists must be non-empty".into(),
                ));
            }
        }
        self.patch_config().map(|_| ())
    }
}

/// Pooled normalized patches used for fitting and vocabulary statistics.
pub struct PatchPool {
    pub patches: Vec<Patch>,
    /// Count before optional subsampling.
    pub n_total: u64,
}

/// Extract normalized patches from every series long enough, in series order,
/// then optionally subsample uniformly (seeded, order-preserving).
pub fn collect_pool(
    corpus: &Corpus,
    patch: &PatchConfig,
    max_patches: Option<usize>,
    seed: u64,
) -> Result<PatchPool, PipelineError> {
    let per_series: Vec<Vec<Patch>> = corpus
        .series()
        .par_iter()
        .enumerate()
        .map(|(idx, series)| {
            if series.len() < patch.patch_len {
                Ok(Vec::new())
            } else {
                extract_normalized(series, idx as u32, patch)
            }
        })
        .collect::<Result<_, _>>()
        .map_err(PipelineError::stage("patch"))?;
    let mut patches: Vec<Patch> = per_series.into_iter().flatten().collect();
    if patches.is_empty() {
        return Err(PipelineError::Stage {
            stage: "patch",
            source: format!(
                "no series reaches the patch length {}; nothing to tokenize",
                patch.patch_len
            )
            .into(),
        });
    }
    let n_total = patches.len() as u64;
    if let Some(cap) = max_patches {
        if cap == 0 {
            return Err(PipelineError::Config("max_patches must be >= 1".into()));
        }
        if patches.len() > cap {
            let mut index: Vec<usize> = (0..patches.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ba1_ca11);
            index.shuffle(&mut rng);
            index.truncate(cap);
            index.sort_unstable();
            patches = index.into_iter().map(|i| patches[i].clone()).collect();
        }
    }
    Ok(PatchPool { patches, n_total })
}

/// The `stats.json` payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabSection {
    pub k: usize,
    pub patch_len: usize,
    pub n_patches_total: u64,
    pub n_patches_pool: u64,
    pub rank_frequency: RankFrequency,
    pub zipf: ZipfFit,
    pub gini: f64,
    pub silhouette: f64,
    pub davies_bouldin: f64,
    pub calinski_harabasz: f64,
    pub wcss: Vec<f64>,
    pub inter_centroid_distances: Vec<f64>,
    pub quantization_radius: f64,
    pub pca: PcaSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaSection {
    pub coordinates_path: String,
    pub explained_variance_ratio: [f64; 2],
}

/// Vocabulary statistics plus the payloads the plot CSVs need.
pub struct VocabArtifacts {
    pub section: VocabSection,
    pub labels: Vec<usize>,
    pub projection: Projection2D,
    pub sizes: Vec<(usize, u64)>,
}

pub fn compute_vocab_stats(
    codebook: &Codebook,
    pool: &PatchPool,
) -> Result<VocabArtifacts, PipelineError> {
    let assignments =
        assign_batch(codebook, &pool.patches).map_err(PipelineError::stage("stats"))?;
    let labels: Vec<usize> = assignments.iter().map(|a| a.token).collect();
    let radius = assignments
        .iter()
        .map(|a| a.distance)
        .fold(0.0f64, f64::max);

    let rf = rank_frequency(&labels, codebook.k).map_err(PipelineError::stage("stats"))?;
    let zipf = fit_zipf(&rf, None).map_err(PipelineError::stage("stats"))?;
    let counts_f: Vec<f64> = rf.counts().iter().map(|&c| c as f64).collect();
    let gini_value = gini(&counts_f).map_err(PipelineError::stage("stats"))?;
    let quality =
        cluster_quality(&pool.patches, &labels, codebook).map_err(PipelineError::stage("stats"))?;
    let wcss_values = wcss(codebook, &pool.patches).map_err(PipelineError::stage("stats"))?;
    let icd = inter_centroid_distances(codebook).map_err(PipelineError::stage("stats"))?;
    let projection = pca2(&pool.patches).map_err(PipelineError::stage("stats"))?;
    let sizes = cluster_sizes(&labels, codebook.k).map_err(PipelineError::stage("stats"))?;

    let section = VocabSection {
        k: codebook.k,
        patch_len: codebook.p,
        n_patches_total: pool.n_total,
        n_patches_pool: pool.patches.len() as u64,
        rank_frequency: rf,
        zipf,
        gini: gini_value,
        silhouette: quality.silhouette,
        davies_bouldin: quality.davies_bouldin,
        calinski_harabasz: quality.calinski_harabasz,
        wcss: wcss_values,
        inter_centroid_distances: icd,
        quantization_radius: radius,
        pca: PcaSection {
            coordinates_path: "pca.csv".into(),
            explained_variance_ratio: projection.explained_variance_ratio,
        },
    };
    Ok(VocabArtifacts {
        section,
        labels,
        projection,
        sizes,
    })
}

/// The `grammar.json` payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrammarSection {
    #[serde(rename = "transition")]
    pub transition_path: String,
    pub self_transition_mass: f64,
    pub ngram: Vec<NGramStats>,
    #[serde(rename = "per_sequence")]
    pub per_sequence_path: String,
    pub n_sequences: u64,
}

pub struct GrammarArtifacts {
    pub section: GrammarSection,
    pub transition: TransitionMatrix,
    pub sequences: Vec<TokenSequence>,
    pub features: Vec<SequenceFeatures>,
}

pub fn compute_grammar(
    corpus: &Corpus,
    codebook: &Codebook,
    patch: &PatchConfig,
) -> Result<GrammarArtifacts, PipelineError> {
    let stage = PipelineError::stage("grammar");
    let sequences: Vec<TokenSequence> = corpus
        .series()
        .par_iter()
        .filter(|s| s.len() >= patch.patch_len)
        .map(|s| grammar::tokenize_series(s, codebook, patch))
        .collect::<Result<_, _>>()
        .map_err(stage)?;
    if sequences.is_empty() {
        return Err(PipelineError::Stage {
            stage: "grammar",
            source: "no tokenizable series".into(),
        });
    }
    let transition =
        transition_matrix(&sequences, codebook.k).map_err(PipelineError::stage("grammar"))?;
    let self_mass = grammar::self_transition_mass(&transition);
    let mut ngram = Vec::new();
    for n in 1..=NGRAM_MAX_N {
        match grammar::ngram_stats(&sequences, codebook.k, n, NGRAM_TOP) {
            Ok(stats) => ngram.push(stats),
            // Short corpora simply stop the table early.
            Err(grammar::GrammarError::AllSequencesTooShort { .. }) => break,
            Err(e) => return Err(PipelineError::stage("grammar")(e)),
        }
    }
    let features: Vec<SequenceFeatures> = sequences
        .par_iter()
        .map(|s| sequence_features(s, codebook.k))
        .collect::<Result<_, _>>()
        .map_err(PipelineError::stage("grammar"))?;
    let section = GrammarSection {
        transition_path: "transition_matrix.csv".into(),
        self_transition_mass: self_mass,
        ngram,
        per_sequence_path: "per_sequence_features.csv".into(),
        n_sequences: sequences.len() as u64,
    };
    Ok(GrammarArtifacts {
        section,
        transition,
        sequences,
        features,
    })
}

/// Wall-clock stage timings, written to `timings.json` only.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timings {
    pub load_ms: u64,
    pub patch_ms: u64,
    pub fit_ms: u64,
    pub stats_ms: u64,
    pub grammar_ms: u64,
    pub write_ms: u64,
    pub total_ms: u64,
}

/// The `report.json` payload (timings are serialized separately so reports
/// stay byte-identical across runs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub config: RunConfig,
    pub corpus: CorpusSummary,
    pub vocab: VocabSection,
    pub grammar: GrammarSection,
    pub theory: Option<TheoryReport>,
    #[serde(skip)]
    pub timings: Timings,
}

/// Everything the plot CSVs need beyond the report itself.
pub struct PlotData {
    pub rank_counts: Vec<u64>,
    pub pca_coordinates: Vec<[f64; 2]>,
    pub pca_labels: Vec<usize>,
    pub transition_probs: Vec<Vec<f64>>,
    pub ngram: Vec<NGramStats>,
    pub per_sequence: Vec<SequenceFeatures>,
    /// (token, count, centroid) sorted by descending count.
    pub centroids_by_frequency: Vec<(usize, u64, Vec<f64>)>,
}

fn write_stage(e: std::io::Error) -> PipelineError {
    PipelineError::Stage {
        stage: "write",
        source: Box::new(e),
    }
}

/// Vocabulary-side plot data: `rank_frequency.csv`, `pca.csv`,
/// `centroids.csv` (most frequent cluster first), optional SVG.
pub fn emit_vocab_plot_data(
    rank_counts: &[u64],
    pca_coordinates: &[[f64; 2]],
    pca_labels: &[usize],
    centroids_by_frequency: &[(usize, u64, Vec<f64>)],
    dir: &Path,
    emit_svg: bool,
) -> Result<Vec<PathBuf>, PipelineError> {
    std::fs::create_dir_all(dir).map_err(write_stage)?;
    let mut written = Vec::new();

    let rank_path = dir.join("rank_frequency.csv");
    let mut out = String::from("rank,count\n");
    for (i, &c) in rank_counts.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, c));
    }
    std::fs::write(&rank_path, out).map_err(write_stage)?;
    written.push(rank_path);

    let pca_path = dir.join("pca.csv");
    let mut out = String::from("x,y,label\n");
    for (coord, label) in pca_coordinates.iter().zip(pca_labels) {
        out.push_str(&format!("{},{},{}\n", coord[0], coord[1], label));
    }
    std::fs::write(&pca_path, out).map_err(write_stage)?;
    written.push(pca_path);

    let centroid_path = dir.join("centroids.csv");
    let mut out = String::from("rank,cluster,count");
    if let Some((_, _, first)) = centroids_by_frequency.first() {
        for i in 0..first.len() {
            out.push_str(&format!(",v{i}"));
        }
    }
    out.push('\n');
    for (rank, (token, count, centroid)) in centroids_by_frequency.iter().enumerate() {
        out.push_str(&format!("{},{},{}", rank + 1, token, count));
        for v in centroid {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    std::fs::write(&centroid_path, out).map_err(write_stage)?;
    written.push(centroid_path);

    if emit_svg {
        let rf_svg = dir.join("rank_frequency.svg");
        std::fs::write(&rf_svg, svg::rank_frequency_svg(rank_counts)).map_err(write_stage)?;
        written.push(rf_svg);
    }
    Ok(written)
}

/// Grammar-side plot data: `transition_matrix.csv`, `ngram_coverage.csv`,
/// `per_sequence_features.csv`, optional SVG heatmap.
pub fn emit_grammar_plot_data(
    transition_probs: &[Vec<f64>],
    ngram: &[NGramStats],
    per_sequence: &[SequenceFeatures],
    dir: &Path,
    emit_svg: bool,
) -> Result<Vec<PathBuf>, PipelineError> {
    std::fs::create_dir_all(dir).map_err(write_stage)?;
    let mut written = Vec::new();

    let tm_path = dir.join("transition_matrix.csv");
    let mut out = String::new();
    for row in transition_probs {
        let cells: Vec<String> = row.iter().map(|p| format!("{p}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(&tm_path, out).map_err(write_stage)?;
    written.push(tm_path);

    let ngram_path = dir.join("ngram_coverage.csv");
    let mut out = String::from("n,observed_unique,possible,coverage\n");
    for stats in ngram {
        out.push_str(&format!(
            "{},{},{},{}\n",
            stats.n, stats.observed_unique, stats.possible, stats.coverage
        ));
    }
    std::fs::write(&ngram_path, out).map_err(write_stage)?;
    written.push(ngram_path);

    let seq_path = dir.join("per_sequence_features.csv");
    {
        // series ids come from CSV headers and may need quoting
        let mut writer = csv::Writer::from_path(&seq_path).map_err(|e| PipelineError::Stage {
            stage: "write",
            source: Box::new(e),
        })?;
        writer
            .write_record(["series_id", "entropy_bits", "complexity", "unique_tokens"])
            .and_then(|_| {
                for f in per_sequence {
                    writer.write_record([
                        f.series_id.as_str(),
                        &f.entropy_bits.to_string(),
                        &f.complexity.to_string(),
                        &f.unique_tokens.to_string(),
                    ])?;
                }
                writer.flush().map_err(csv::Error::from)
            })
            .map_err(|e| PipelineError::Stage {
                stage: "write",
                source: Box::new(e),
            })?;
    }
    written.push(seq_path);

    if emit_svg {
        let tm_svg = dir.join("transition_matrix.svg");
        std::fs::write(&tm_svg, svg::transition_heatmap_svg(transition_probs))
            .map_err(write_stage)?;
        written.push(tm_svg);
    }
    Ok(written)
}

/// Write the full plot-data CSV set (and optional SVGs) under `dir`.
pub fn emit_plot_data(
    plot: &PlotData,
    dir: &Path,
    emit_svg: bool,
) -> Result<Vec<PathBuf>, PipelineError> {
    let mut written = emit_vocab_plot_data(
        &plot.rank_counts,
        &plot.pca_coordinates,
        &plot.pca_labels,
        &plot.centroids_by_frequency,
        dir,
        emit_svg,
    )?;
    written.extend(emit_grammar_plot_data(
        &plot.transition_probs,
        &plot.ngram,
        &plot.per_sequence,
        dir,
        emit_svg,
    )?);
    Ok(written)
}

/// Expand the data glob into a sorted path list.
pub fn resolve_data_glob(pattern: &str) -> Result<Vec<PathBuf>, PipelineError> {
    let paths = glob::glob(pattern)
        .map_err(|e| PipelineError::Config(format!("bad data glob {pattern:?}: {e}")))?
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| PipelineError::Config(format!("unreadable glob entry: {e}")))?;
    let mut paths: Vec<PathBuf> = paths.into_iter().filter(|p| p.is_file()).collect();
    paths.sort();
    if paths.is_empty() {
        return Err(PipelineError::Config(format!(
            "data glob {pattern:?} matched no files"
        )));
    }
    Ok(paths)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let json = serde_json::to_string_pretty(value).map_err(|e| PipelineError::Stage {
        stage: "write",
        source: Box::new(e),
    })?;
    std::fs::write(path, json).map_err(|e| PipelineError::Stage {
        stage: "write",
        source: Box::new(e),
    })
}

/// Run the full pipeline and write every artifact under `config.output_dir`:
/// `report.json`, `vocab.json`, `stats.json`, `grammar.json`, `timings.json`,
/// and the plot CSV set.
pub fn run_pipeline(config: &RunConfig) -> Result<Report, PipelineError> {
    config.validate()?;
    let patch_cfg = config.patch_config()?;
    let total_start = Instant::now();
    let mut timings = Timings::default();

    let start = Instant::now();
    let paths = resolve_data_glob(&config.data_glob)?;
    let corpus = load_corpus(
        &paths,
        &LoadOptions {
            interpolate_interior_gaps: config.interpolate,
        },
    )
    .map_err(PipelineError::stage("load"))?;
    timings.load_ms = start.elapsed().as_millis() as u64;

    let mut report = run_pipeline_on(&corpus, config, &patch_cfg, &mut timings)?;
    timings.total_ms = total_start.elapsed().as_millis() as u64;
    report.timings = timings;
    write_json(&config.output_dir.join("timings.json"), &timings)?;
    Ok(report)
}

/// Pipeline body shared by `run_pipeline` and sweep cells: computes on an
/// already-loaded corpus and writes per-run artifacts.
fn run_pipeline_on(
    corpus: &Corpus,
    config: &RunConfig,
    patch_cfg: &PatchConfig,
    timings: &mut Timings,
) -> Result<Report, PipelineError> {
    let start = Instant::now();
    let pool = collect_pool(corpus, patch_cfg, config.max_patches, config.seed)?;
    timings.patch_ms = start.elapsed().as_millis() as u64;

    let start = Instant::now();
    let codebook =
        fit(&pool.patches, config.k, &config.fit_config()).map_err(PipelineError::stage("fit"))?;
    timings.fit_ms = start.elapsed().as_millis() as u64;

    let start = Instant::now();
    let vocab = compute_vocab_stats(&codebook, &pool)?;
    timings.stats_ms = start.elapsed().as_millis() as u64;

    let start = Instant::now();
    let grammar_art = compute_grammar(corpus, &codebook, patch_cfg)?;
    timings.grammar_ms = start.elapsed().as_millis() as u64;

    let report = Report {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        corpus: corpus_summary(corpus),
        vocab: vocab.section.clone(),
        grammar: grammar_art.section.clone(),
        theory: None,
        timings: *timings,
    };

    let start = Instant::now();
    let out = &config.output_dir;
    std::fs::create_dir_all(out).map_err(|e| PipelineError::Stage {
        stage: "write",
        source: Box::new(e),
    })?;
    codebook
        .write_json(&out.join("vocab.json"))
        .map_err(PipelineError::stage("write"))?;
    write_json(&out.join("stats.json"), &vocab.section)?;
    write_json(&out.join("grammar.json"), &grammar_art.section)?;
    write_json(&out.join("report.json"), &report)?;

    let plot = PlotData {
        rank_counts: vocab.section.rank_frequency.counts().to_vec(),
        pca_coordinates: vocab.projection.coordinates.clone(),
        pca_labels: vocab.labels.clone(),
        transition_probs: grammar_art.transition.probs().to_vec(),
        ngram: grammar_art.section.ngram.clone(),
        per_sequence: grammar_art.features.clone(),
        centroids_by_frequency: vocab
            .sizes
            .iter()
            .map(|&(token, count)| (token, count, codebook.centroids[token].clone()))
            .collect(),
    };
    emit_plot_data(&plot, out, config.emit_svg)?;
    timings.write_ms = start.elapsed().as_millis() as u64;
    Ok(report)
}

/// One sweep cell's headline numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub patch_len: usize,
    pub k: usize,
    pub exponent: f64,
    pub deviation: f64,
    pub gini: f64,
    pub silhouette: f64,
    pub davies_bouldin: f64,
    pub median_count: f64,
    pub output_dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub schema_version: u32,
    pub cells: Vec<SweepCell>,
}

/// Run every (patch_len, K) cell of the sweep in parallel; each cell writes a
/// full artifact set under `output_dir/p{P}_k{K}` and contributes one summary
/// row. The corpus is loaded once and shared.
pub fn run_sweep(config: &RunConfig) -> Result<(Vec<Report>, SweepSummary), PipelineError> {
    config.validate()?;
    let Some(spec) = config.sweep.clone() else {
        return Err(PipelineError::Config("sweep lists are missing".into()));
    };
    let paths = resolve_data_glob(&config.data_glob)?;
    let corpus = load_corpus(
        &paths,
        &LoadOptions {
            interpolate_interior_gaps: config.interpolate,
        },
    )
    .map_err(PipelineError::stage("load"))?;

    let cells: Vec<(usize, usize)> = spec
        .patch_lens
        .iter()
        .flat_map(|&p| spec.ks.iter().map(move |&k| (p, k)))
        .collect();

    let reports: Vec<Report> = cells
        .par_iter()
        .map(|&(patch_len, k)| {
            let mut cell_config = config.clone();
            cell_config.patch_len = patch_len;
            cell_config.k = k;
            cell_config.sweep = None;
            cell_config.output_dir = config.output_dir.join(format!("p{patch_len}_k{k}"));
            let patch_cfg = cell_config.patch_config()?;
            let mut timings = Timings::default();
            let report = run_pipeline_on(&corpus, &cell_config, &patch_cfg, &mut timings)?;
            write_json(&cell_config.output_dir.join("timings.json"), &timings)?;
            Ok(report)
        })
        .collect::<Result<_, PipelineError>>()?;

    let summary_cells: Vec<SweepCell> = reports
        .iter()
        .map(|r| {
            let counts = r.vocab.rank_frequency.counts();
            let median = if counts.len() % 2 == 1 {
                counts[counts.len() / 2] as f64
            } else {
                (counts[counts.len() / 2 - 1] + counts[counts.len() / 2]) as f64 / 2.0
            };
            SweepCell {
                patch_len: r.config.patch_len,
                k: r.config.k,
                exponent: r.vocab.zipf.exponent,
                deviation: r.vocab.zipf.deviation,
                gini: r.vocab.gini,
                silhouette: r.vocab.silhouette,
                davies_bouldin: r.vocab.davies_bouldin,
                median_count: median,
                output_dir: r.config.output_dir.display().to_string(),
            }
        })
        .collect();
    let summary = SweepSummary {
        schema_version: SCHEMA_VERSION,
        cells: summary_cells,
    };

    std::fs::create_dir_all(&config.output_dir).map_err(|e| PipelineError::Stage {
        stage: "write",
        source: Box::new(e),
    })?;
    write_json(&config.output_dir.join("sweep_summary.json"), &summary)?;
    let mut csv_out = String::from(
        "patch_len,k,exponent,deviation,gini,silhouette,davies_bouldin,median_count\n",
    );
    for c in &summary.cells {
        csv_out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            c.patch_len,
            c.k,
            c.exponent,
            c.deviation,
            c.gini,
            c.silhouette,
            c.davies_bouldin,
            c.median_count
        ));
    }
    std::fs::write(config.output_dir.join("sweep_summary.csv"), csv_out).map_err(|e| {
        PipelineError::Stage {
            stage: "write",
            source: Box::new(e),
        }
    })?;
    Ok((reports, summary))
}
