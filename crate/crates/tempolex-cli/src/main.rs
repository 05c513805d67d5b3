//! tempolex command line: tokenize CSV time series into a temporal
//! vocabulary, report its statistics, and run the theory validation suite.
//!
//! Exit codes: 0 success, 1 stage error (or a failed theory check),
//! 2 configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tempolex::corpus::{load_corpus, LoadOptions};
use tempolex::grammar::tokenize_series;
use tempolex::patching::PatchConfig;
use tempolex::pipeline::{
    collect_pool, compute_grammar, compute_vocab_stats, emit_grammar_plot_data,
    emit_vocab_plot_data, resolve_data_glob, run_pipeline, run_sweep, PipelineError, RunConfig,
    SweepSpec,
};
use tempolex::quantizer::{fit, Codebook};
use tempolex::theory::{run_experiments, ExperimentKind};

#[derive(Parser)]
#[command(
    name = "tempolex",
    version,
    about = "Time-series tokenization and vocabulary statistics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full run: load, patch, fit, tokenize, stats, grammar, reports
    Pipeline(RunArgs),
    /// Run every (patch size, K) cell of a parameter sweep
    Sweep(SweepArgs),
    /// Learn a codebook and write vocab.json
    BuildVocab(BuildVocabArgs),
    /// Tokenize series against an existing codebook
    Tokenize(TokenizeArgs),
    /// Vocabulary statistics against an existing codebook
    Stats(AnalyzeArgs),
    /// Grammar statistics against an existing codebook
    Grammar(AnalyzeArgs),
    /// Numerical validation of the theoretical claims
    Theory(TheoryArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Glob of CSV files (e.g. "data/*.csv")
    #[arg(long)]
    data: Option<String>,
    /// Patch length P
    #[arg(long = "patch-size")]
    patch_size: Option<usize>,
    /// Stride S (defaults to the patch size: non-overlapping)
    #[arg(long)]
    stride: Option<usize>,
    /// Vocabulary size K
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON config file; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Linearly interpolate interior gaps (runs > 10 are an error)
    #[arg(long)]
    interpolate: bool,
    /// Also write minimal SVG plots
    #[arg(long)]
    svg: bool,
    /// Uniform seeded subsample of the patch pool before fitting
    #[arg(long = "max-patches")]
    max_patches: Option<usize>,
    #[arg(long = "batch-size")]
    batch_size: Option<usize>,
    #[arg(long = "max-iters")]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated patch sizes, e.g. 16,32,64
    #[arg(long = "patch-sizes", value_delimiter = ',')]
    patch_sizes: Option<Vec<usize>>,
    /// Comma-separated vocabulary sizes, e.g. 16,32,64,128
    #[arg(long = "ks", value_delimiter = ',')]
    ks: Option<Vec<usize>>,
}

#[derive(Args)]
struct BuildVocabArgs {
    #[arg(long)]
    data: String,
    #[arg(long, default_value_t = 32)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Codebook output path
    #[arg(long, default_value = "vocab.json")]
    out: PathBuf,
    #[arg(long = "patch-size", default_value_t = 16)]
    patch_size: usize,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    interpolate: bool,
    #[arg(long = "max-patches")]
    max_patches: Option<usize>,
    #[arg(long = "batch-size", default_value_t = 1024)]
    batch_size: usize,
    #[arg(long = "max-iters", default_value_t = 200)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

#[derive(Args)]
struct TokenizeArgs {
    #[arg(long)]
    data: String,
    /// Codebook produced by build-vocab
    #[arg(long)]
    vocab: PathBuf,
    /// Stride (defaults to the codebook patch length)
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    interpolate: bool,
    /// Token sequences output path
    #[arg(long, default_value = "tokens.json")]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    data: String,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    interpolate: bool,
    #[arg(long = "max-patches")]
    max_patches: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "tempolex_out")]
    out: PathBuf,
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct TheoryArgs {
    /// Run every experiment
    #[arg(long, conflicts_with = "only")]
    all: bool,
    /// Comma-separated subset: covering,gem,genbound,mixing,ib
    #[arg(long, value_delimiter = ',')]
    only: Option<Vec<String>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "theory.json")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            // Display already embeds the stage and its immediate cause.
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, PipelineError> {
    match command {
        Command::Pipeline(args) => cmd_pipeline(args).map(|_| ExitCode::SUCCESS),
        Command::Sweep(args) => cmd_sweep(args).map(|_| ExitCode::SUCCESS),
        Command::BuildVocab(args) => cmd_build_vocab(args).map(|_| ExitCode::SUCCESS),
        Command::Tokenize(args) => cmd_tokenize(args).map(|_| ExitCode::SUCCESS),
        Command::Stats(args) => cmd_stats(args).map(|_| ExitCode::SUCCESS),
        Command::Grammar(args) => cmd_grammar(args).map(|_| ExitCode::SUCCESS),
        Command::Theory(args) => cmd_theory(args),
    }
}

fn build_run_config(args: &RunArgs) -> Result<RunConfig, PipelineError> {
    let mut config = match &args.config {
        Some(path) => {
            let raw = std::fs::read_to_string(path).map_err(|e| {
                PipelineError::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            serde_json::from_str::<RunConfig>(&raw)
                .map_err(|e| PipelineError::Config(format!("bad config {}: {e}", path.display())))?
        }
        None => RunConfig::new("", "tempolex_out"),
    };
    if let Some(d) = &args.data {
        config.data_glob = d.clone();
    }
    if let Some(p) = args.patch_size {
        config.patch_len = p;
    }
    if let Some(s) = args.stride {
        config.stride = Some(s);
    }
    if let Some(k) = args.k {
        config.k = k;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if args.interpolate {
        config.interpolate = true;
    }
    if args.svg {
        config.emit_svg = true;
    }
    if let Some(m) = args.max_patches {
        config.max_patches = Some(m);
    }
    if let Some(b) = args.batch_size {
        config.batch_size = b;
    }
    if let Some(m) = args.max_iters {
        config.max_iters = m;
    }
    if let Some(t) = args.tol {
        config.tol = t;
    }
    if let Some(o) = &args.out {
        config.output_dir = o.clone();
    }
    Ok(config)
}

fn cmd_pipeline(args: RunArgs) -> Result<(), PipelineError> {
    let config = build_run_config(&args)?;
    let report = run_pipeline(&config)?;
    println!(
        "pipeline done: {} datasets, {} pooled patches, K = {}",
        report.corpus.per_dataset.len(),
        report.vocab.n_patches_pool,
        report.vocab.k
    );
    println!(
        "zipf exponent {:.4} (deviation {:.4}), gini {:.4}, silhouette {:.4}",
        report.vocab.zipf.exponent,
        report.vocab.zipf.deviation,
        report.vocab.gini,
        report.vocab.silhouette
    );
    println!("artifacts in {}", config.output_dir.display());
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), PipelineError> {
    let mut config = build_run_config(&args.run)?;
    let mut sweep = config.sweep.clone().unwrap_or(SweepSpec {
        patch_lens: vec![config.patch_len],
        ks: vec![config.k],
    });
    if let Some(ps) = args.patch_sizes {
        sweep.patch_lens = ps;
    }
    if let Some(ks) = args.ks {
        sweep.ks = ks;
    }
    config.sweep = Some(sweep);
    let (reports, summary) = run_sweep(&config)?;
    println!("sweep done: {} cells", reports.len());
    for cell in &summary.cells {
        println!(
            "P = {:>3}  K = {:>4}  exponent {:.4}  deviation {:.4}  gini {:.4}  silhouette {:.4}",
            cell.patch_len, cell.k, cell.exponent, cell.deviation, cell.gini, cell.silhouette
        );
    }
    println!(
        "summary in {}",
        config.output_dir.join("sweep_summary.csv").display()
    );
    Ok(())
}

fn load_options(interpolate: bool) -> LoadOptions {
    LoadOptions {
        interpolate_interior_gaps: interpolate,
    }
}

fn cmd_build_vocab(args: BuildVocabArgs) -> Result<(), PipelineError> {
    let paths = resolve_data_glob(&args.data)?;
    let corpus = load_corpus(&paths, &load_options(args.interpolate))
        .map_err(PipelineError::stage("load"))?;
    let patch = PatchConfig::new(args.patch_size, args.stride.unwrap_or(args.patch_size))
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let pool = collect_pool(&corpus, &patch, args.max_patches, args.seed)?;
    let codebook = fit(
        &pool.patches,
        args.k,
        &tempolex::quantizer::FitConfig {
            batch_size: args.batch_size,
            max_iters: args.max_iters,
            tol: args.tol,
            seed: args.seed,
        },
    )
    .map_err(PipelineError::stage("fit"))?;
    codebook
        .write_json(&args.out)
        .map_err(PipelineError::stage("write"))?;
    println!(
        "codebook: K = {}, P = {}, {} iterations, final shift {:.3e} -> {}",
        codebook.k,
        codebook.p,
        codebook.iterations_run,
        codebook.final_shift,
        args.out.display()
    );
    Ok(())
}

fn read_codebook(path: &Path) -> Result<Codebook, PipelineError> {
    Codebook::read_json(path).map_err(PipelineError::stage("load-vocab"))
}

fn cmd_tokenize(args: TokenizeArgs) -> Result<(), PipelineError> {
    let codebook = read_codebook(&args.vocab)?;
    let patch = PatchConfig::new(codebook.p, args.stride.unwrap_or(codebook.p))
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let paths = resolve_data_glob(&args.data)?;
    let corpus = load_corpus(&paths, &load_options(args.interpolate))
        .map_err(PipelineError::stage("load"))?;
    let sequences: Vec<_> = corpus
        .series()
        .iter()
        .filter(|s| s.len() >= patch.patch_len)
        .map(|s| tokenize_series(s, &codebook, &patch))
        .collect::<Result<_, _>>()
        .map_err(PipelineError::stage("tokenize"))?;
    if sequences.is_empty() {
        return Err(PipelineError::Stage {
            stage: "tokenize",
            source: "no series reaches the patch length".into(),
        });
    }
    let json = serde_json::to_string_pretty(&sequences).map_err(|e| PipelineError::Stage {
        stage: "write",
        source: Box::new(e),
    })?;
    std::fs::write(&args.out, json).map_err(|e| PipelineError::Stage {
        stage: "write",
        source: Box::new(e),
    })?;
    println!(
        "{} token sequences -> {}",
        sequences.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_stats(args: AnalyzeArgs) -> Result<(), PipelineError> {
    let codebook = read_codebook(&args.vocab)?;
    let patch = PatchConfig::new(codebook.p, args.stride.unwrap_or(codebook.p))
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let paths = resolve_data_glob(&args.data)?;
    let corpus = load_corpus(&paths, &load_options(args.interpolate))
        .map_err(PipelineError::stage("load"))?;
    let pool = collect_pool(&corpus, &patch, args.max_patches, args.seed.unwrap_or(0))?;
    let artifacts = compute_vocab_stats(&codebook, &pool)?;
    std::fs::create_dir_all(&args.out).map_err(|e| PipelineError::Stage {
        stage: "write",
        source: Box::new(e),
    })?;
    let json =
        serde_json::to_string_pretty(&artifacts.section).map_err(|e| PipelineError::Stage {
            stage: "write",
            source: Box::new(e),
        })?;
    std::fs::write(args.out.join("stats.json"), json).map_err(|e| PipelineError::Stage {
        stage: "write",
        source: Box::new(e),
    })?;
    let centroids: Vec<(usize, u64, Vec<f64>)> = artifacts
        .sizes
        .iter()
        .map(|&(token, count)| (token, count, codebook.centroids[token].clone()))
        .collect();
    emit_vocab_plot_data(
        artifacts.section.rank_frequency.counts(),
        &artifacts.projection.coordinates,
        &artifacts.labels,
        &centroids,
        &args.out,
        args.svg,
    )?;
    println!(
        "stats: exponent {:.4}, deviation {:.4}, gini {:.4} -> {}",
        artifacts.section.zipf.exponent,
        artifacts.section.zipf.deviation,
        artifacts.section.gini,
        args.out.display()
    );
    Ok(())
}

fn cmd_grammar(args: AnalyzeArgs) -> Result<(), PipelineError> {
    let codebook = read_codebook(&args.vocab)?;
    let patch = PatchConfig::new(codebook.p, args.stride.unwrap_or(codebook.p))
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let paths = resolve_data_glob(&args.data)?;
    let corpus = load_corpus(&paths, &load_options(args.interpolate))
        .map_err(PipelineError::stage("load"))?;
    let artifacts = compute_grammar(&corpus, &codebook, &patch)?;
    std::fs::create_dir_all(&args.out).map_err(|e| PipelineError::Stage {
        stage: "write",
        source: Box::new(e),
    })?;
    let json =
        serde_json::to_string_pretty(&artifacts.section).map_err(|e| PipelineError::Stage {
            stage: "write",
            source: Box::new(e),
        })?;
    std::fs::write(args.out.join("grammar.json"), json).map_err(|e| PipelineError::Stage {
        stage: "write",
        source: Box::new(e),
    })?;
    emit_grammar_plot_data(
        artifacts.transition.probs(),
        &artifacts.section.ngram,
        &artifacts.features,
        &args.out,
        args.svg,
    )?;
    println!(
        "grammar: {} sequences, self-transition mass {:.4} -> {}",
        artifacts.section.n_sequences,
        artifacts.section.self_transition_mass,
        args.out.display()
    );
    Ok(())
}

fn cmd_theory(args: TheoryArgs) -> Result<ExitCode, PipelineError> {
    let kinds: Vec<ExperimentKind> = match &args.only {
        Some(names) => names
            .iter()
            .map(|n| n.parse())
            .collect::<Result<_, String>>()
            .map_err(PipelineError::Config)?,
        None => ExperimentKind::ALL.to_vec(),
    };
    let report = run_experiments(&kinds, args.seed);
    for entry in &report.experiments {
        println!(
            "{}: {} ({})",
            entry.name,
            if entry.pass { "PASS" } else { "FAIL" },
            entry.tolerance
        );
    }
    let json = serde_json::to_string_pretty(&report).map_err(|e| PipelineError::Stage {
        stage: "write",
        source: Box::new(e),
    })?;
    std::fs::write(&args.out, json).map_err(|e| PipelineError::Stage {
        stage: "write",
        source: Box::new(e),
    })?;
    println!("theory report -> {}", args.out.display());
    Ok(if report.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
