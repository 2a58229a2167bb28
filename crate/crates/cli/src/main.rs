//! Command-line front end for the concept-space analysis pipeline.
//!
//! Stage subcommands (`ingest`, `vocab`, `train`, ...) run the pipeline up
//! to that stage, reusing cached artifacts from earlier runs; `run` executes
//! everything. `synth` generates a ground-truth corpus for testing. Exit
//! codes: 0 success, 1 usage/configuration, 2-8 keyed to the failing stage,
//! 9 generator failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use conceptspace::pipeline::{run_pipeline_until, RunConfig, Stage};
use conceptspace::synth::{generate_synthetic, Drift, SyntheticSpec};

#[derive(Parser)]
#[command(
    name = "conceptspace",
    version,
    about = "Longitudinal concept-space analysis over timestamped text corpora"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline: ingest, vocab, train, timeline, metrics,
    /// stats, report.
    Run(StageArgs),
    /// Validate and count the corpus.
    Ingest(StageArgs),
    /// Build the concept vocabulary.
    Vocab(StageArgs),
    /// Train or load concept embeddings.
    Train(StageArgs),
    /// Date first appearances and build the timeline.
    Timeline(StageArgs),
    /// Compute yearly metric series.
    Metrics(StageArgs),
    /// Run significance tests over the metric samples.
    Stats(StageArgs),
    /// Render CSV/SVG reports.
    Report(StageArgs),
    /// Generate a synthetic corpus with known ground truth.
    Synth(SynthArgs),
}

#[derive(Args)]
struct StageArgs {
    /// Plain key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Corpus file (overrides the config file).
    #[arg(long)]
    corpus: Option<PathBuf>,

    /// Corpus format: jsonl or csv.
    #[arg(long)]
    format: Option<String>,

    /// Output directory (default: $CONCEPTSPACE_OUT or ./out).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Base seed for all randomized steps.
    #[arg(long)]
    seed: Option<u64>,

    /// Force sequential, bit-reproducible embedding training.
    #[arg(long)]
    deterministic: bool,

    /// Recompute every stage, ignoring cached artifacts.
    #[arg(long)]
    force: bool,

    /// Additional key=value overrides (same keys as the config file).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for corpus, vectors, first years and sidecar.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Number of analysis years after the 5-year baseline.
    #[arg(long, default_value_t = 20)]
    years: usize,

    #[arg(long, default_value_t = 200)]
    docs_per_year: usize,

    #[arg(long, default_value_t = 300)]
    baseline_vocab: usize,

    #[arg(long, default_value_t = 40)]
    new_per_year: usize,

    /// none, converging or diverging.
    #[arg(long, default_value = "none")]
    drift: String,

    #[arg(long, default_value_t = 384)]
    dim: usize,

    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn default_out() -> PathBuf {
    std::env::var_os("CONCEPTSPACE_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn build_config(args: &StageArgs) -> Result<RunConfig, String> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_kv_file(path).map_err(|e| e.to_string())?,
        None => RunConfig::new("", default_out()),
    };
    if let Some(corpus) = &args.corpus {
        cfg.corpus_path = corpus.clone();
    }
    if let Some(format) = &args.format {
        cfg.set("format", format).map_err(|e| e.to_string())?;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.deterministic {
        cfg.deterministic = true;
    }
    if args.force {
        cfg.force = true;
    }
    for pair in &args.sets {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| format!("--set {pair:?} is not KEY=VALUE"))?;
        cfg.set(key.trim(), value.trim()).map_err(|e| e.to_string())?;
    }
    if cfg.corpus_path.as_os_str().is_empty() {
        return Err("no corpus given: use --corpus or a config file".into());
    }
    Ok(cfg)
}

fn run_stage(args: &StageArgs, until: Stage) -> ExitCode {
    let cfg = match build_config(args) {
        Ok(cfg) => cfg,
        Err(message) => {
            eprintln!("error: {message}");
            return ExitCode::from(1);
        }
    };
    match run_pipeline_until(&cfg, until) {
        Ok(manifest) => {
            println!(
                "ok: stages [{}], {} artifacts in {}",
                manifest.stages.join(", "),
                manifest.artifacts.len(),
                cfg.out_dir.display()
            );
            for (metric, rho) in &manifest.trends {
                println!("trend {metric}: spearman rho vs year = {rho:.4}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if !e.partial_artifacts.is_empty() {
                eprintln!("partial artifacts: {}", e.partial_artifacts.join(", "));
            }
            ExitCode::from(e.exit_code as u8)
        }
    }
}

fn run_synth(args: &SynthArgs) -> ExitCode {
    let drift: Drift = match args.drift.parse() {
        Ok(d) => d,
        Err(message) => {
            eprintln!("error: {message}");
            return ExitCode::from(1);
        }
    };
    let spec = SyntheticSpec {
        years: args.years,
        docs_per_year: args.docs_per_year,
        baseline_vocab_size: args.baseline_vocab,
        new_per_year: args.new_per_year,
        drift,
        dimension: args.dim,
        seed: args.seed,
    };
    let out = args.out.clone().unwrap_or_else(default_out);
    match generate_synthetic(&spec, &out) {
        Ok((artifacts, truth)) => {
            println!(
                "ok: corpus {}, vectors {}, first years {}, sidecar {}",
                artifacts.corpus.display(),
                artifacts.vectors.display(),
                artifacts.first_years.display(),
                artifacts.sidecar.display()
            );
            println!(
                "analysis years {}..={}, drift {:?}",
                truth.analysis_years.0, truth.analysis_years.1, truth.drift
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(9)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => run_stage(args, Stage::Report),
        Command::Ingest(args) => run_stage(args, Stage::Ingest),
        Command::Vocab(args) => run_stage(args, Stage::Vocab),
        Command::Train(args) => run_stage(args, Stage::Embed),
        Command::Timeline(args) => run_stage(args, Stage::Timeline),
        Command::Metrics(args) => run_stage(args, Stage::Metrics),
        Command::Stats(args) => run_stage(args, Stage::Stats),
        Command::Report(args) => run_stage(args, Stage::Report),
        Command::Synth(args) => run_synth(args),
    }
}
