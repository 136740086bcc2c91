use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use irisbench::augment::AugmentConfig;
use irisbench::cli::{
    cmd_augment, cmd_compare, cmd_embed, cmd_evaluate_file, cmd_pipeline, cmd_preprocess,
    cmd_preprocess_sweep, CliError, EmbedOptions, EmbedderChoice, ExperimentConfig, Manifest,
    RowFailure, EXIT_CONFIG, EXIT_PARTIAL,
};
use irisbench::preprocess::{PreprocessConfig, DEFAULT_FINAL_SIZE};
use irisbench::verify::MetricKind;

/// Iris verification benchmark: preprocessing, augmentation, embedding and evaluation.
///
/// Set IRISBENCH_THREADS to bound the worker pool.
#[derive(Parser)]
#[command(name = "irisbench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Delineate, segment and normalize or crop every manifest image.
    Preprocess(PreprocessArgs),
    /// Add rotated copies of the training images.
    Augment(AugmentArgs),
    /// Compute one embedding per manifest row.
    Embed(EmbedArgs),
    /// All-against-all verification of an embedding file.
    Evaluate(EvaluateArgs),
    /// Compare pipeline reports with paired t-tests.
    Compare(CompareArgs),
    /// Run every stage from a JSON config.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Scheme name such as `nonorm-seg` or `norm8x1-noseg`.
    #[arg(long, conflicts_with = "all_schemes", required_unless_present = "all_schemes")]
    scheme: Option<PreprocessConfig>,
    /// Run the six standard schemes into one subdirectory each.
    #[arg(long)]
    all_schemes: bool,
    #[arg(long, default_value_t = DEFAULT_FINAL_SIZE)]
    size: usize,
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Maximum rotation in degrees; angles span ±range.
    #[arg(long, default_value_t = 60.0)]
    range: f64,
    /// Number of rotated copies per image (even).
    #[arg(long, default_value_t = 6)]
    apertures: usize,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output embedding file.
    #[arg(long)]
    out: PathBuf,
    /// Take vectors from this embedding file instead of the baseline embedder.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_FINAL_SIZE)]
    size: usize,
    #[arg(long)]
    l2_normalize: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "cosine")]
    metric: MetricKind,
    /// Label recorded in the report.
    #[arg(long, default_value = "")]
    scheme: String,
}

#[derive(Args)]
struct CompareArgs {
    /// Pipeline report.json files.
    #[arg(required = true, num_args = 2..)]
    reports: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Also write the comparison as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's run count.
    #[arg(long)]
    runs: Option<usize>,
    /// Overrides the config's metric.
    #[arg(long)]
    metric: Option<MetricKind>,
}

fn report_failures(failures: &[RowFailure]) -> ExitCode {
    if failures.is_empty() {
        return ExitCode::SUCCESS;
    }
    eprintln!("{} row(s) failed:", failures.len());
    for f in failures {
        eprintln!("  {}: {}", f.id, f.error);
    }
    ExitCode::from(EXIT_PARTIAL as u8)
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Preprocess(a) => {
            let manifest = Manifest::load(&a.manifest)?;
            let mut failures = Vec::new();
            if a.all_schemes {
                for (name, outcome) in cmd_preprocess_sweep(&manifest, &a.out, a.size)? {
                    println!("{name}: {} image(s) -> {}", outcome.manifest.len(), outcome.manifest_path.display());
                    failures.extend(outcome.failures.into_iter().map(|f| RowFailure {
                        id: format!("{name}/{}", f.id),
                        error: f.error,
                    }));
                }
            } else {
                let mut cfg = a.scheme.expect("clap enforces --scheme");
                cfg.final_size = a.size;
                let outcome = cmd_preprocess(&manifest, &cfg, &a.out)?;
                println!("{} image(s) -> {}", outcome.manifest.len(), outcome.manifest_path.display());
                failures = outcome.failures;
            }
            Ok(report_failures(&failures))
        }
        Command::Augment(a) => {
            let manifest = Manifest::load(&a.manifest)?;
            let cfg = AugmentConfig::new(a.range, a.apertures)?;
            let outcome = cmd_augment(&manifest, &cfg, &a.out)?;
            println!("{} image(s) -> {}", outcome.manifest.len(), outcome.manifest_path.display());
            Ok(report_failures(&outcome.failures))
        }
        Command::Embed(a) => {
            let manifest = Manifest::load(&a.manifest)?;
            let embedder = match a.embeddings {
                Some(path) => EmbedderChoice::External { path },
                None => EmbedderChoice::Baseline,
            };
            let options = EmbedOptions {
                size: a.size,
                l2_normalize: a.l2_normalize,
            };
            let (set, failures) = cmd_embed(&manifest, &embedder, &a.out, options)?;
            println!("{} embedding(s) of dim {} -> {}", set.len(), set.dim(), a.out.display());
            Ok(report_failures(&failures))
        }
        Command::Evaluate(a) => {
            let r = cmd_evaluate_file(&a.embeddings, a.metric, &a.scheme, &a.out)?;
            println!(
                "EER {:.4}% at {:.6}, decidability {:.4} ({} genuine, {} impostor)",
                100.0 * r.eer,
                r.eer_threshold,
                r.decidability,
                r.genuine_count,
                r.impostor_count
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare(a) => {
            let report = cmd_compare(&a.reports, a.alpha)?;
            print!("{}", report.render());
            if let Some(out) = a.out {
                let json = serde_json::to_string_pretty(&report).expect("report serializes");
                std::fs::write(&out, json + "\n")
                    .map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Pipeline(a) => {
            let mut cfg = ExperimentConfig::load(&a.config)?;
            if let Some(seed) = a.seed {
                cfg.seed = seed;
            }
            if let Some(runs) = a.runs {
                cfg.runs = runs;
            }
            if let Some(metric) = a.metric {
                cfg.metric = metric.name().to_string();
            }
            let manifest = Manifest::load(&a.manifest)?;
            let outcome = cmd_pipeline(&cfg, &manifest, &a.out)?;
            println!(
                "{} [{}]: EER {} %, decidability {} over {} run(s) -> {}",
                outcome.report.scheme,
                outcome.report.metric,
                outcome.report.eer.display,
                outcome.report.decidability.display,
                outcome.report.runs,
                outcome.report_path.display()
            );
            Ok(report_failures(&outcome.failures))
        }
    }
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var("IRISBENCH_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .with_context(|| format!("IRISBENCH_THREADS={value:?} is not a thread count"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring thread pool")?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_CONFIG as u8);
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            let mut msg = e.to_string();
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                let text = s.to_string();
                if !msg.contains(&text) {
                    msg.push_str(": ");
                    msg.push_str(&text);
                }
                source = s.source();
            }
            eprintln!("error: {msg}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
