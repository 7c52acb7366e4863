use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cxr_cli::{cmd_evaluate, cmd_extract, cmd_report, CliError, Overrides, PipelineConfig};

#[derive(Parser)]
#[command(name = "cxr", version, about = "Chest X-ray classification: ResNet-50 features + kernel SVM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the manifest's images through ResNet-50 and write a feature file.
    Extract(PipelineArgs),
    /// Cross-validate SVMs on a feature file and write reports.
    Evaluate(PipelineArgs),
    /// Summarise report JSON files (or directories of them).
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Also write ROC polylines as CSV into this directory.
        #[arg(long)]
        roc_out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct PipelineArgs {
    /// `key = value` configuration file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `path,label` CSV of images.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// RNW1 weight file, or `random:<seed>` for untrained smoke-test weights.
    #[arg(long)]
    weights: Option<String>,
    /// Feature CSV (default `<out>/features.csv`).
    #[arg(long)]
    features: Option<PathBuf>,
    /// Kernels to evaluate: linear, quadratic, cubic (comma separated or repeated).
    #[arg(long = "kernel")]
    kernels: Vec<String>,
    /// SVM box constraint.
    #[arg(long)]
    c: Option<f64>,
    /// Polynomial kernel scale (default: feature dimension).
    #[arg(long)]
    scale: Option<f64>,
    /// Polynomial kernel offset.
    #[arg(long)]
    offset: Option<f64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    threads: Option<usize>,
    /// Images per forward batch.
    #[arg(long)]
    batch_size: Option<usize>,
}

impl From<PipelineArgs> for Overrides {
    fn from(a: PipelineArgs) -> Self {
        Overrides {
            config: a.config,
            manifest: a.manifest,
            weights: a.weights,
            features: a.features,
            kernels: a.kernels,
            c: a.c,
            scale: a.scale,
            offset: a.offset,
            folds: a.folds,
            repeats: a.repeats,
            seed: a.seed,
            out: a.out,
            threads: a.threads,
            batch_size: a.batch_size,
        }
    }
}

fn configure(args: PipelineArgs) -> Result<PipelineConfig, CliError> {
    let cfg = PipelineConfig::resolve(&args.into())?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Extract(args) => {
            let path = cmd_extract(&configure(args)?)?;
            println!("wrote {}", path.display());
        }
        Command::Evaluate(args) => {
            for path in cmd_evaluate(&configure(args)?)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Report { reports, roc_out } => {
            cmd_report(&reports, roc_out.as_deref(), &mut std::io::stdout().lock())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
