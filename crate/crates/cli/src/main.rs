use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ils_core::experiment::{
    run_experiment, run_sweep, trace_to_jsonl, write_features, ExperimentSpec, MetricsReport, SynthSpec, TargetLabels,
};
use ils_core::optimizer::{OptimizerConfig, OptimizerMode};
use ils_core::pipeline::{AdaptationMode, BetaSetting, TrainConfig};
use ils_core::{IlsError, Stage};

#[derive(Parser)]
#[command(name = "ils", version, about = "Domain adaptation through a learned invariant latent space")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit on labeled source and target features, classify the target rows.
    Run(RunArgs),
    /// Repeat a run for several values of lambda.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma separated lambda values.
        #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,2")]
        lambdas: Vec<f64>,
    },
    /// Write a synthetic source/target pair of feature files.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Source feature file; every row must be labeled.
    #[arg(long)]
    source: PathBuf,
    /// Target feature file; labels, when present, are used for scoring only.
    #[arg(long)]
    target: PathBuf,
    /// unsupervised or semi.
    #[arg(long, default_value = "unsupervised")]
    mode: AdaptationMode,
    /// Semi mode: labeled target rows drawn per class from the target file.
    #[arg(long, conflicts_with = "labeled_target")]
    labeled_per_class: Option<usize>,
    /// Semi mode: separate file of labeled target-domain rows.
    #[arg(long)]
    labeled_target: Option<PathBuf>,
    /// Latent dimension.
    #[arg(long, default_value_t = 20)]
    dim: usize,
    /// Weight of the statistical alignment term.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Hinge sharpness: auto or a positive number.
    #[arg(long, default_value = "auto")]
    beta: BetaSetting,
    /// alternating, product or pgd.
    #[arg(long, default_value = "alternating")]
    optimizer: OptimizerMode,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    /// Cap on the number of similar pairs.
    #[arg(long, default_value_t = 10_000)]
    max_pairs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "ils-out")]
    out: PathBuf,
    /// Also write the fitted model to this path.
    #[arg(long)]
    export_model: Option<PathBuf>,
    /// Print the optimizer trace as JSON lines on stdout.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for source.csv and target.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    classes: usize,
    #[arg(long, default_value_t = 100)]
    per_class: usize,
    #[arg(long, default_value_t = 10)]
    source_dim: usize,
    #[arg(long, default_value_t = 10)]
    target_dim: usize,
    /// Rotation of the target domain, in degrees.
    #[arg(long, default_value_t = 30.0)]
    angle: f64,
    /// Translation of the target domain along the class axis.
    #[arg(long, default_value_t = 2.0)]
    shift: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

impl RunArgs {
    fn spec(&self) -> ExperimentSpec {
        let target_labels = match (&self.labeled_target, self.labeled_per_class) {
            (Some(path), _) => TargetLabels::File(path.clone()),
            (None, Some(k)) => TargetLabels::PerClass(k),
            (None, None) => TargetLabels::None,
        };
        ExperimentSpec {
            source: self.source.clone(),
            target: self.target.clone(),
            target_labels,
            train: TrainConfig {
                latent_dim: self.dim,
                lambda: self.lambda,
                beta: self.beta,
                mode: self.mode,
                optimizer: OptimizerConfig {
                    max_iters: self.max_iters,
                    ..OptimizerConfig::with_mode(self.optimizer)
                },
                max_similar_pairs: self.max_pairs,
                seed: self.seed,
            },
            out_dir: self.out.clone(),
            export_model: self.export_model.clone(),
        }
    }
}

fn summarize(report: &MetricsReport) -> String {
    let percent = |a: Option<f64>| a.map_or("n/a".to_string(), |a| format!("{:.2}%", 100.0 * a));
    format!(
        "accuracy {} (source-only baseline {}), loss {:.6} -> {:.6} in {} iterations ({})",
        percent(report.accuracy),
        percent(report.baseline_accuracy),
        report.initial_loss.total,
        report.final_loss.total,
        report.iterations,
        report.stop_reason
    )
}

fn run(args: &RunArgs) -> ils_core::Result<()> {
    let outcome = run_experiment(&args.spec())?;
    if args.trace {
        print!("{}", trace_to_jsonl(&outcome.optimization.trace)?);
    }
    eprintln!("{}", summarize(&outcome.report));
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn sweep(args: &RunArgs, lambdas: &[f64]) -> ils_core::Result<()> {
    let reports = run_sweep(&args.spec(), lambdas)?;
    for (lambda, report) in lambdas.iter().zip(&reports) {
        eprintln!("lambda {lambda}: {}", summarize(report));
    }
    eprintln!("wrote {}", args.out.join("sweep.json").display());
    Ok(())
}

fn synth(args: &SynthArgs) -> ils_core::Result<()> {
    let spec = SynthSpec {
        classes: args.classes,
        per_class: args.per_class,
        source_dim: args.source_dim,
        target_dim: args.target_dim,
        angle_deg: args.angle,
        shift: args.shift,
        seed: args.seed,
        ..Default::default()
    };
    let data = spec.generate()?;
    let write = |name: &str, features| -> ils_core::Result<()> {
        let path = args.out.join(name);
        write_features(&path, features)?;
        eprintln!("wrote {}", path.display());
        Ok(())
    };
    std::fs::create_dir_all(&args.out).map_err(|source| IlsError::Io {
        path: args.out.clone(),
        source,
    })?;
    write("source.csv", &data.source)?;
    write("target.csv", &data.target)
}

/// Errors without a pipeline stage are labeled by the command that raised them.
fn label(error: &IlsError, fallback: Stage) -> String {
    match error.stage() {
        Some(_) => error.to_string(),
        None => format!("[{fallback}] {error}"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (result, fallback) = match &cli.command {
        Command::Run(args) => (run(args), Stage::Load),
        Command::Sweep { run, lambdas } => (sweep(run, lambdas), Stage::Load),
        Command::Synth(args) => (synth(args), Stage::Report),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", label(&e, fallback));
            ExitCode::FAILURE
        }
    }
}

