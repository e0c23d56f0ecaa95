use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use pa_modelkit::models::BehavioralModel;
use pa_modelkit::pipeline::{run_evaluate, run_generate, run_train, ExperimentConfig, Layout, Preset};
use pa_modelkit::Error;

#[derive(Parser)]
#[command(name = "pa-modelkit", version, about = "PA behavioral modeling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the dataset (CSV + JSON sidecar).
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Train every configured model on the training split.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset CSV; defaults to `<out>/dataset.csv`.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Evaluate trained models on the test split.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// generate, train and evaluate in one go.
    All {
        #[command(flatten)]
        common: Common,
    },
    /// Print a ready-made config: single, dual, triple or triple28.
    Preset { name: String },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Argument(_) | Error::Shape(_) => 1,
        Error::Io { .. } | Error::Format { .. } => 2,
        Error::Unsupported(_) => 3,
        Error::Diverged { .. } | Error::ZeroReference | Error::Pipeline(_) => 4,
    }
}

fn configure_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("PA_MODELKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Argument(format!("PA_MODELKIT_THREADS must be a positive integer, got '{v}'")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Argument(e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn setup(common: &Common) -> Result<(ExperimentConfig, Layout), Error> {
    let cfg = ExperimentConfig::load(&common.config)?;
    let out = common.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    Ok((cfg, Layout::new(out)))
}

fn print_report(layout: &Layout, csv: &str) {
    print!("{csv}");
    println!("report: {}", layout.report_csv().display());
}

fn generate(common: &Common) -> Result<(), Error> {
    let (cfg, layout) = setup(common)?;
    let ds = run_generate(&cfg, &layout)?;
    println!(
        "wrote {}: {} samples, K={}",
        layout.dataset().display(),
        ds.num_samples(),
        ds.num_carriers()
    );
    Ok(())
}

fn train(common: &Common, dataset: Option<&Path>) -> Result<(), Error> {
    let (cfg, layout) = setup(common)?;
    let path = dataset.map(Path::to_path_buf).unwrap_or_else(|| layout.dataset());
    for t in run_train(&cfg, &path, &layout)? {
        println!(
            "{}: {} coefficients -> {}",
            t.stem,
            t.model.coefficient_count(),
            layout.model(&t.stem).display()
        );
    }
    Ok(())
}

fn evaluate(common: &Common, dataset: Option<&Path>) -> Result<(), Error> {
    let (cfg, layout) = setup(common)?;
    let path = dataset.map(Path::to_path_buf).unwrap_or_else(|| layout.dataset());
    let report = run_evaluate(&cfg, &path, &layout)?;
    print_report(&layout, &report.to_csv());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    configure_threads()?;
    match &cli.command {
        Command::Generate { common } => generate(common),
        Command::Train { common, dataset } => train(common, dataset.as_deref()),
        Command::Evaluate { common, dataset } => evaluate(common, dataset.as_deref()),
        Command::All { common } => {
            generate(common)?;
            train(common, None)?;
            evaluate(common, None)
        }
        Command::Preset { name } => {
            let p: Preset = name.parse()?;
            print!("{}", p.config().to_json());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
