use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "histoad", version, about = "Anomaly detection for histopathology slides")]
pub struct Cli {
    /// Pipeline config (JSON). Flags given on the command line win over it.
    #[arg(long, global = true, env = "HISTOAD_CONFIG")]
    pub config: Option<PathBuf>,

    /// Worker threads for per-slide and per-fold work (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Detect tissue and enumerate patch coordinates.
    Tile(commands::TileArgs),
    /// Estimate a pooled lαβ stain target from reference slides.
    StainTarget(commands::StainTargetArgs),
    /// Train a scoring head from a feature manifest.
    Train(commands::TrainArgs),
    /// Score patch features with a checkpoint or a kNN reference bank.
    Score(commands::ScoreArgs),
    /// Aggregate patch scores to slide scores.
    Aggregate(commands::AggregateArgs),
    /// Render an overlap-averaged heatmap from patch scores.
    Heatmap(commands::HeatmapArgs),
    /// Evaluate slide (and optionally patch) scores against labels.
    Eval(commands::EvalArgs),
    /// Slide-level k-fold cross-validation from a feature manifest.
    Crossval(commands::CrossvalArgs),
    /// Generate synthetic feature pools and toy slides.
    Synth(commands::SynthArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<histoad::Error>() {
        Some(e) if e.is_numeric() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }

    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
