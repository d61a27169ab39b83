//! `visloop`: synthetic scenes, feature-matching enhancement, vocabulary
//! training, keyframe retrieval, loop closing, and trajectory metrics
//! behind one binary.
//!
//! Exit codes: 0 success, 1 runtime failure (module errors are printed
//! verbatim), 2 usage errors. Summary lines are stable strings; `--json`
//! swaps them for one machine-readable object on stdout.

mod commands;
mod context;

use clap::{Parser, Subcommand};

use commands::{db, eval, loop_close, matching, report, synth, vocab};
use context::Context;

#[derive(Parser)]
#[command(
    name = "visloop",
    version,
    about = "Robust feature matching, bag-of-words loop closure, and trajectory evaluation for visual-inertial pipelines"
)]
struct Cli {
    /// Seed for every randomized stage.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Optional key=value configuration file; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<std::path::PathBuf>,
    /// Print progress details to stderr.
    #[arg(long, global = true)]
    verbose: bool,
    /// Emit the summary as a single JSON object on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic scenes and trajectories.
    #[command(subcommand)]
    Synth(synth::SynthCommand),
    /// Mask-filter, match, and RANSAC-verify two feature files.
    Match(matching::MatchArgs),
    /// Train a hierarchical bag-of-words vocabulary from feature files.
    TrainVocab(vocab::TrainVocabArgs),
    /// Keyframe database operations.
    #[command(subcommand)]
    Db(db::DbCommand),
    /// Detect loop closures and correct a trajectory.
    LoopClose(loop_close::LoopCloseArgs),
    /// Trajectory accuracy metrics.
    #[command(subcommand)]
    Eval(eval::EvalCommand),
    /// Comparison reports.
    #[command(subcommand)]
    Report(report::ReportCommand),
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    let ctx = match Context::new(cli.seed, cli.config.as_deref(), cli.verbose, cli.json) {
        Ok(ctx) => ctx,
        Err(err) => {
            eprintln!("error: {err:#}");
            return std::process::ExitCode::FAILURE;
        }
    };
    let result = match &cli.command {
        Command::Synth(args) => synth::run(args, &ctx),
        Command::Match(args) => matching::run(args, &ctx),
        Command::TrainVocab(args) => vocab::run(args, &ctx),
        Command::Db(args) => db::run(args, &ctx),
        Command::LoopClose(args) => loop_close::run(args, &ctx),
        Command::Eval(args) => eval::run(args, &ctx),
        Command::Report(args) => report::run(args, &ctx),
    };
    match result {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::ExitCode::FAILURE
        }
    }
}
