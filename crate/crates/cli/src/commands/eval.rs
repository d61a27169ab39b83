use std::path::PathBuf;

use anyhow::{Context as _, Result};
use clap::{Args, Subcommand, ValueEnum};

use visloop_core::evaluation::{ate, error_distribution, rpe, AlignMode};
use visloop_core::io::read_trajectory_auto;
use visloop_core::Trajectory;

use super::write_text;
use crate::context::Context;

#[derive(Subcommand)]
pub enum EvalCommand {
    /// Absolute trajectory error against a reference.
    Ate(AteArgs),
    /// Relative pose error over a fixed frame step.
    Rpe(RpeArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlignFlag {
    /// Closed-form rigid alignment (default).
    Se3,
    /// Similarity alignment including scale.
    Sim3,
    /// No alignment.
    None,
}

impl From<AlignFlag> for AlignMode {
    fn from(flag: AlignFlag) -> AlignMode {
        match flag {
            AlignFlag::Se3 => AlignMode::Se3,
            AlignFlag::Sim3 => AlignMode::Sim3,
            AlignFlag::None => AlignMode::None,
        }
    }
}

#[derive(Args)]
pub struct AteArgs {
    /// Estimated trajectory (TUM).
    #[arg(long, value_name = "FILE")]
    est: PathBuf,
    /// Reference trajectory (TUM or EuRoC ground-truth CSV).
    #[arg(long = "ref", value_name = "FILE")]
    reference: PathBuf,
    #[arg(long, value_enum, default_value_t = AlignFlag::Se3)]
    align: AlignFlag,
    /// Timestamp association tolerance in seconds.
    #[arg(long, default_value_t = 0.02)]
    max_diff: f64,
    /// Per-timestamp error CSV with a trailing summary comment.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also write an error histogram and Gaussian fit CSV.
    #[arg(long, value_name = "FILE")]
    dist: Option<PathBuf>,
    /// Histogram bin count for `--dist`.
    #[arg(long, default_value_t = 50)]
    bins: usize,
}

#[derive(Args)]
pub struct RpeArgs {
    #[arg(long, value_name = "FILE")]
    est: PathBuf,
    #[arg(long = "ref", value_name = "FILE")]
    reference: PathBuf,
    /// Step size in associated frames.
    #[arg(long, default_value_t = 1)]
    delta: usize,
    #[arg(long, default_value_t = 0.02)]
    max_diff: f64,
    /// Per-step error CSV with a trailing summary comment.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

pub fn run(command: &EvalCommand, ctx: &Context) -> Result<()> {
    match command {
        EvalCommand::Ate(args) => run_ate(args, ctx),
        EvalCommand::Rpe(args) => run_rpe(args, ctx),
    }
}

fn load(path: &std::path::Path, what: &str) -> Result<Trajectory> {
    read_trajectory_auto(path).with_context(|| format!("reading {what}"))
}

fn run_ate(args: &AteArgs, ctx: &Context) -> Result<()> {
    let est = load(&args.est, "--est")?;
    let reference = load(&args.reference, "--ref")?;
    let result = ate(&est, &reference, args.align.into(), args.max_diff)?;

    if let Some(out) = &args.out {
        let mut csv = String::from("timestamp,error\n");
        for &(t, e) in &result.errors {
            csv.push_str(&format!("{t},{e}\n"));
        }
        csv.push_str(&format!(
            "# summary rmse={} mean={} median={} min={} max={}\n",
            result.rmse, result.mean, result.median, result.min, result.max
        ));
        write_text(out, &csv)?;
    }
    if let Some(dist) = &args.dist {
        let series: Vec<f64> = result.errors.iter().map(|&(_, e)| e).collect();
        let d = error_distribution(&series, args.bins)?;
        let mut csv = String::from("bin_low,bin_high,count\n");
        for &(lo, hi, c) in &d.bins {
            csv.push_str(&format!("{lo},{hi},{c}\n"));
        }
        csv.push_str(&format!("# gaussian mean={} sigma={}\n", d.mean, d.sigma));
        write_text(dist, &csv)?;
    }

    ctx.emit(
        format!(
            "rmse={:.6} mean={:.6} median={:.6} min={:.6} max={:.6} poses={}",
            result.rmse,
            result.mean,
            result.median,
            result.min,
            result.max,
            result.errors.len()
        ),
        serde_json::json!({
            "rmse": result.rmse,
            "mean": result.mean,
            "median": result.median,
            "min": result.min,
            "max": result.max,
            "poses": result.errors.len(),
        }),
    );
    Ok(())
}

fn run_rpe(args: &RpeArgs, ctx: &Context) -> Result<()> {
    anyhow::ensure!(args.delta >= 1, "--delta must be at least 1");
    let est = load(&args.est, "--est")?;
    let reference = load(&args.reference, "--ref")?;
    let result = rpe(&est, &reference, args.delta, args.max_diff)?;

    if let Some(out) = &args.out {
        let mut csv = String::from("timestamp,translation_error,rotation_error_rad\n");
        for &(t, te, re) in &result.errors {
            csv.push_str(&format!("{t},{te},{re}\n"));
        }
        csv.push_str(&format!(
            "# summary rpe_t={} rpe_r_rad={} delta={}\n",
            result.translation_rmse, result.rotation_rmse, result.delta
        ));
        write_text(out, &csv)?;
    }

    ctx.emit(
        format!(
            "rpe_t={:.6} rpe_r_deg={:.6} delta={} steps={}",
            result.translation_rmse,
            result.rotation_rmse_degrees(),
            result.delta,
            result.errors.len()
        ),
        serde_json::json!({
            "rpe_t": result.translation_rmse,
            "rpe_r_rad": result.rotation_rmse,
            "rpe_r_deg": result.rotation_rmse_degrees(),
            "delta": result.delta,
            "steps": result.errors.len(),
        }),
    );
    Ok(())
}
