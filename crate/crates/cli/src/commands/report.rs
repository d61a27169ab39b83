use anyhow::Result;
use clap::{Args, Subcommand};

use visloop_core::improvement_report;

use crate::context::Context;

#[derive(Subcommand)]
pub enum ReportCommand {
    /// Percentage improvement of one error metric over a baseline.
    Improvement(ImprovementArgs),
}

#[derive(Args)]
pub struct ImprovementArgs {
    /// Baseline metric value (must be positive; 0 conventionally marks a
    /// failed run and is rejected rather than treated as zero error).
    #[arg(long)]
    baseline: f64,
    /// Improved metric value.
    #[arg(long)]
    improved: f64,
}

pub fn run(command: &ReportCommand, ctx: &Context) -> Result<()> {
    match command {
        ReportCommand::Improvement(args) => {
            let percent = improvement_report(args.baseline, args.improved)?;
            ctx.emit(
                format!("{percent:.1}%"),
                serde_json::json!({
                    "baseline": args.baseline,
                    "improved": args.improved,
                    "improvement_percent": percent,
                }),
            );
            Ok(())
        }
    }
}
