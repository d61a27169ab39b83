use std::path::PathBuf;

use anyhow::{Context as _, Result};
use clap::Args;

use visloop_core::enhance_matches;
use visloop_core::io::read_features;

use super::write_text;
use crate::context::Context;

#[derive(Args)]
pub struct MatchArgs {
    #[arg(long, value_name = "FILE")]
    features_a: PathBuf,
    #[arg(long, value_name = "FILE")]
    features_b: PathBuf,
    /// Minimum pixel separation kept between features.
    #[arg(long, value_name = "PX")]
    mask_radius: Option<f64>,
    /// RANSAC inlier threshold (pixels, or normalized-plane units when
    /// the config file supplies intrinsics).
    #[arg(long, value_name = "UNITS")]
    ransac_thresh: Option<f64>,
    /// Drop mutual-nearest-neighbor pairs below this similarity.
    #[arg(long)]
    min_similarity: Option<f64>,
    #[arg(long)]
    min_matches: Option<usize>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    confidence: Option<f64>,
    /// Average the forward and backward transfer errors.
    #[arg(long)]
    symmetric: bool,
    /// Per-pair CSV: idx_a,idx_b,u_a,v_a,u_b,v_b,transfer_error,inlier.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

pub fn run(args: &MatchArgs, ctx: &Context) -> Result<()> {
    let set_a = read_features(&args.features_a).context("reading --features-a")?;
    let set_b = read_features(&args.features_b).context("reading --features-b")?;
    ctx.note(format!(
        "loaded {} and {} features",
        set_a.len(),
        set_b.len()
    ));
    let config = ctx.match_config(
        args.mask_radius,
        args.ransac_thresh,
        args.min_similarity,
        args.min_matches,
        args.max_iterations,
        args.confidence,
        args.symmetric,
    )?;
    let report = enhance_matches(&set_a, &set_b, &config, ctx.seed)?;

    if let Some(out) = &args.out {
        let mut csv = String::from("idx_a,idx_b,u_a,v_a,u_b,v_b,transfer_error,inlier\n");
        for o in &report.outcomes {
            let c = o.correspondence;
            // Pixel locations from the input files, regardless of the
            // coordinate frame RANSAC ran in.
            let pa = set_a.features[c.index_a].location;
            let pb = set_b.features[c.index_b].location;
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                c.index_a, c.index_b, pa.u, pa.v, pb.u, pb.v, o.transfer_error, o.is_inlier as u8
            ));
        }
        write_text(out, &csv)?;
    }

    let mean_error = report.mean_inlier_error().unwrap_or(f64::NAN);
    ctx.emit(
        format!(
            "matches={} inliers={} mean_error={:.6} iterations={}",
            report.outcomes.len(),
            report.inlier_count(),
            mean_error,
            report.iterations
        ),
        serde_json::json!({
            "matches": report.outcomes.len(),
            "inliers": report.inlier_count(),
            "mean_error": mean_error,
            "iterations": report.iterations,
            "homography": report.homography.coeffs().to_vec(),
        }),
    );
    Ok(())
}
