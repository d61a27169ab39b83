use std::path::PathBuf;

use anyhow::{Context as _, Result};
use clap::Args;

use visloop_core::io::{
    load_feature_dir, read_trajectory_auto, read_vocabulary, write_pose_graph_g2o,
    write_trajectory_tum,
};
use visloop_core::loopgraph::{close_loops, LoopCloseConfig, VerifyConfig};
use visloop_core::placedb::{Keyframe, KeyframeDatabase, QueryParams};

use crate::context::Context;

#[derive(Args)]
pub struct LoopCloseArgs {
    /// Input (drifted) trajectory, TUM format.
    #[arg(long, value_name = "FILE")]
    traj: PathBuf,
    /// Directory of per-keyframe feature files.
    #[arg(long, value_name = "DIR")]
    keyframes: PathBuf,
    #[arg(long, value_name = "FILE")]
    vocab: PathBuf,
    /// Corrected trajectory output, TUM format.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[arg(long)]
    min_gap: Option<u64>,
    /// Retrieval candidates verified per keyframe.
    #[arg(long)]
    top: Option<usize>,
    /// Minimum surviving inliers to accept a loop.
    #[arg(long)]
    min_inliers: Option<usize>,
    #[arg(long, value_name = "PX")]
    mask_radius: Option<f64>,
    #[arg(long, value_name = "UNITS")]
    ransac_thresh: Option<f64>,
    #[arg(long)]
    min_similarity: Option<f64>,
    /// Maximum timestamp difference when pairing keyframes with poses.
    #[arg(long, default_value_t = 0.02)]
    max_diff: f64,
    /// Also dump the constructed pose graph in g2o-style text.
    #[arg(long, value_name = "FILE")]
    dump_graph: Option<PathBuf>,
}

pub fn run(args: &LoopCloseArgs, ctx: &Context) -> Result<()> {
    let trajectory = read_trajectory_auto(&args.traj).context("reading trajectory")?;
    let sets = load_feature_dir(&args.keyframes).context("loading keyframe features")?;
    anyhow::ensure!(!sets.is_empty(), "no keyframe feature files found");
    let tree = read_vocabulary(&args.vocab).context("reading vocabulary")?;
    ctx.note(format!(
        "{} poses, {} keyframes, {} words",
        trajectory.len(),
        sets.len(),
        tree.word_count()
    ));

    let mut db = KeyframeDatabase::new();
    for set in sets {
        let pose = trajectory
            .iter()
            .min_by(|a, b| {
                (a.timestamp - set.timestamp)
                    .abs()
                    .partial_cmp(&(b.timestamp - set.timestamp).abs())
                    .expect("finite timestamps")
            })
            .filter(|p| (p.timestamp - set.timestamp).abs() <= args.max_diff)
            .copied()
            .ok_or_else(|| {
                anyhow::anyhow!(
                    "no trajectory pose within {} s of keyframe at t={}",
                    args.max_diff,
                    set.timestamp
                )
            })?;
        db.add_keyframe(Keyframe {
            timestamp: set.timestamp,
            bow: tree.transform(&set),
            features: set,
            pose,
        });
    }

    // Keyframe verification defaults favor precision: a tightened
    // threshold and a similarity gate that makes non-revisits cheap.
    let match_config = ctx.match_config(
        args.mask_radius,
        args.ransac_thresh.or(Some(1.5)),
        args.min_similarity.or(Some(0.5)),
        None,
        None,
        None,
        false,
    )?;
    let defaults = LoopCloseConfig::default();
    let config = LoopCloseConfig {
        query: QueryParams {
            top_n: ctx.resolve(args.top, "top_n", defaults.query.top_n)?,
            min_gap_keyframes: ctx.resolve(args.min_gap, "min_gap", defaults.query.min_gap_keyframes)?,
            min_score_ratio: None,
        },
        verify: VerifyConfig {
            match_config,
            min_inliers: ctx.resolve(args.min_inliers, "min_inliers", defaults.verify.min_inliers)?,
            ..VerifyConfig::default()
        },
        ..defaults
    };

    let outcome = close_loops(&db, &config, ctx.seed)?;
    write_trajectory_tum(&args.out, &outcome.corrected).context("writing corrected trajectory")?;
    if let Some(dump) = &args.dump_graph {
        match &outcome.graph {
            Some(graph) => write_pose_graph_g2o(dump, graph).context("dumping pose graph")?,
            None => ctx.note("no loop edges; pose graph not dumped"),
        }
    }

    let (initial_cost, final_cost, converged) = match &outcome.optimization {
        Some(o) => (o.initial_cost, o.final_cost, o.converged),
        None => (0.0, 0.0, true),
    };
    ctx.emit(
        format!(
            "keyframes={} loop_edges={} initial_cost={:.6} final_cost={:.6} converged={}",
            db.len(),
            outcome.edges.len(),
            initial_cost,
            final_cost,
            converged
        ),
        serde_json::json!({
            "keyframes": db.len(),
            "loop_edges": outcome
                .edges
                .iter()
                .map(|e| serde_json::json!({ "from": e.from, "to": e.to, "inliers": e.inlier_count }))
                .collect::<Vec<_>>(),
            "initial_cost": initial_cost,
            "final_cost": final_cost,
            "converged": converged,
        }),
    );
    Ok(())
}
