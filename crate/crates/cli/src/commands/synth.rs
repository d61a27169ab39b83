use std::path::PathBuf;

use anyhow::{Context as _, Result};
use clap::{Args, Subcommand};

use visloop_core::io::{save_feature_dir, write_features, write_trajectory_tum};
use visloop_core::synth::{
    gen_drift_trajectory, gen_loop_closure_keyframes, gen_matched_scene, mild_homography,
    SceneSpec,
};

use super::write_text;
use crate::context::Context;

#[derive(Subcommand)]
pub enum SynthCommand {
    /// Two-view scene with a planted homography and labeled outliers.
    Scene(SceneArgs),
    /// Drifted loop trajectory (plus optional per-keyframe features).
    Drift(DriftArgs),
}

#[derive(Args)]
pub struct SceneArgs {
    /// Number of feature pairs.
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Fraction of pairs turned into clutter, in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    outliers: f64,
    /// Gaussian pixel noise on true correspondences.
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    /// Descriptor perturbation before renormalizing.
    #[arg(long, default_value_t = 0.05)]
    desc_noise: f64,
    /// Minimum spacing between frame-A feature locations (0 = off).
    #[arg(long, default_value_t = 0.0)]
    min_spacing: f64,
    #[arg(long, default_value_t = 752.0)]
    width: f64,
    #[arg(long, default_value_t = 480.0)]
    height: f64,
    /// Frame A feature file.
    #[arg(long, value_name = "FILE")]
    out_a: PathBuf,
    /// Frame B feature file.
    #[arg(long, value_name = "FILE")]
    out_b: PathBuf,
    /// Ground-truth labels CSV (`index,inlier`).
    #[arg(long, value_name = "FILE")]
    truth: Option<PathBuf>,
}

#[derive(Args)]
pub struct DriftArgs {
    /// Number of trajectory nodes.
    #[arg(long, default_value_t = 100)]
    nodes: usize,
    /// Circle radius in meters.
    #[arg(long, default_value_t = 10.0)]
    radius: f64,
    /// Per-step drift magnitude in meters.
    #[arg(long, default_value_t = 0.012)]
    drift: f64,
    /// Ground-truth trajectory output (TUM).
    #[arg(long, value_name = "FILE")]
    out_gt: PathBuf,
    /// Drifted trajectory output (TUM).
    #[arg(long, value_name = "FILE")]
    out_est: PathBuf,
    /// Revisit pairs CSV (`from,to`).
    #[arg(long, value_name = "FILE")]
    loops: Option<PathBuf>,
    /// Directory for per-keyframe feature files (revisits re-observe the
    /// earlier scene), ready for `loop-close`.
    #[arg(long, value_name = "DIR")]
    out_keyframes: Option<PathBuf>,
    /// Features per keyframe when `--out-keyframes` is given.
    #[arg(long, default_value_t = 150)]
    features_per_frame: usize,
    /// Pixel noise on revisit re-observations.
    #[arg(long, default_value_t = 0.5)]
    pixel_noise: f64,
    /// Descriptor noise on revisit re-observations.
    #[arg(long, default_value_t = 0.02)]
    desc_noise: f64,
}

pub fn run(command: &SynthCommand, ctx: &Context) -> Result<()> {
    match command {
        SynthCommand::Scene(args) => scene(args, ctx),
        SynthCommand::Drift(args) => drift(args, ctx),
    }
}

fn scene(args: &SceneArgs, ctx: &Context) -> Result<()> {
    anyhow::ensure!(
        (0.0..1.0).contains(&args.outliers),
        "--outliers must lie in [0, 1)"
    );
    let spec = SceneSpec {
        homography: mild_homography(),
        feature_count: args.n,
        inlier_noise_sigma: args.noise,
        outlier_fraction: args.outliers,
        descriptor_noise_sigma: args.desc_noise,
        min_spacing: args.min_spacing,
        width: args.width,
        height: args.height,
        seed: ctx.seed,
    };
    let scene = gen_matched_scene(&spec);
    write_features(&args.out_a, &scene.set_a).context("writing frame A")?;
    write_features(&args.out_b, &scene.set_b).context("writing frame B")?;
    if let Some(truth) = &args.truth {
        let mut csv = String::from("index,inlier\n");
        for (i, &label) in scene.inlier_labels.iter().enumerate() {
            csv.push_str(&format!("{i},{}\n", label as u8));
        }
        write_text(truth, &csv)?;
    }
    let outlier_count = scene.inlier_labels.iter().filter(|&&l| !l).count();
    ctx.emit(
        format!("features={} outliers={outlier_count} seed={}", args.n, ctx.seed),
        serde_json::json!({
            "features": args.n,
            "outliers": outlier_count,
            "seed": ctx.seed,
        }),
    );
    Ok(())
}

fn drift(args: &DriftArgs, ctx: &Context) -> Result<()> {
    let scenario = gen_drift_trajectory(args.nodes, args.radius, args.drift, ctx.seed);
    write_trajectory_tum(&args.out_gt, &scenario.ground_truth).context("writing ground truth")?;
    write_trajectory_tum(&args.out_est, &scenario.drifted).context("writing drifted trajectory")?;
    if let Some(loops) = &args.loops {
        let mut csv = String::from("from,to\n");
        for &(a, b) in &scenario.loop_pairs {
            csv.push_str(&format!("{a},{b}\n"));
        }
        write_text(loops, &csv)?;
    }
    if let Some(dir) = &args.out_keyframes {
        let sets = gen_loop_closure_keyframes(
            &scenario,
            args.features_per_frame,
            args.pixel_noise,
            args.desc_noise,
            ctx.seed,
        );
        save_feature_dir(dir, &sets).context("writing keyframe features")?;
        ctx.note(format!("wrote {} keyframe feature files", sets.len()));
    }
    ctx.emit(
        format!(
            "nodes={} loop_pairs={} seed={}",
            args.nodes,
            scenario.loop_pairs.len(),
            ctx.seed
        ),
        serde_json::json!({
            "nodes": args.nodes,
            "loop_pairs": scenario.loop_pairs.len(),
            "seed": ctx.seed,
        }),
    );
    Ok(())
}
