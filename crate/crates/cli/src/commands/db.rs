use std::path::PathBuf;

use anyhow::{Context as _, Result};
use clap::{Args, Subcommand, ValueEnum};

use visloop_core::io::{load_database, load_feature_dir, read_features, read_vocabulary, save_database, read_trajectory_auto};
use visloop_core::matching::FeatureSet;
use visloop_core::placedb::{Keyframe, KeyframeDatabase, QueryParams};
use visloop_core::{PoseSE3, Trajectory};

use super::write_text;
use crate::context::Context;

#[derive(Subcommand)]
pub enum DbCommand {
    /// Insert keyframes into a database file (created when missing).
    Add(AddArgs),
    /// Rank loop candidates for a query frame.
    Query(QueryArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IdOrder {
    /// Sort inserted frames by their capture timestamp.
    Timestamp,
    /// Keep the order the files were given in.
    Given,
}

#[derive(Args)]
pub struct AddArgs {
    /// Database file to create or extend.
    #[arg(long, value_name = "FILE")]
    db: PathBuf,
    #[arg(long, value_name = "FILE")]
    vocab: PathBuf,
    /// Feature files or directories to insert.
    #[arg(long, value_name = "PATH", num_args = 1.., required = true)]
    features: Vec<PathBuf>,
    /// Keyframe id assignment order.
    #[arg(long, value_enum, default_value_t = IdOrder::Timestamp)]
    id_by: IdOrder,
    /// Trajectory supplying insertion poses, matched by timestamp
    /// (identity poses when omitted).
    #[arg(long, value_name = "FILE")]
    traj: Option<PathBuf>,
    /// Maximum timestamp difference when looking up poses.
    #[arg(long, default_value_t = 0.02)]
    max_diff: f64,
}

#[derive(Args)]
pub struct QueryArgs {
    #[arg(long, value_name = "FILE")]
    db: PathBuf,
    #[arg(long, value_name = "FILE")]
    vocab: PathBuf,
    /// Query frame features.
    #[arg(long, value_name = "FILE")]
    features: PathBuf,
    #[arg(long, default_value_t = 5)]
    top: usize,
    /// Candidates must be at least this many keyframes older.
    #[arg(long, default_value_t = 30)]
    min_gap: u64,
    /// Keep only candidates scoring at least this fraction of the best
    /// recent-window score.
    #[arg(long)]
    min_score_ratio: Option<f64>,
    /// Candidate CSV: rank,id,timestamp,score.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

pub fn run(command: &DbCommand, ctx: &Context) -> Result<()> {
    match command {
        DbCommand::Add(args) => add(args, ctx),
        DbCommand::Query(args) => query(args, ctx),
    }
}

fn load_inputs(paths: &[PathBuf]) -> Result<Vec<FeatureSet>> {
    let mut sets = Vec::new();
    for path in paths {
        if path.is_dir() {
            sets.extend(
                load_feature_dir(path)
                    .with_context(|| format!("loading directory {}", path.display()))?,
            );
        } else {
            sets.push(read_features(path).with_context(|| format!("reading {}", path.display()))?);
        }
    }
    Ok(sets)
}

fn nearest_pose(traj: &Trajectory, timestamp: f64, max_diff: f64) -> Option<PoseSE3> {
    traj.iter()
        .min_by(|a, b| {
            (a.timestamp - timestamp)
                .abs()
                .partial_cmp(&(b.timestamp - timestamp).abs())
                .expect("finite timestamps")
        })
        .filter(|p| (p.timestamp - timestamp).abs() <= max_diff)
        .copied()
}

fn add(args: &AddArgs, ctx: &Context) -> Result<()> {
    let tree = read_vocabulary(&args.vocab).context("reading vocabulary")?;
    let mut db = if args.db.exists() {
        load_database(&args.db).context("loading database")?
    } else {
        KeyframeDatabase::new()
    };
    let trajectory = args
        .traj
        .as_ref()
        .map(|p| read_trajectory_auto(p).context("reading trajectory"))
        .transpose()?;

    let mut sets = load_inputs(&args.features)?;
    if args.id_by == IdOrder::Timestamp {
        sets.sort_by(|a, b| a.timestamp.partial_cmp(&b.timestamp).expect("finite timestamps"));
    }

    let added = sets.len();
    for set in sets {
        let pose = match &trajectory {
            Some(traj) => nearest_pose(traj, set.timestamp, args.max_diff).ok_or_else(|| {
                anyhow::anyhow!(
                    "no trajectory pose within {} s of frame at t={}",
                    args.max_diff,
                    set.timestamp
                )
            })?,
            None => PoseSE3::identity(set.timestamp),
        };
        let id = db.add_keyframe(Keyframe {
            timestamp: set.timestamp,
            bow: tree.transform(&set),
            features: set,
            pose,
        });
        ctx.note(format!("keyframe {id} added"));
    }
    save_database(&args.db, &db).context("saving database")?;
    ctx.emit(
        format!("added={added} total={}", db.len()),
        serde_json::json!({ "added": added, "total": db.len() }),
    );
    Ok(())
}

fn query(args: &QueryArgs, ctx: &Context) -> Result<()> {
    let tree = read_vocabulary(&args.vocab).context("reading vocabulary")?;
    let db = load_database(&args.db).context("loading database")?;
    let set = read_features(&args.features).context("reading query features")?;
    let bow = tree.transform(&set);
    let params = QueryParams {
        top_n: args.top,
        min_gap_keyframes: args.min_gap,
        min_score_ratio: args.min_score_ratio,
    };
    let candidates = db.query(&bow, &params);

    if let Some(out) = &args.out {
        let mut csv = String::from("rank,id,timestamp,score\n");
        for (rank, c) in candidates.iter().enumerate() {
            let t = db.record(c.id).expect("candidate ids are stored").timestamp;
            csv.push_str(&format!("{},{},{},{}\n", rank + 1, c.id, t, c.score));
        }
        write_text(out, &csv)?;
    }

    let best = candidates.first();
    ctx.emit(
        match best {
            Some(c) => format!(
                "candidates={} best_id={} best_score={:.6}",
                candidates.len(),
                c.id,
                c.score
            ),
            None => "candidates=0".to_string(),
        },
        serde_json::json!({
            "candidates": candidates
                .iter()
                .map(|c| serde_json::json!({ "id": c.id, "score": c.score }))
                .collect::<Vec<_>>(),
        }),
    );
    Ok(())
}
