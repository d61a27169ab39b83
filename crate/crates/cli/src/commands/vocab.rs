use std::path::PathBuf;

use anyhow::{Context as _, Result};
use clap::Args;

use visloop_core::io::{load_feature_dir, read_features, write_vocabulary};
use visloop_core::train_vocabulary;
use visloop_core::matching::FeatureSet;

use crate::context::Context;

#[derive(Args)]
pub struct TrainVocabArgs {
    /// Feature files or directories of `.svft` files (the corpus).
    #[arg(long, value_name = "PATH", num_args = 1.., required = true)]
    features: Vec<PathBuf>,
    /// Branching factor.
    #[arg(long, default_value_t = 10)]
    k: u32,
    /// Tree depth.
    #[arg(long, default_value_t = 3)]
    depth: u32,
    /// Vocabulary output file.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

pub fn run(args: &TrainVocabArgs, ctx: &Context) -> Result<()> {
    anyhow::ensure!(args.k >= 2, "--k must be at least 2");
    anyhow::ensure!(args.depth >= 1, "--depth must be at least 1");
    let mut corpus: Vec<FeatureSet> = Vec::new();
    for path in &args.features {
        if path.is_dir() {
            corpus.extend(
                load_feature_dir(path)
                    .with_context(|| format!("loading directory {}", path.display()))?,
            );
        } else {
            corpus.push(
                read_features(path).with_context(|| format!("reading {}", path.display()))?,
            );
        }
    }
    ctx.note(format!("training on {} images", corpus.len()));
    let tree = train_vocabulary(&corpus, args.k, args.depth, ctx.seed)?;
    write_vocabulary(&args.out, &tree).context("writing vocabulary")?;
    ctx.emit(
        format!(
            "images={} words={} nodes={}",
            corpus.len(),
            tree.word_count(),
            tree.nodes().len()
        ),
        serde_json::json!({
            "images": corpus.len(),
            "words": tree.word_count(),
            "nodes": tree.nodes().len(),
            "k": args.k,
            "depth": args.depth,
        }),
    );
    Ok(())
}
