pub mod db;
pub mod eval;
pub mod loop_close;
pub mod matching;
pub mod report;
pub mod synth;
pub mod vocab;

use anyhow::{Context as _, Result};
use std::path::Path;

pub(crate) fn write_text(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}
