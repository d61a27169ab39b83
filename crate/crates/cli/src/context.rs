//! Shared invocation state: global flags plus the parsed configuration
//! file, with typed access that lets explicit CLI flags win.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{Context as _, Result};

use visloop_core::io::read_config;
use visloop_core::{Intrinsics, MatchConfig, TransferErrorMode};

pub struct Context {
    pub seed: u64,
    pub verbose: bool,
    pub json: bool,
    config: HashMap<String, String>,
}

impl Context {
    pub fn new(seed: u64, config: Option<&Path>, verbose: bool, json: bool) -> Result<Self> {
        let config = match config {
            Some(path) => {
                read_config(path).with_context(|| format!("reading {}", path.display()))?
            }
            None => HashMap::new(),
        };
        Ok(Self {
            seed,
            verbose,
            json,
            config,
        })
    }

    pub fn note(&self, message: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", message.as_ref());
        }
    }

    /// Print the command summary: one stable text line, or one JSON
    /// object under `--json`.
    pub fn emit(&self, line: String, json: serde_json::Value) {
        if self.json {
            println!("{json}");
        } else {
            println!("{line}");
        }
    }

    /// Config-file value parsed as `T` (None when the key is absent).
    pub fn config_value<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.config.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| anyhow::anyhow!("config key `{key}` = {raw:?}: {e}")),
        }
    }

    /// Flag value if given, else the config-file value, else the default.
    pub fn resolve<T: FromStr + Copy>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(flag.or(self.config_value(key)?).unwrap_or(default))
    }

    /// Matching configuration assembled from flags, the configuration
    /// file, and the built-in defaults (that order of precedence).
    #[allow(clippy::too_many_arguments)]
    pub fn match_config(
        &self,
        mask_radius: Option<f64>,
        inlier_threshold: Option<f64>,
        min_similarity: Option<f64>,
        min_matches: Option<usize>,
        max_iterations: Option<usize>,
        confidence: Option<f64>,
        symmetric: bool,
    ) -> Result<MatchConfig> {
        let defaults = MatchConfig::default();
        let symmetric = symmetric || self.config_value::<bool>("symmetric_error")?.unwrap_or(false);

        // Normalized-plane RANSAC when the config carries intrinsics; the
        // threshold is then interpreted on the normalized plane.
        let fx = self.config_value::<f64>("fx")?;
        let fy = self.config_value::<f64>("fy")?;
        let cx = self.config_value::<f64>("cx")?;
        let cy = self.config_value::<f64>("cy")?;
        let intrinsics = match (fx, fy, cx, cy) {
            (Some(fx), Some(fy), Some(cx), Some(cy)) => Some(Intrinsics::new(fx, fy, cx, cy)),
            (None, None, None, None) => None,
            _ => anyhow::bail!("intrinsics need all of fx, fy, cx, cy in the config"),
        };

        let config = MatchConfig {
            mask_radius: self.resolve(mask_radius, "mask_radius", defaults.mask_radius)?,
            inlier_threshold: self.resolve(
                inlier_threshold,
                "ransac_thresh",
                defaults.inlier_threshold,
            )?,
            min_similarity: self.resolve(min_similarity, "min_similarity", defaults.min_similarity)?,
            min_matches: self.resolve(min_matches, "min_matches", defaults.min_matches)?,
            max_iterations: self.resolve(max_iterations, "max_iterations", defaults.max_iterations)?,
            confidence: self.resolve(confidence, "confidence", defaults.confidence)?,
            error_mode: if symmetric {
                TransferErrorMode::Symmetric
            } else {
                TransferErrorMode::Forward
            },
            intrinsics,
        };
        anyhow::ensure!(config.mask_radius >= 0.0, "mask radius must be >= 0");
        anyhow::ensure!(config.inlier_threshold > 0.0, "ransac threshold must be > 0");
        anyhow::ensure!(
            config.confidence > 0.0 && config.confidence < 1.0,
            "confidence must lie in (0, 1)"
        );
        Ok(config)
    }
}
