//! Random-sample-consensus homography fitting with an adaptive iteration
//! budget and a least-squares refit on the final consensus set.

use super::dlt::dlt_homography;
use super::{Correspondence, MatchConfig, MatchError, MatchReport, PairOutcome, TransferErrorMode};
use crate::geometry::{Homography, Point2};
use crate::rng::SplitMix64;

/// Per-pair error against a candidate model. The backward direction
/// reuses one inverse computed per model.
struct ModelScorer {
    forward: Homography,
    backward: Option<Homography>,
}

impl ModelScorer {
    fn new(h: &Homography, mode: TransferErrorMode) -> Result<Self, MatchError> {
        let backward = match mode {
            TransferErrorMode::Forward => None,
            TransferErrorMode::Symmetric => Some(h.inverse()?),
        };
        Ok(Self {
            forward: *h,
            backward,
        })
    }

    /// `None` when the projection is degenerate for this pair; such pairs
    /// are never inliers.
    fn error(&self, pa: Point2, pb: Point2) -> Option<f64> {
        let fwd = self.forward.apply(pa).ok()?.distance(&pb);
        match &self.backward {
            None => Some(fwd),
            Some(inv) => {
                let bwd = inv.apply(pb).ok()?.distance(&pa);
                Some(0.5 * (fwd + bwd))
            }
        }
    }
}

fn count_inliers(scorer: &ModelScorer, pairs: &[Correspondence], threshold: f64) -> usize {
    pairs
        .iter()
        .filter(|p| matches!(scorer.error(p.point_a, p.point_b), Some(e) if e < threshold))
        .count()
}

/// Iterations needed so that, with probability `confidence`, at least one
/// minimal sample is outlier-free given the observed inlier ratio.
fn required_iterations(inlier_ratio: f64, confidence: f64, cap: usize) -> usize {
    let w4 = inlier_ratio.powi(4);
    if w4 >= 1.0 {
        return 1;
    }
    if w4 <= 0.0 {
        return cap;
    }
    let n = (1.0 - confidence).ln() / (1.0 - w4).ln();
    if !n.is_finite() || n >= cap as f64 {
        cap
    } else {
        n.ceil().max(1.0) as usize
    }
}

/// Fit a homography to candidate correspondences by RANSAC.
///
/// Repeatedly samples 4 pairs, fits a minimal model, and counts pairs
/// whose transfer error is strictly below `config.inlier_threshold`. The
/// best-consensus model is refit by least squares over all of its inliers
/// and every pair is re-classified against that final model. Deterministic
/// for a fixed seed.
pub fn ransac_homography(
    pairs: &[Correspondence],
    config: &MatchConfig,
    seed: u64,
) -> Result<MatchReport, MatchError> {
    config.assert_valid();
    let needed = config.min_matches.max(4);
    if pairs.len() < needed {
        return Err(MatchError::InsufficientMatches {
            needed,
            got: pairs.len(),
        });
    }

    let n = pairs.len();
    let delta = config.inlier_threshold;
    let mut rng = SplitMix64::new(seed);
    let mut best: Option<(usize, Homography)> = None;
    let mut required = config.max_iterations.max(1);
    let mut iterations = 0;

    while iterations < required {
        iterations += 1;
        let sample = rng.sample_distinct(n, 4);
        let minimal: Vec<(Point2, Point2)> = sample
            .iter()
            .map(|&i| (pairs[i].point_a, pairs[i].point_b))
            .collect();
        let Ok(model) = dlt_homography(&minimal) else {
            continue; // degenerate sample, spend the iteration
        };
        let Ok(scorer) = ModelScorer::new(&model, config.error_mode) else {
            continue;
        };
        let count = count_inliers(&scorer, pairs, delta);
        if best.as_ref().is_none_or(|(c, _)| count > *c) {
            best = Some((count, model));
            required = required_iterations(
                count as f64 / n as f64,
                config.confidence,
                config.max_iterations,
            )
            .max(iterations);
        }
    }

    let (best_count, best_model) = best.ok_or(MatchError::NoConsensus {
        best: 0,
        min: config.min_matches,
    })?;
    if best_count < config.min_matches {
        return Err(MatchError::NoConsensus {
            best: best_count,
            min: config.min_matches,
        });
    }

    // Least-squares refit over the full consensus set, iterated to an
    // inlier-set fixpoint: classify, refit, reclassify, until the set
    // stops changing (or a small cap). Falls back to the last good model
    // if a refit turns out degenerate.
    let mut refined = best_model;
    let mut last_set: Option<Vec<usize>> = None;
    for _ in 0..10 {
        let scorer = ModelScorer::new(&refined, config.error_mode)?;
        let consensus: Vec<usize> = (0..n)
            .filter(|&i| {
                matches!(scorer.error(pairs[i].point_a, pairs[i].point_b), Some(e) if e < delta)
            })
            .collect();
        if consensus.len() < 4 || last_set.as_deref() == Some(&consensus) {
            break;
        }
        let points: Vec<(Point2, Point2)> = consensus
            .iter()
            .map(|&i| (pairs[i].point_a, pairs[i].point_b))
            .collect();
        match dlt_homography(&points) {
            Ok(h) => refined = h,
            Err(_) => break,
        }
        last_set = Some(consensus);
    }

    let final_scorer = ModelScorer::new(&refined, config.error_mode)?;
    let outcomes: Vec<PairOutcome> = pairs
        .iter()
        .map(|&c| {
            let err = final_scorer.error(c.point_a, c.point_b);
            PairOutcome {
                correspondence: c,
                transfer_error: err.unwrap_or(f64::INFINITY),
                is_inlier: matches!(err, Some(e) if e < delta),
            }
        })
        .collect();

    Ok(MatchReport {
        homography: refined,
        outcomes,
        iterations,
    })
}
