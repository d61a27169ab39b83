//! Keyframe database for loop-closure retrieval: bag-of-words vectors
//! with an inverted index, temporally gated similarity queries, and the
//! retained features needed for later geometric verification.
//!
//! Concurrency contract: inserts take `&mut self` and are serialized by
//! the borrow checker; queries on `&self` may run concurrently.

use std::collections::HashMap;

use crate::geometry::PoseSE3;
use crate::matching::FeatureSet;
use crate::vocab::{score, BowVector};

/// Keyframe data as supplied by the caller; the database assigns the id.
#[derive(Debug, Clone)]
pub struct Keyframe {
    pub timestamp: f64,
    pub bow: BowVector,
    /// Features retained for geometric verification of loop candidates.
    pub features: FeatureSet,
    /// Pose estimate at insertion time.
    pub pose: PoseSE3,
}

/// A stored keyframe. Ids are dense and strictly increasing with
/// insertion order.
#[derive(Debug, Clone)]
pub struct KeyframeRecord {
    pub id: u64,
    pub timestamp: f64,
    pub bow: BowVector,
    pub features: FeatureSet,
    pub pose: PoseSE3,
}

/// Per-word postings `(keyframe id, weight)`, sorted by id (insertion
/// order keeps them sorted for free).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InvertedIndex {
    postings: HashMap<u32, Vec<(u64, f64)>>,
}

impl InvertedIndex {
    fn insert(&mut self, id: u64, bow: &BowVector) {
        for &(word, weight) in bow.entries() {
            self.postings.entry(word).or_default().push((id, weight));
        }
    }

    pub fn posting(&self, word: u32) -> &[(u64, f64)] {
        self.postings.get(&word).map_or(&[], |v| v.as_slice())
    }

    pub fn word_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.postings.keys().copied().collect();
        ids.sort_unstable();
        ids
    }
}

/// A retrieval candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub id: u64,
    pub score: f64,
}

/// Query controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryParams {
    pub top_n: usize,
    /// Candidates must be at least this many keyframes older than the
    /// querying frame.
    pub min_gap_keyframes: u64,
    /// When set, a candidate is kept only if its score reaches this
    /// fraction of the best score inside the recent (gated-out) window.
    /// Disabled by default.
    pub min_score_ratio: Option<f64>,
}

impl Default for QueryParams {
    fn default() -> Self {
        Self {
            top_n: 5,
            min_gap_keyframes: 30,
            min_score_ratio: None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct KeyframeDatabase {
    records: Vec<KeyframeRecord>,
    index: InvertedIndex,
}

impl KeyframeDatabase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a keyframe; returns its assigned id (0, 1, 2, ...).
    pub fn add_keyframe(&mut self, keyframe: Keyframe) -> u64 {
        let id = self.records.len() as u64;
        self.index.insert(id, &keyframe.bow);
        self.records.push(KeyframeRecord {
            id,
            timestamp: keyframe.timestamp,
            bow: keyframe.bow,
            features: keyframe.features,
            pose: keyframe.pose,
        });
        id
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn record(&self, id: u64) -> Option<&KeyframeRecord> {
        self.records.get(id as usize)
    }

    pub fn records(&self) -> &[KeyframeRecord] {
        &self.records
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    /// Loop candidates for a frame that would be inserted next: ranked by
    /// similarity, gated so only keyframes at least `min_gap_keyframes`
    /// older than the querying frame are returned.
    pub fn query(&self, bow: &BowVector, params: &QueryParams) -> Vec<Candidate> {
        self.query_at(self.records.len() as u64, bow, params)
    }

    /// [`KeyframeDatabase::query`] with an explicit querying-frame id;
    /// lets a finished database be re-queried as of any point in time.
    pub fn query_at(&self, current_id: u64, bow: &BowVector, params: &QueryParams) -> Vec<Candidate> {
        let cutoff = current_id.saturating_sub(params.min_gap_keyframes);

        // The index only proposes keyframes sharing at least one word;
        // everything else scores 0 and is omitted.
        let mut proposed: Vec<u64> = bow
            .word_ids()
            .flat_map(|w| self.index.posting(w).iter().map(|&(id, _)| id))
            .filter(|&id| id < cutoff)
            .collect();
        proposed.sort_unstable();
        proposed.dedup();

        let mut candidates: Vec<Candidate> = proposed
            .into_iter()
            .map(|id| Candidate {
                id,
                score: score(bow, &self.records[id as usize].bow),
            })
            .collect();

        if let Some(alpha) = params.min_score_ratio {
            let reference = (cutoff..current_id.min(self.records.len() as u64))
                .map(|id| score(bow, &self.records[id as usize].bow))
                .fold(f64::NAN, f64::max);
            if reference.is_finite() {
                candidates.retain(|c| c.score >= alpha * reference);
            }
        }

        candidates.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .expect("scores are finite")
                .then(a.id.cmp(&b.id))
        });
        candidates.truncate(params.top_n);
        candidates
    }
}
