//! Trainable hierarchical bag-of-words vocabulary over 256-d unit
//! descriptors.
//!
//! Training clusters the corpus descriptors with spherical k-means,
//! recursively to depth `L` with branching factor `k`; the leaves are the
//! visual words. Images become sparse TF-IDF [`BowVector`]s, L1
//! normalized, compared with the L1 score
//! `s(v, w) = 1 - 0.5 * sum(|v_i - w_i|)`.

mod kmeans;

pub use kmeans::{kmeans, nearest_centroid, KMeansResult};

use thiserror::Error;

use crate::matching::{Descriptor, FeatureSet};
use crate::rng::{mix64, SplitMix64};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Lloyd iteration cap used during vocabulary training.
const TRAIN_KMEANS_ITERS: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VocabError {
    #[error("cannot train a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("invalid vocabulary tree: {0}")]
    InvalidTree(String),
}

/// One node of the vocabulary tree. Leaves carry a word id and an IDF
/// weight; internal nodes only route the descent.
#[derive(Debug, Clone, PartialEq)]
pub struct VocabNode {
    /// Parent index; `None` only for the root. Parents always precede
    /// children in the node array.
    pub parent: Option<u32>,
    pub centroid: Descriptor,
    /// IDF weight `ln(N / n_word)`; 0 for internal nodes and for leaves
    /// never hit by a training image.
    pub weight: f64,
    pub word_id: Option<u32>,
}

/// Hierarchical visual dictionary. Training is single-threaded and
/// deterministic; a trained tree is immutable, so quantization and
/// transforms may run from any number of threads.
#[derive(Debug, Clone)]
pub struct VocabularyTree {
    branching: u32,
    depth: u32,
    nodes: Vec<VocabNode>,
    /// Child indices per node, ascending (so dot-product ties resolve to
    /// the lowest node index).
    children: Vec<Vec<u32>>,
    word_to_node: Vec<u32>,
    /// Number of images the vocabulary was trained on (0 after reload).
    pub corpus_size: u64,
    /// Seed the vocabulary was trained with (0 after reload).
    pub training_seed: u64,
}

impl VocabularyTree {
    pub fn branching(&self) -> u32 {
        self.branching
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn nodes(&self) -> &[VocabNode] {
        &self.nodes
    }

    /// Number of visual words (leaves).
    pub fn word_count(&self) -> u32 {
        self.word_to_node.len() as u32
    }

    pub fn word_weight(&self, word: u32) -> f64 {
        self.nodes[self.word_to_node[word as usize] as usize].weight
    }

    /// Rebuild a tree from raw nodes, validating the structural
    /// invariants (used by deserialization).
    pub fn from_nodes(
        branching: u32,
        depth: u32,
        nodes: Vec<VocabNode>,
    ) -> Result<Self, VocabError> {
        if nodes.is_empty() {
            return Err(VocabError::InvalidTree("no nodes".into()));
        }
        if branching < 2 {
            return Err(VocabError::InvalidTree(format!(
                "branching factor {branching} < 2"
            )));
        }
        if nodes[0].parent.is_some() {
            return Err(VocabError::InvalidTree("node 0 must be the root".into()));
        }
        let mut children: Vec<Vec<u32>> = vec![Vec::new(); nodes.len()];
        let mut node_depth = vec![0u32; nodes.len()];
        for (i, node) in nodes.iter().enumerate().skip(1) {
            let Some(p) = node.parent else {
                return Err(VocabError::InvalidTree(format!("node {i} has no parent")));
            };
            if (p as usize) >= i {
                return Err(VocabError::InvalidTree(format!(
                    "node {i} has parent {p}; parents must precede children"
                )));
            }
            node_depth[i] = node_depth[p as usize] + 1;
            if node_depth[i] > depth {
                return Err(VocabError::InvalidTree(format!(
                    "node {i} deeper than the declared depth {depth}"
                )));
            }
            children[p as usize].push(i as u32);
        }
        let mut words: Vec<(u32, u32)> = Vec::new();
        for (i, node) in nodes.iter().enumerate() {
            if !node.weight.is_finite() || node.weight < 0.0 {
                return Err(VocabError::InvalidTree(format!(
                    "node {i} has invalid weight {}",
                    node.weight
                )));
            }
            if children[i].len() > branching as usize {
                return Err(VocabError::InvalidTree(format!(
                    "node {i} has {} children, more than the branching factor",
                    children[i].len()
                )));
            }
            match node.word_id {
                Some(w) => {
                    if !children[i].is_empty() {
                        return Err(VocabError::InvalidTree(format!(
                            "node {i} is a word but has children"
                        )));
                    }
                    words.push((w, i as u32));
                }
                None => {
                    if children[i].is_empty() {
                        return Err(VocabError::InvalidTree(format!(
                            "internal node {i} has no children"
                        )));
                    }
                }
            }
        }
        words.sort_unstable();
        for (expect, &(w, _)) in words.iter().enumerate() {
            if w as usize != expect {
                return Err(VocabError::InvalidTree(format!(
                    "word ids are not dense: expected {expect}, found {w}"
                )));
            }
        }
        let word_to_node = words.into_iter().map(|(_, n)| n).collect();
        Ok(Self {
            branching,
            depth,
            nodes,
            children,
            word_to_node,
            corpus_size: 0,
            training_seed: 0,
        })
    }

    /// Word id of a descriptor: from the root, repeatedly descend into
    /// the child with the highest dot-product similarity (ties to the
    /// lowest node index).
    pub fn quantize(&self, descriptor: &Descriptor) -> u32 {
        let mut node = 0usize;
        loop {
            let node_children = &self.children[node];
            if node_children.is_empty() {
                return self.nodes[node]
                    .word_id
                    .expect("childless nodes are words by construction");
            }
            let mut best = node_children[0] as usize;
            let mut best_sim = f64::NEG_INFINITY;
            for &c in node_children {
                let s = descriptor.dot(&self.nodes[c as usize].centroid);
                if s > best_sim {
                    best_sim = s;
                    best = c as usize;
                }
            }
            node = best;
        }
    }

    /// TF-IDF bag-of-words vector of an image: per visited word,
    /// term frequency times the word's IDF weight, then L1-normalized.
    /// Words with zero IDF drop out; an all-zero image yields an empty
    /// vector.
    pub fn transform(&self, features: &FeatureSet) -> BowVector {
        let mut counts: std::collections::BTreeMap<u32, u64> = std::collections::BTreeMap::new();
        for f in &features.features {
            *counts.entry(self.quantize(&f.descriptor)).or_insert(0) += 1;
        }
        BowVector::from_raw_weights(
            counts
                .into_iter()
                .map(|(w, tf)| (w, tf as f64 * self.word_weight(w))),
        )
    }
}

/// Sparse, L1-normalized word-weight vector of one image. Entries are
/// sorted by word id and strictly positive; the vector is empty when no
/// visited word carries IDF weight.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BowVector {
    entries: Vec<(u32, f64)>,
}

impl BowVector {
    /// Build from raw non-negative weights: drops zeros, merges
    /// duplicate ids, L1-normalizes.
    pub fn from_raw_weights(weights: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut entries: Vec<(u32, f64)> = Vec::new();
        for (w, x) in weights {
            assert!(x >= 0.0 && x.is_finite(), "raw weight must be non-negative");
            if x > 0.0 {
                entries.push((w, x));
            }
        }
        entries.sort_by_key(|&(w, _)| w);
        entries.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        let total: f64 = entries.iter().map(|&(_, x)| x).sum();
        if total > 0.0 {
            for e in &mut entries {
                e.1 /= total;
            }
        }
        Self { entries }
    }

    /// Reconstruct from entries that are already normalized (for
    /// deserialization): ids strictly ascending, weights positive, L1
    /// norm within 1e-9 of one. Entries are stored bit-exact.
    pub fn from_normalized_entries(entries: Vec<(u32, f64)>) -> Result<Self, VocabError> {
        for pair in entries.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(VocabError::InvalidTree(format!(
                    "bow word ids not strictly ascending at {}",
                    pair[1].0
                )));
            }
        }
        if entries.iter().any(|&(_, x)| !x.is_finite() || x <= 0.0) {
            return Err(VocabError::InvalidTree("bow weights must be positive".into()));
        }
        let total: f64 = entries.iter().map(|&(_, x)| x).sum();
        if !entries.is_empty() && (total - 1.0).abs() > 1e-9 {
            return Err(VocabError::InvalidTree(format!(
                "bow L1 norm {total} is not 1"
            )));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn l1_norm(&self) -> f64 {
        self.entries.iter().map(|&(_, x)| x).sum()
    }

    /// Iterate over the ids in this vector.
    pub fn word_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|&(w, _)| w)
    }
}

/// L1 similarity of two L1-normalized vectors:
/// `1 - 0.5 * sum(|v1_i - v2_i|)`, in `[0, 1]`, symmetric, 1 on equal
/// vectors.
pub fn score(v1: &BowVector, v2: &BowVector) -> f64 {
    let (a, b) = (v1.entries(), v2.entries());
    let (mut i, mut j) = (0usize, 0usize);
    let mut abs_diff = 0.0;
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Equal => {
                abs_diff += (a[i].1 - b[j].1).abs();
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => {
                abs_diff += a[i].1;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                abs_diff += b[j].1;
                j += 1;
            }
        }
    }
    abs_diff += a[i..].iter().map(|&(_, x)| x).sum::<f64>();
    abs_diff += b[j..].iter().map(|&(_, x)| x).sum::<f64>();
    (1.0 - 0.5 * abs_diff).clamp(0.0, 1.0)
}

/// Train a vocabulary tree by recursive k-means over every descriptor of
/// the corpus, then compute IDF weights from the corpus images.
///
/// Deterministic for fixed `(corpus, branching, depth, seed)`: each
/// node's k-means seed is a pure function of the seed and the node's path
/// from the root, so subtrees are stable under depth changes.
pub fn train_vocabulary(
    corpus: &[FeatureSet],
    branching: u32,
    depth: u32,
    seed: u64,
) -> Result<VocabularyTree, VocabError> {
    assert!(branching >= 2, "branching factor must be >= 2");
    assert!(depth >= 1, "depth must be >= 1");
    let descriptors: Vec<&Descriptor> = corpus
        .iter()
        .flat_map(|set| set.features.iter().map(|f| &f.descriptor))
        .collect();
    if corpus.is_empty() || descriptors.is_empty() {
        return Err(VocabError::EmptyCorpus);
    }

    let mut builder = TreeBuilder {
        branching,
        depth,
        seed,
        nodes: Vec::new(),
        children: Vec::new(),
        word_to_node: Vec::new(),
        descriptors: &descriptors,
    };
    let all: Vec<usize> = (0..descriptors.len()).collect();
    let root_centroid = mean_of(&descriptors, &all)
        .unwrap_or_else(|| descriptors[0].clone());
    builder.build_node(None, root_centroid, &all, 0, 0);

    let mut tree = VocabularyTree {
        branching,
        depth,
        nodes: builder.nodes,
        children: builder.children,
        word_to_node: builder.word_to_node,
        corpus_size: corpus.len() as u64,
        training_seed: seed,
    };

    // IDF pass: how many corpus images touch each word.
    let mut doc_count = vec![0u64; tree.word_count() as usize];
    for image in corpus {
        let mut seen: Vec<u32> = image
            .features
            .iter()
            .map(|f| tree.quantize(&f.descriptor))
            .collect();
        seen.sort_unstable();
        seen.dedup();
        for w in seen {
            doc_count[w as usize] += 1;
        }
    }
    let n_images = corpus.len() as f64;
    for (word, &count) in doc_count.iter().enumerate() {
        let node = tree.word_to_node[word] as usize;
        tree.nodes[node].weight = if count > 0 {
            (n_images / count as f64).ln()
        } else {
            0.0
        };
    }
    Ok(tree)
}

fn mean_of(descriptors: &[&Descriptor], members: &[usize]) -> Option<Descriptor> {
    let mut acc = [0.0f64; crate::matching::DESCRIPTOR_DIM];
    for &i in members {
        for (a, &v) in acc.iter_mut().zip(descriptors[i].values().iter()) {
            *a += v as f64;
        }
    }
    let n = members.len() as f64;
    let values: Vec<f32> = acc.iter().map(|&a| (a / n) as f32).collect();
    Descriptor::normalized(&values).ok()
}

struct TreeBuilder<'a> {
    branching: u32,
    depth: u32,
    seed: u64,
    nodes: Vec<VocabNode>,
    children: Vec<Vec<u32>>,
    word_to_node: Vec<u32>,
    descriptors: &'a [&'a Descriptor],
}

impl TreeBuilder<'_> {
    /// Depth-first construction. `path` encodes the child slots from the
    /// root so per-node seeds do not depend on sibling subtree sizes.
    fn build_node(
        &mut self,
        parent: Option<u32>,
        centroid: Descriptor,
        members: &[usize],
        level: u32,
        path: u64,
    ) -> u32 {
        let index = self.nodes.len() as u32;
        self.nodes.push(VocabNode {
            parent,
            centroid,
            weight: 0.0,
            word_id: None,
        });
        self.children.push(Vec::new());

        let distinct_member_count = {
            let mut count = 0usize;
            'outer: for (pos, &i) in members.iter().enumerate() {
                for &j in &members[..pos] {
                    if self.descriptors[i] == self.descriptors[j] {
                        continue 'outer;
                    }
                }
                count += 1;
                if count >= 2 {
                    break;
                }
            }
            count
        };

        if level == self.depth || distinct_member_count < 2 {
            let word = self.word_to_node.len() as u32;
            self.nodes[index as usize].word_id = Some(word);
            self.word_to_node.push(index);
            return index;
        }

        let subset: Vec<Descriptor> = members
            .iter()
            .map(|&i| self.descriptors[i].clone())
            .collect();
        let node_seed = SplitMix64::child_seed(self.seed, path);
        let result = kmeans(
            &subset,
            self.branching as usize,
            node_seed,
            TRAIN_KMEANS_ITERS,
        );

        let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); result.centroids.len()];
        for (local, &member) in members.iter().enumerate() {
            clusters[result.assignments[local]].push(member);
        }
        for (slot, cluster) in clusters.iter().enumerate() {
            if cluster.is_empty() {
                continue;
            }
            let child_path = mix64(path ^ GOLDEN_GAMMA.wrapping_mul(slot as u64 + 1));
            let child = self.build_node(
                Some(index),
                result.centroids[slot].clone(),
                cluster,
                level + 1,
                child_path,
            );
            self.children[index as usize].push(child);
        }
        index
    }
}

#[cfg(test)]
mod tests;
