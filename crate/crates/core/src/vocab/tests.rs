use super::*;
use crate::matching::{Descriptor, Feature, FeatureSet};
use crate::geometry::Point2;
use crate::synth::{gen_descriptor_blobs, gen_feature_set};

fn image_from(descriptors: &[Descriptor], frame_id: u64) -> FeatureSet {
    let features = descriptors
        .iter()
        .enumerate()
        .map(|(i, d)| Feature::new(Point2::pixel(10.0 * i as f64, 5.0), 0.5, d.clone()))
        .collect();
    FeatureSet::new(frame_id, frame_id as f64, features)
}

/// Quantization replayed independently of the tree's own traversal code:
/// children recovered from parent links, dot products re-accumulated.
fn oracle_transform(tree: &VocabularyTree, set: &FeatureSet) -> Vec<(u32, f64)> {
    let nodes = tree.nodes();
    let mut children: Vec<Vec<u32>> = vec![Vec::new(); nodes.len()];
    for (i, n) in nodes.iter().enumerate() {
        if let Some(p) = n.parent {
            children[p as usize].push(i as u32);
        }
    }
    for c in &mut children {
        c.sort_unstable();
    }
    let dot = |a: &Descriptor, b: &Descriptor| -> f64 {
        a.values()
            .iter()
            .zip(b.values().iter())
            .map(|(&x, &y)| x as f64 * y as f64)
            .sum()
    };
    let mut raw: std::collections::BTreeMap<u32, f64> = std::collections::BTreeMap::new();
    for f in &set.features {
        let mut node = 0usize;
        while !children[node].is_empty() {
            let mut best = children[node][0] as usize;
            let mut best_s = f64::NEG_INFINITY;
            for &c in &children[node] {
                let s = dot(&f.descriptor, &nodes[c as usize].centroid);
                if s > best_s {
                    best_s = s;
                    best = c as usize;
                }
            }
            node = best;
        }
        *raw.entry(nodes[node].word_id.unwrap()).or_insert(0.0) += nodes[node].weight;
    }
    let entries: Vec<(u32, f64)> = raw.into_iter().filter(|&(_, x)| x > 0.0).collect();
    let total: f64 = entries.iter().map(|&(_, x)| x).sum();
    entries.into_iter().map(|(w, x)| (w, x / total)).collect()
}

fn dense_score(v1: &BowVector, v2: &BowVector, words: u32) -> f64 {
    let mut a = vec![0.0f64; words as usize];
    let mut b = vec![0.0f64; words as usize];
    for &(w, x) in v1.entries() {
        a[w as usize] = x;
    }
    for &(w, x) in v2.entries() {
        b[w as usize] = x;
    }
    1.0 - 0.5
        * a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
}

#[test]
fn empty_corpus_is_rejected() {
    assert_eq!(
        train_vocabulary(&[], 2, 1, 0).unwrap_err(),
        VocabError::EmptyCorpus
    );
    let featureless = vec![FeatureSet::new(0, 0.0, Vec::new())];
    assert_eq!(
        train_vocabulary(&featureless, 2, 1, 0).unwrap_err(),
        VocabError::EmptyCorpus
    );
}

#[test]
fn single_image_corpus_gets_zero_idf_everywhere() {
    let (descriptors, _) = gen_descriptor_blobs(4, 10, 0.2, 5);
    let corpus = vec![image_from(&descriptors, 0)];
    let tree = train_vocabulary(&corpus, 2, 2, 7).unwrap();
    // ln(1/1) = 0 on every hit leaf, so every image transforms to the
    // empty vector.
    for node in tree.nodes() {
        assert_eq!(node.weight, 0.0);
    }
    assert!(tree.transform(&corpus[0]).is_empty());
}

#[test]
fn two_blob_corpus_splits_into_two_words() {
    let (descriptors, labels) = gen_descriptor_blobs(2, 40, 0.05, 11);
    let corpus = vec![
        image_from(&descriptors[..40], 0),
        image_from(&descriptors[40..], 1),
    ];
    let tree = train_vocabulary(&corpus, 2, 1, 3).unwrap();
    assert_eq!(tree.word_count(), 2);
    let words: Vec<u32> = descriptors.iter().map(|d| tree.quantize(d)).collect();
    for (w, &l) in words.iter().zip(&labels) {
        if l == labels[0] {
            assert_eq!(*w, words[0]);
        } else {
            assert_ne!(*w, words[0]);
        }
    }
}

#[test]
fn leaf_centroids_quantize_to_their_own_words() {
    let (descriptors, _) = gen_descriptor_blobs(2, 30, 0.05, 17);
    let corpus = vec![image_from(&descriptors, 0), image_from(&descriptors, 1)];
    let tree = train_vocabulary(&corpus, 2, 1, 9).unwrap();
    for node in tree.nodes() {
        if let Some(w) = node.word_id {
            assert_eq!(tree.quantize(&node.centroid), w);
        }
    }
}

#[test]
fn single_word_image_transforms_to_unit_weight() {
    let (descriptors, _) = gen_descriptor_blobs(2, 30, 0.03, 23);
    // Two images with disjoint blobs so each word has idf = ln 2 > 0.
    let corpus = vec![
        image_from(&descriptors[..30], 0),
        image_from(&descriptors[30..], 1),
    ];
    let tree = train_vocabulary(&corpus, 2, 1, 4).unwrap();
    let bow = tree.transform(&corpus[0]);
    assert_eq!(bow.entries().len(), 1);
    assert!((bow.entries()[0].1 - 1.0).abs() < 1e-12);
}

#[test]
fn larger_vocabulary_respects_invariants() {
    let corpus: Vec<FeatureSet> = (0..40)
        .map(|i| gen_feature_set(i, i as f64, 50, 752.0, 480.0, 0.0, 1000 + i))
        .collect();
    let tree = train_vocabulary(&corpus, 5, 3, 77).unwrap();
    assert!(tree.word_count() <= 125);
    // from_nodes re-runs the full structural validation.
    VocabularyTree::from_nodes(tree.branching(), tree.depth(), tree.nodes().to_vec())
        .expect("trained tree passes validation");
    // Every transform is L1-normalized.
    for image in &corpus {
        let bow = tree.transform(image);
        if !bow.is_empty() {
            assert!((bow.l1_norm() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn transform_matches_path_replay_oracle() {
    let corpus: Vec<FeatureSet> = (0..20)
        .map(|i| gen_feature_set(i, i as f64, 40, 752.0, 480.0, 0.0, 500 + i))
        .collect();
    let tree = train_vocabulary(&corpus, 3, 2, 13).unwrap();
    for seed in 0..10 {
        let image = gen_feature_set(99, 0.0, 60, 752.0, 480.0, 0.0, 9000 + seed);
        let got = tree.transform(&image);
        let want = oracle_transform(&tree, &image);
        assert_eq!(got.entries().len(), want.len());
        for (&(gw, gx), &(ww, wx)) in got.entries().iter().zip(&want) {
            assert_eq!(gw, ww);
            assert!((gx - wx).abs() < 1e-12);
        }
    }
}

#[test]
fn score_is_one_on_identical_vectors() {
    let bow = BowVector::from_raw_weights([(0, 0.5), (3, 1.5), (9, 2.0)]);
    assert_eq!(score(&bow, &bow), 1.0);
}

#[test]
fn score_is_zero_on_disjoint_support() {
    let a = BowVector::from_raw_weights([(0, 1.0), (2, 1.0)]);
    let b = BowVector::from_raw_weights([(1, 1.0), (3, 1.0)]);
    assert_eq!(score(&a, &b), 0.0);
}

#[test]
fn score_matches_dense_oracle_and_is_symmetric() {
    let mut rng = crate::rng::SplitMix64::new(31);
    for _ in 0..100 {
        let make = |rng: &mut crate::rng::SplitMix64| {
            let n = 1 + rng.next_index(20);
            BowVector::from_raw_weights(
                (0..n).map(|_| (rng.next_index(64) as u32, rng.next_range(0.1, 2.0))),
            )
        };
        let a = make(&mut rng);
        let b = make(&mut rng);
        let s = score(&a, &b);
        assert!((0.0..=1.0).contains(&s));
        assert!((s - score(&b, &a)).abs() < 1e-12);
        assert!((s - dense_score(&a, &b, 64)).abs() < 1e-12);
    }
}

#[test]
fn training_is_bit_reproducible() {
    let corpus: Vec<FeatureSet> = (0..10)
        .map(|i| gen_feature_set(i, i as f64, 30, 752.0, 480.0, 0.0, 40 + i))
        .collect();
    let a = train_vocabulary(&corpus, 3, 2, 55).unwrap();
    let b = train_vocabulary(&corpus, 3, 2, 55).unwrap();
    assert_eq!(a.nodes(), b.nodes());
}

#[test]
fn deeper_trees_never_use_fewer_words() {
    let corpus: Vec<FeatureSet> = (0..25)
        .map(|i| gen_feature_set(i, i as f64, 40, 752.0, 480.0, 0.0, 7000 + i))
        .collect();
    let mut last = 0usize;
    for depth in 1..=3 {
        let tree = train_vocabulary(&corpus, 3, depth, 99).unwrap();
        let mut used: Vec<u32> = corpus
            .iter()
            .flat_map(|img| img.features.iter().map(|f| tree.quantize(&f.descriptor)))
            .collect();
        used.sort_unstable();
        used.dedup();
        assert!(
            used.len() >= last,
            "depth {depth} uses {} words, shallower used {last}",
            used.len()
        );
        last = used.len();
    }
}
