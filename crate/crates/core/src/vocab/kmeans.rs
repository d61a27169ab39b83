//! Spherical k-means over unit descriptors.
//!
//! Similarity is the dot product (equivalent to Euclidean distance on the
//! unit sphere); centroids are re-normalized to unit length after every
//! Lloyd update so the quantization metric stays consistent.

use crate::matching::{Descriptor, DESCRIPTOR_DIM};
use crate::rng::SplitMix64;

/// Result of one k-means run.
#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub centroids: Vec<Descriptor>,
    /// `assignments[i]` is the centroid index of `descriptors[i]`.
    pub assignments: Vec<usize>,
}

fn squared_distance(a: &Descriptor, b: &Descriptor) -> f64 {
    // On unit vectors |a - b|^2 = 2 - 2 a.b; computing it through the dot
    // product keeps one code path for both metrics.
    2.0 - 2.0 * a.dot(b)
}

/// Index of the centroid most similar to `d` (ties to the lowest index).
pub fn nearest_centroid(d: &Descriptor, centroids: &[Descriptor]) -> usize {
    let mut best = 0;
    let mut best_sim = f64::NEG_INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let s = d.dot(c);
        if s > best_sim {
            best_sim = s;
            best = i;
        }
    }
    best
}

fn mean_descriptor(members: &[usize], descriptors: &[Descriptor]) -> Option<Descriptor> {
    let mut acc = [0.0f64; DESCRIPTOR_DIM];
    for &i in members {
        for (a, &v) in acc.iter_mut().zip(descriptors[i].values().iter()) {
            *a += v as f64;
        }
    }
    let n = members.len() as f64;
    let values: Vec<f32> = acc.iter().map(|&a| (a / n) as f32).collect();
    Descriptor::normalized(&values).ok()
}

/// k-means++ seeding: first centroid uniform, the rest sampled with
/// probability proportional to the squared distance to the nearest chosen
/// centroid.
fn seed_centroids(descriptors: &[Descriptor], k: usize, rng: &mut SplitMix64) -> Vec<Descriptor> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(descriptors[rng.next_index(descriptors.len())].clone());
    let mut dist2: Vec<f64> = descriptors
        .iter()
        .map(|d| squared_distance(d, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let pick = rng.next_weighted(&dist2);
        let chosen = descriptors[pick].clone();
        for (d2, d) in dist2.iter_mut().zip(descriptors.iter()) {
            *d2 = d2.min(squared_distance(d, &chosen));
        }
        centroids.push(chosen);
    }
    centroids
}

/// Lloyd's k-means with k-means++ seeding, deterministic for a fixed
/// seed.
///
/// Runs until the assignment vector reaches a fixpoint or `max_iters`
/// passes. Empty clusters are repaired by stealing the point farthest
/// from its current centroid. When the input has fewer than `k` distinct
/// descriptors the distinct set itself is returned.
pub fn kmeans(
    descriptors: &[Descriptor],
    k: usize,
    seed: u64,
    max_iters: usize,
) -> KMeansResult {
    assert!(!descriptors.is_empty(), "kmeans needs at least one descriptor");
    assert!(k >= 1, "kmeans needs k >= 1");

    // Distinct descriptors (bitwise equality), in first-seen order. Stop
    // scanning once more than k are found.
    let mut distinct: Vec<usize> = Vec::new();
    for (i, d) in descriptors.iter().enumerate() {
        if !distinct.iter().any(|&j| descriptors[j] == *d) {
            distinct.push(i);
            if distinct.len() > k {
                break;
            }
        }
    }
    if distinct.len() <= k {
        let centroids: Vec<Descriptor> =
            distinct.iter().map(|&i| descriptors[i].clone()).collect();
        let assignments = descriptors
            .iter()
            .map(|d| {
                distinct
                    .iter()
                    .position(|&j| descriptors[j] == *d)
                    .expect("every descriptor equals one distinct representative")
            })
            .collect();
        return KMeansResult {
            centroids,
            assignments,
        };
    }

    let mut rng = SplitMix64::new(seed);
    let mut centroids = seed_centroids(descriptors, k, &mut rng);
    let mut assignments: Vec<usize> = descriptors
        .iter()
        .map(|d| nearest_centroid(d, &centroids))
        .collect();

    for _ in 0..max_iters {
        // Update step.
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &a) in assignments.iter().enumerate() {
            members[a].push(i);
        }
        for (c, mem) in members.iter_mut().enumerate() {
            if mem.is_empty() {
                // Repair: steal the point farthest from its centroid.
                let far = (0..descriptors.len())
                    .max_by(|&x, &y| {
                        squared_distance(&descriptors[x], &centroids[assignments[x]])
                            .partial_cmp(&squared_distance(
                                &descriptors[y],
                                &centroids[assignments[y]],
                            ))
                            .unwrap()
                            .then(y.cmp(&x))
                    })
                    .expect("non-empty input");
                centroids[c] = descriptors[far].clone();
                mem.push(far);
                continue;
            }
            if let Some(m) = mean_descriptor(mem, descriptors) {
                centroids[c] = m;
            }
            // A zero mean (antipodal members) keeps the previous centroid.
        }

        // Assignment step; stop at a fixpoint.
        let next: Vec<usize> = descriptors
            .iter()
            .map(|d| nearest_centroid(d, &centroids))
            .collect();
        if next == assignments {
            break;
        }
        assignments = next;
    }

    KMeansResult {
        centroids,
        assignments,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::gen_descriptor_blobs;

    #[test]
    fn k_equal_one_returns_the_mean() {
        let (descriptors, _) = gen_descriptor_blobs(1, 20, 0.1, 3);
        let result = kmeans(&descriptors, 1, 0, 50);
        assert_eq!(result.centroids.len(), 1);
        let mean = {
            let mut acc = [0.0f64; DESCRIPTOR_DIM];
            for d in &descriptors {
                for (a, &v) in acc.iter_mut().zip(d.values().iter()) {
                    *a += v as f64;
                }
            }
            let vals: Vec<f32> = acc.iter().map(|&a| (a / 20.0) as f32).collect();
            Descriptor::normalized(&vals).unwrap()
        };
        assert!(result.centroids[0].dot(&mean) > 1.0 - 1e-9);
        assert!(result.assignments.iter().all(|&a| a == 0));
    }

    #[test]
    fn two_blobs_separate_exactly() {
        let (descriptors, labels) = gen_descriptor_blobs(2, 50, 0.05, 7);
        let result = kmeans(&descriptors, 2, 11, 100);
        // Cluster ids may be swapped relative to blob labels.
        let first = result.assignments[0];
        for (a, &l) in result.assignments.iter().zip(&labels) {
            if l == labels[0] {
                assert_eq!(*a, first);
            } else {
                assert_ne!(*a, first);
            }
        }
    }

    #[test]
    fn k_equal_n_gives_zero_distortion() {
        let (descriptors, _) = gen_descriptor_blobs(1, 12, 0.3, 9);
        let result = kmeans(&descriptors, 12, 5, 50);
        assert_eq!(result.centroids.len(), 12);
        for (i, d) in descriptors.iter().enumerate() {
            // Every point is its own centroid: distortion exactly zero.
            assert_eq!(result.centroids[result.assignments[i]], *d);
        }
    }

    #[test]
    fn fewer_distinct_than_k_returns_distinct_set() {
        let (blob, _) = gen_descriptor_blobs(3, 1, 0.0, 2);
        let descriptors = vec![
            blob[0].clone(),
            blob[1].clone(),
            blob[0].clone(),
            blob[2].clone(),
            blob[1].clone(),
        ];
        let result = kmeans(&descriptors, 10, 0, 50);
        assert_eq!(result.centroids.len(), 3);
        for (i, d) in descriptors.iter().enumerate() {
            assert_eq!(result.centroids[result.assignments[i]], *d);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let (descriptors, _) = gen_descriptor_blobs(4, 30, 0.2, 13);
        let a = kmeans(&descriptors, 4, 21, 100);
        let b = kmeans(&descriptors, 4, 21, 100);
        assert_eq!(a.assignments, b.assignments);
        assert_eq!(a.centroids, b.centroids);
    }
}
