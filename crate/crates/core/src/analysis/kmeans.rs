//! k-means with k-means++ seeding and multiple restarts.
//!
//! Points are put in a canonical order before clustering and cluster labels
//! follow the lexicographic order of their centroids, so the result depends
//! only on the point set and the seed, not on input order.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RESTARTS: usize = 100;
pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub k: usize,
    /// Cluster id per input point, in input order.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub wcss: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn seed_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut chosen = vec![rng.random_range(0..points.len())];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.unwrap()
        } else {
            // every point coincides with a center already
            (0..points.len()).find(|i| !chosen.contains(i)).unwrap()
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> (Vec<usize>, Vec<Vec<f64>>, f64) {
    let k = centroids.len();
    let dims = points[0].len();
    let mut assign = vec![usize::MAX; points.len()];
    for _ in 0..MAX_ITERATIONS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let (j, _) = nearest(p, &centroids);
            if assign[i] != j {
                assign[i] = j;
                changed = true;
            }
        }
        // an empty cluster takes the point farthest from its own centroid
        for j in 0..k {
            if assign.contains(&j) {
                continue;
            }
            let mut far = (usize::MAX, -1.0);
            for (i, p) in points.iter().enumerate() {
                let owner = assign[i];
                if assign.iter().filter(|&&a| a == owner).count() < 2 {
                    continue;
                }
                let d = sq_dist(p, &centroids[owner]);
                if d > far.1 {
                    far = (i, d);
                }
            }
            if far.0 != usize::MAX {
                assign[far.0] = j;
                centroids[j] = points[far.0].clone();
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dims]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assign) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }
    let wcss = points
        .iter()
        .zip(&assign)
        .map(|(p, &a)| sq_dist(p, &centroids[a]))
        .sum();
    (assign, centroids, wcss)
}

/// Clusters `points` into `k` groups, keeping the lowest-WCSS of `restarts`
/// runs. Restart `r` draws from ChaCha8 seeded with `seed` on stream `r`.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, restarts: usize) -> Result<KMeansResult> {
    if points.is_empty() {
        return Err(Error::Empty("k-means input"));
    }
    let dims = points[0].len();
    if dims == 0 || points.iter().any(|p| p.len() != dims) {
        return Err(Error::Validation(
            "k-means: points must share a non-zero dimension".into(),
        ));
    }
    if points.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Validation("k-means: non-finite coordinate".into()));
    }
    if k == 0 || k > points.len() {
        return Err(Error::Validation(format!(
            "k-means: k = {k} with {} points",
            points.len()
        )));
    }

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| lex_cmp(&points[a], &points[b]));
    let canon: Vec<Vec<f64>> = order.iter().map(|&i| points[i].clone()).collect();

    let mut best: Option<(Vec<usize>, Vec<Vec<f64>>, f64)> = None;
    for r in 0..restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let run = lloyd(&canon, seed_plus_plus(&canon, k, &mut rng));
        if best.as_ref().is_none_or(|b| run.2 < b.2) {
            best = Some(run);
        }
    }
    let (assign, centroids, wcss) = best.unwrap();

    let mut label_order: Vec<usize> = (0..k).collect();
    label_order.sort_by(|&a, &b| lex_cmp(&centroids[a], &centroids[b]));
    let mut relabel = vec![0; k];
    for (new, &old) in label_order.iter().enumerate() {
        relabel[old] = new;
    }
    let mut assignments = vec![0; points.len()];
    for (pos, &orig) in order.iter().enumerate() {
        assignments[orig] = relabel[assign[pos]];
    }
    Ok(KMeansResult {
        k,
        assignments,
        centroids: label_order.iter().map(|&j| centroids[j].clone()).collect(),
        wcss,
    })
}

/// `(k, wcss)` for `k = 1..=k_max` (capped at the number of points).
pub fn elbow_curve(points: &[Vec<f64>], k_max: usize, seed: u64, restarts: usize) -> Result<Vec<(usize, f64)>> {
    (1..=k_max.min(points.len()))
        .map(|k| kmeans(points, k, seed, restarts).map(|r| (k, r.wcss)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn blobs() -> Vec<Vec<f64>> {
        let mut pts = Vec::new();
        for (cx, cy) in [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0), (10.0, 10.0)] {
            for i in 0..6 {
                let a = i as f64;
                pts.push(vec![cx + 0.3 * (a * 1.7).sin(), cy + 0.3 * (a * 2.3).cos()]);
            }
        }
        pts
    }

    #[test]
    fn separates_blobs() {
        let pts = blobs();
        let res = kmeans(&pts, 4, 7, 20).unwrap();
        for g in 0..4 {
            let ids: Vec<usize> = res.assignments[g * 6..g * 6 + 6].to_vec();
            assert!(ids.iter().all(|&c| c == ids[0]));
        }
        let mut distinct = res.assignments.clone();
        distinct.sort();
        distinct.dedup();
        assert_eq!(distinct.len(), 4);
    }

    #[test]
    fn elbow_decreases_and_drops_at_four() {
        let curve = elbow_curve(&blobs(), 6, 1, 20).unwrap();
        assert!(curve.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-9));
        let drop = |k: usize| (curve[k - 2].1 - curve[k - 1].1) / curve[k - 2].1;
        let best = (2..=6).max_by(|&a, &b| drop(a).total_cmp(&drop(b))).unwrap();
        assert!(drop(4) > 0.9, "{curve:?}");
        assert_eq!(best, 4);
    }

    #[test]
    fn single_cluster_and_identical_points() {
        let pts = vec![vec![1.0, 1.0]; 5];
        let res = kmeans(&pts, 3, 0, 5).unwrap();
        assert_eq!(res.wcss, 0.0);
        let res = kmeans(&blobs(), 1, 0, 1).unwrap();
        assert!(res.assignments.iter().all(|&a| a == 0));
    }

    #[test]
    fn k1_is_total_scatter_and_k_n_is_zero() {
        let pts = blobs();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
        let my = pts.iter().map(|p| p[1]).sum::<f64>() / n;
        let scatter: f64 = pts.iter().map(|p| (p[0] - mx).powi(2) + (p[1] - my).powi(2)).sum();
        let one = kmeans(&pts, 1, 5, 3).unwrap();
        assert!((one.wcss - scatter).abs() < 1e-9);
        assert!((one.centroids[0][0] - mx).abs() < 1e-12);
        let all = kmeans(&pts, pts.len(), 5, 3).unwrap();
        assert!(all.wcss.abs() < 1e-12);
    }

    #[test]
    fn two_distant_blobs() {
        let mut pts = Vec::new();
        for i in 0..10 {
            let a = i as f64;
            pts.push(vec![a.sin(), a.cos()]);
            pts.push(vec![100.0 + a.cos(), -100.0 + a.sin()]);
        }
        let res = kmeans(&pts, 2, 11, 10).unwrap();
        for (i, &c) in res.assignments.iter().enumerate() {
            assert_eq!(c, res.assignments[i % 2]);
        }
        assert_ne!(res.assignments[0], res.assignments[1]);
    }

    #[test]
    fn rejects_bad_k() {
        assert!(kmeans(&blobs(), 0, 0, 1).is_err());
        assert!(kmeans(&blobs(), 25, 0, 1).is_err());
        assert!(kmeans(&[], 1, 0, 1).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn invariant_to_input_order(
            pts in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 2), 6..20),
            rot in 0usize..20, k in 1usize..4, seed in 0u64..100,
        ) {
            let a = kmeans(&pts, k, seed, 5).unwrap();
            let mut shuffled = pts.clone();
            let r = rot % pts.len();
            shuffled.rotate_left(r);
            shuffled.reverse();
            let b = kmeans(&shuffled, k, seed, 5).unwrap();
            prop_assert_eq!(a.wcss, b.wcss);
            prop_assert_eq!(&a.centroids, &b.centroids);
            let n = pts.len();
            for i in 0..n {
                let j = n - 1 - ((i + n - r) % n);
                prop_assert_eq!(a.assignments[i], b.assignments[j]);
            }
        }

        #[test]
        fn assignments_are_nearest_centroid(
            pts in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 3), 4..25),
            k in 1usize..4,
        ) {
            let res = kmeans(&pts, k, 3, 3).unwrap();
            for (p, &a) in pts.iter().zip(&res.assignments) {
                let (_, d) = nearest(p, &res.centroids);
                prop_assert!(sq_dist(p, &res.centroids[a]) <= d + 1e-9);
            }
        }
    }
}
