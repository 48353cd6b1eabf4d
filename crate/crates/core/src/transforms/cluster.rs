use rand::Rng;

use super::scale::{distance_space, squared_distance};
use crate::data::Dataset;
use crate::error::Result;
use crate::seed::Rng as SeededRng;

const KMEANS_ITERATIONS: usize = 50;

/// Lloyd's k-means with k-means++ seeding over the rows of a row-major
/// `n x d` matrix. Returns (centroids, assignment per row). `k` is clamped
/// to `[1, n]`; a cluster that empties keeps its previous centroid.
pub fn kmeans(points: &[f64], d: usize, k: usize, iterations: usize, rng: &mut SeededRng) -> (Vec<Vec<f64>>, Vec<usize>) {
    let n = if d == 0 { 0 } else { points.len() / d };
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let point = |i: usize| &points[i * d..(i + 1) * d];
    let k = k.clamp(1, n);

    let mut centroids: Vec<Vec<f64>> = vec![point(rng.random_range(0..n)).to_vec()];
    let mut nearest: Vec<f64> = (0..n).map(|i| squared_distance(point(i), &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &dist) in nearest.iter().enumerate() {
                if target < dist {
                    chosen = i;
                    break;
                }
                target -= dist;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = point(next).to_vec();
        for (i, best) in nearest.iter_mut().enumerate() {
            *best = best.min(squared_distance(point(i), &c));
        }
        centroids.push(c);
    }

    let mut assignment = vec![0usize; n];
    for _ in 0..iterations {
        let mut changed = false;
        for (i, slot) in assignment.iter_mut().enumerate() {
            let p = point(i);
            let best = (0..k)
                .min_by(|&a, &b| squared_distance(p, &centroids[a]).total_cmp(&squared_distance(p, &centroids[b])))
                .expect("k >= 1");
            if *slot != best {
                *slot = best;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(point(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }
    (centroids, assignment)
}

/// Clusters the training rows and, inside every cluster holding both
/// protected groups, duplicates random rows of the smaller group until the
/// two groups have equal counts.
pub(super) fn rebalance(ds: &Dataset, k: usize, rng: &mut SeededRng) -> Result<(Vec<Vec<f64>>, Dataset)> {
    let space = distance_space(ds);
    let (centroids, assignment) = kmeans(&space, ds.n_features(), k, KMEANS_ITERATIONS, rng);
    let n_clusters = centroids.len().max(1);

    let mut members: Vec<[Vec<usize>; 2]> = vec![Default::default(); n_clusters];
    for i in 0..ds.n_rows() {
        let c = assignment.get(i).copied().unwrap_or(0);
        members[c][ds.a()[i] as usize].push(i);
    }

    let mut order: Vec<usize> = (0..ds.n_rows()).collect();
    for [g0, g1] in &members {
        if g0.is_empty() || g1.is_empty() {
            continue;
        }
        let (minority, deficit) = if g0.len() < g1.len() {
            (g0, g1.len() - g0.len())
        } else {
            (g1, g0.len() - g1.len())
        };
        for _ in 0..deficit {
            order.push(minority[rng.random_range(0..minority.len())]);
        }
    }
    Ok((centroids, ds.select_rows(&order)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn separates_obvious_clusters() {
        let points = [0.0, 0.0, 0.1, 0.0, 0.0, 0.1, 10.0, 10.0, 10.1, 10.0, 10.0, 10.1];
        let (centroids, assignment) = kmeans(&points, 2, 2, 50, &mut seed::rng(1));
        assert_eq!(centroids.len(), 2);
        assert_eq!(assignment[0], assignment[1]);
        assert_eq!(assignment[0], assignment[2]);
        assert_eq!(assignment[3], assignment[4]);
        assert_ne!(assignment[0], assignment[3]);
    }

    #[test]
    fn k_is_clamped_to_n() {
        let (centroids, _) = kmeans(&[1.0, 2.0], 1, 5, 10, &mut seed::rng(0));
        assert_eq!(centroids.len(), 2);
    }

    #[test]
    fn single_cluster_balances_groups() {
        let rows: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64]).collect();
        let y = vec![0, 1, 0, 1, 0, 1, 1, 0, 1];
        let a = vec![0, 0, 1, 1, 1, 1, 1, 1, 1];
        let ds = Dataset::from_rows(&rows, y, a).unwrap();
        let (_, out) = rebalance(&ds, 1, &mut seed::rng(2)).unwrap();
        let groups = out.group_indices();
        assert_eq!(groups[0].len(), 7);
        assert_eq!(groups[1].len(), 7);
    }
}
