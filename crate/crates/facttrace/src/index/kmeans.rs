//! Seeded Lloyd k-means with farthest-point initialization.
//!
//! Determinism is load-bearing: identical `(data, k, seed)` inputs must
//! yield identical results so that index builds are reproducible. All ties
//! break toward the lowest index and all arithmetic is f64.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct KmeansOptions {
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for KmeansOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            max_iter: 100,
            tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KmeansResult {
    /// Cluster index per point, length equals the point count.
    pub assignments: Vec<usize>,
    /// `k` centroids; entries for unoccupied clusters are stale positions.
    pub centroids: Vec<Vec<f64>>,
    /// False for clusters that ended up without members (k exceeded the
    /// number of distinct points, or re-seeding could not help).
    pub occupied: Vec<bool>,
    /// Total within-cluster squared distance after each assignment pass.
    pub inertia_trace: Vec<f64>,
}

impl KmeansResult {
    pub fn inertia(&self) -> f64 {
        self.inertia_trace.last().copied().unwrap_or(0.0)
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// Clusters `n = data.len() / dim` points into up to `k` groups.
///
/// Iteration stops when every centroid moves less than `tol` (L2) or after
/// `max_iter` passes. Clusters that empty out are re-seeded from the
/// farthest member of the largest cluster when that point is strictly away
/// from its centroid. When `k` exceeds the number of distinct points, each
/// distinct point gets its own cluster and the remainder are flagged
/// unoccupied.
pub fn kmeans(data: &[f64], dim: usize, k: usize, opts: &KmeansOptions) -> KmeansResult {
    assert!(dim > 0, "dimension must be positive");
    assert!(k > 0, "k must be positive");
    assert!(
        !data.is_empty() && data.len().is_multiple_of(dim),
        "data must hold a whole number of points"
    );
    let n = data.len() / dim;
    let points = data;
    let point = |i: usize| &points[i * dim..(i + 1) * dim];

    if let Some(result) = distinct_shortcut(data, dim, n, k) {
        return result;
    }

    // Farthest-point seeding from a seeded RNG: random first centroid, then
    // repeatedly the point farthest from its nearest chosen centroid.
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let first = rng.random_range(0..n);
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(point(first).to_vec());
    let mut min_d2: Vec<f64> = (0..n).map(|i| squared_distance(point(i), &centroids[0])).collect();
    while centroids.len() < k {
        let mut best = 0;
        let mut best_d2 = f64::NEG_INFINITY;
        for (i, d2) in min_d2.iter().enumerate() {
            if *d2 > best_d2 {
                best_d2 = *d2;
                best = i;
            }
        }
        centroids.push(point(best).to_vec());
        let newest = centroids.last().unwrap();
        for (i, slot) in min_d2.iter_mut().enumerate() {
            let d2 = squared_distance(point(i), newest);
            if d2 < *slot {
                *slot = d2;
            }
        }
    }

    let mut assignments = vec![0usize; n];
    let mut inertia_trace = Vec::new();
    for _ in 0..opts.max_iter {
        let inertia = assign(points, dim, &centroids, &mut assignments);
        inertia_trace.push(inertia);

        let (mut next, mut counts) = cluster_means(points, dim, k, &assignments);
        for j in 0..k {
            if counts[j] == 0 {
                // Keep the stale position; an unmoved empty centroid must
                // not drift to the origin.
                next[j] = centroids[j].clone();
            }
        }
        let reseeded = reseed_empty(points, dim, &assignments, &mut next, &mut counts);

        let mut max_shift = 0.0f64;
        for (old, new) in centroids.iter().zip(next.iter()) {
            max_shift = max_shift.max(squared_distance(old, new).sqrt());
        }
        centroids = next;
        if !reseeded && max_shift < opts.tol {
            break;
        }
    }
    // Sync assignments with the final centroid positions.
    let inertia = assign(points, dim, &centroids, &mut assignments);
    inertia_trace.push(inertia);

    let mut occupied = vec![false; k];
    for &a in &assignments {
        occupied[a] = true;
    }
    KmeansResult {
        assignments,
        centroids,
        occupied,
        inertia_trace,
    }
}

/// One cluster per distinct point when there are at most `k` of them.
fn distinct_shortcut(data: &[f64], dim: usize, n: usize, k: usize) -> Option<KmeansResult> {
    use std::collections::HashMap;
    let bits = |i: usize| -> Vec<u64> {
        data[i * dim..(i + 1) * dim].iter().map(|v| v.to_bits()).collect()
    };
    let mut cluster_of: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut order: Vec<usize> = Vec::new();
    for i in 0..n {
        let key = bits(i);
        let next = cluster_of.len();
        cluster_of.entry(key).or_insert_with(|| {
            order.push(i);
            next
        });
        if cluster_of.len() > k {
            return None;
        }
    }
    let distinct = cluster_of.len();
    let assignments: Vec<usize> = (0..n).map(|i| cluster_of[&bits(i)]).collect();
    let mut centroids = vec![vec![0.0f64; dim]; k];
    for (cluster, &i) in order.iter().enumerate() {
        centroids[cluster] = data[i * dim..(i + 1) * dim].to_vec();
    }
    let mut occupied = vec![false; k];
    occupied[..distinct].fill(true);
    Some(KmeansResult {
        assignments,
        centroids,
        occupied,
        inertia_trace: vec![0.0],
    })
}

fn assign(points: &[f64], dim: usize, centroids: &[Vec<f64>], out: &mut [usize]) -> f64 {
    let n = points.len() / dim;
    let mut inertia = 0.0;
    for i in 0..n {
        let p = &points[i * dim..(i + 1) * dim];
        let mut best = 0usize;
        let mut best_d2 = f64::INFINITY;
        for (j, c) in centroids.iter().enumerate() {
            let d2 = squared_distance(p, c);
            if d2 < best_d2 {
                best_d2 = d2;
                best = j;
            }
        }
        out[i] = best;
        inertia += best_d2;
    }
    inertia
}

fn cluster_means(
    points: &[f64],
    dim: usize,
    k: usize,
    assignments: &[usize],
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let n = points.len() / dim;
    let mut sums = vec![vec![0.0f64; dim]; k];
    let mut counts = vec![0usize; k];
    for i in 0..n {
        let a = assignments[i];
        counts[a] += 1;
        let p = &points[i * dim..(i + 1) * dim];
        for (s, v) in sums[a].iter_mut().zip(p.iter()) {
            *s += v;
        }
    }
    for (sum, count) in sums.iter_mut().zip(counts.iter()) {
        if *count > 0 {
            for v in sum.iter_mut() {
                *v /= *count as f64;
            }
        }
    }
    (sums, counts)
}

/// Moves each empty centroid onto the farthest member of the largest
/// cluster, when that member is strictly away from its centroid. Returns
/// whether any centroid moved this way; a re-seeded iteration never counts
/// as converged.
fn reseed_empty(
    points: &[f64],
    dim: usize,
    assignments: &[usize],
    centroids: &mut [Vec<f64>],
    counts: &mut [usize],
) -> bool {
    let n = points.len() / dim;
    let empties: Vec<usize> = counts
        .iter()
        .enumerate()
        .filter(|(_, c)| **c == 0)
        .map(|(j, _)| j)
        .collect();
    if empties.is_empty() {
        return false;
    }
    let mut donated = vec![false; n];
    let mut reseeded = false;
    for empty in empties {
        let largest = match counts.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))) {
            Some((j, c)) if *c > 1 => j,
            _ => continue,
        };
        let mut far = None;
        let mut far_d2 = 0.0f64;
        for i in 0..n {
            if assignments[i] != largest || donated[i] {
                continue;
            }
            let d2 = squared_distance(&points[i * dim..(i + 1) * dim], &centroids[largest]);
            if d2 > far_d2 {
                far_d2 = d2;
                far = Some(i);
            }
        }
        if let Some(i) = far {
            centroids[empty] = points[i * dim..(i + 1) * dim].to_vec();
            donated[i] = true;
            counts[empty] = 1;
            counts[largest] -= 1;
            reseeded = true;
        }
    }
    reseeded
}
