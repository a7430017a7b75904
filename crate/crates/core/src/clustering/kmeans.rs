use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{mix_seed, to_f64, ClusterError};

pub const MAX_LLOYD_ITERATIONS: usize = 300;

/// Fitted 1-D k-means partition. Clusters are indexed in ascending centroid
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub k: usize,
    pub centroids: Vec<f64>,
    pub assignments: Vec<usize>,
    pub wcss: f64,
    pub seed: u64,
    pub iterations: usize,
    /// WCSS after every centroid update of the winning restart.
    pub trace: Vec<f64>,
}

impl KMeansModel {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Outcome of one Lloyd run from a fixed initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydRun {
    pub centroids: Vec<f64>,
    pub assignments: Vec<usize>,
    pub wcss: f64,
    pub iterations: usize,
    pub trace: Vec<f64>,
    pub converged: bool,
}

#[inline]
fn sq(x: f64) -> f64 {
    x * x
}

fn nearest(x: f64, centroids: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = sq(x - centroids[0]);
    for (j, &c) in centroids.iter().enumerate().skip(1) {
        let d = sq(x - c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

fn sum_sq(points: &[f64], assignments: &[usize], centroids: &[f64]) -> f64 {
    points
        .iter()
        .zip(assignments)
        .map(|(&x, &a)| sq(x - centroids[a]))
        .sum()
}

// Give every empty cluster the point farthest from its own centroid, taken
// from a cluster that keeps at least one member.
fn repair_empty(points: &[f64], assignments: &mut [usize], centroids: &mut [f64]) {
    let k = centroids.len();
    let mut sizes = vec![0usize; k];
    for &a in assignments.iter() {
        sizes[a] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let mut pick = None;
        let mut pick_d = f64::NEG_INFINITY;
        for (i, (&x, &a)) in points.iter().zip(assignments.iter()).enumerate() {
            if sizes[a] < 2 {
                continue;
            }
            let d = sq(x - centroids[a]);
            if d > pick_d {
                pick = Some(i);
                pick_d = d;
            }
        }
        let i = pick.expect("n >= k guarantees a donor cluster");
        sizes[assignments[i]] -= 1;
        assignments[i] = empty;
        sizes[empty] = 1;
        centroids[empty] = points[i];
    }
}

fn update_centroids(points: &[f64], assignments: &[usize], centroids: &mut [f64]) {
    let k = centroids.len();
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (&x, &a) in points.iter().zip(assignments) {
        sums[a] += x;
        counts[a] += 1;
    }
    for j in 0..k {
        if counts[j] > 0 {
            centroids[j] = sums[j] / counts[j] as f64;
        }
    }
}

/// Lloyd iterations from `init` until the assignment is a fixpoint or
/// `max_iter` updates have run. A point only changes cluster when another
/// centroid is strictly closer.
pub fn lloyd(points: &[f64], init: Vec<f64>, max_iter: usize) -> LloydRun {
    assert!(!init.is_empty() && init.len() <= points.len());
    let mut centroids = init;
    let mut assignments: Vec<usize> = points.iter().map(|&x| nearest(x, &centroids)).collect();
    repair_empty(points, &mut assignments, &mut centroids);

    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter {
        update_centroids(points, &assignments, &mut centroids);
        trace.push(sum_sq(points, &assignments, &centroids));

        let mut next = assignments.clone();
        for (slot, &x) in next.iter_mut().zip(points) {
            let j = nearest(x, &centroids);
            if sq(x - centroids[j]) < sq(x - centroids[*slot]) {
                *slot = j;
            }
        }
        repair_empty(points, &mut next, &mut centroids);
        if next == assignments {
            converged = true;
            break;
        }
        assignments = next;
    }
    let wcss = sum_sq(points, &assignments, &centroids);
    LloydRun {
        centroids,
        iterations: trace.len(),
        trace,
        assignments,
        wcss,
        converged,
    }
}

/// k-means++ seeding: first center uniform, then proportional to squared
/// distance from the nearest chosen center.
pub fn kmeans_plus_plus<R: Rng>(points: &[f64], k: usize, rng: &mut R) -> Vec<f64> {
    let n = points.len();
    let mut centers = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..n)]);
    let mut dist: Vec<f64> = points.iter().map(|&x| sq(x - centers[0])).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points[idx];
        centers.push(c);
        for (d, &x) in dist.iter_mut().zip(points) {
            *d = d.min(sq(x - c));
        }
    }
    centers
}

/// Best-of-`restarts` k-means. Deterministic for a given `seed`.
pub fn kmeans(data: &[f32], k: usize, seed: u64, restarts: usize) -> Result<KMeansModel, ClusterError> {
    if k == 0 {
        return Err(ClusterError::InvalidK);
    }
    if k > data.len() {
        return Err(ClusterError::TooFewPoints { k, n: data.len() });
    }
    let points = to_f64(data)?;

    let mut best: Option<LloydRun> = None;
    for r in 0..restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, r as u64));
        let init = kmeans_plus_plus(&points, k, &mut rng);
        let run = lloyd(&points, init, MAX_LLOYD_ITERATIONS);
        if best.as_ref().is_none_or(|b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    let run = best.expect("at least one restart");

    // Relabel clusters by ascending centroid.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| run.centroids[a].total_cmp(&run.centroids[b]).then(a.cmp(&b)));
    let mut rank = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    Ok(KMeansModel {
        k,
        centroids: order.iter().map(|&j| run.centroids[j]).collect(),
        assignments: run.assignments.iter().map(|&a| rank[a]).collect(),
        wcss: run.wcss,
        seed,
        iterations: run.iterations,
        trace: run.trace,
    })
}

/// Sum of squared deviations of each point from its assigned centroid.
pub fn wcss(model: &KMeansModel, data: &[f32]) -> Result<f64, ClusterError> {
    if model.assignments.len() != data.len() {
        return Err(ClusterError::SizeMismatch {
            expected: model.assignments.len(),
            found: data.len(),
        });
    }
    Ok(data
        .iter()
        .zip(&model.assignments)
        .map(|(&x, &a)| sq(f64::from(x) - model.centroids[a]))
        .sum())
}
