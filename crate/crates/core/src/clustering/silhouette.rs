use std::collections::BTreeMap;

use super::{to_f64, ClusterError};

// Sorted members with prefix sums; gives Σ|x - y| over the cluster in O(log n).
struct SortedCluster {
    values: Vec<f64>,
    prefix: Vec<f64>,
}

impl SortedCluster {
    fn new(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        let mut prefix = Vec::with_capacity(values.len() + 1);
        prefix.push(0.0);
        for &v in &values {
            prefix.push(prefix.last().unwrap() + v);
        }
        Self { values, prefix }
    }

    fn len(&self) -> usize {
        self.values.len()
    }

    fn abs_dev_sum(&self, x: f64) -> f64 {
        let below = self.values.partition_point(|&v| v < x);
        let n = self.values.len();
        let total = self.prefix[n];
        let left = self.prefix[below];
        (x * below as f64 - left) + (total - left - x * (n - below) as f64)
    }
}

/// Mean silhouette coefficient over all points, 1-D absolute distances.
///
/// Points in singleton clusters score 0, as do points with `a = b = 0`.
pub fn silhouette(data: &[f32], assignments: &[usize]) -> Result<f64, ClusterError> {
    if data.len() != assignments.len() {
        return Err(ClusterError::SizeMismatch {
            expected: data.len(),
            found: assignments.len(),
        });
    }
    let points = to_f64(data)?;
    let mut members: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (&x, &a) in points.iter().zip(assignments) {
        members.entry(a).or_default().push(x);
    }
    if members.len() < 2 {
        return Err(ClusterError::SingleCluster);
    }
    let clusters: BTreeMap<usize, SortedCluster> =
        members.into_iter().map(|(c, v)| (c, SortedCluster::new(v))).collect();

    let mut total = 0.0;
    for (&x, &own) in points.iter().zip(assignments) {
        let home = &clusters[&own];
        if home.len() < 2 {
            continue;
        }
        let a = home.abs_dev_sum(x) / (home.len() - 1) as f64;
        let b = clusters
            .iter()
            .filter(|(&c, _)| c != own)
            .map(|(_, other)| other.abs_dev_sum(x) / other.len() as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / points.len() as f64)
}
