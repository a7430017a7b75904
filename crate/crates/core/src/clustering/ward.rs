//! Ward-linkage agglomeration of k-means clusters into semantic groups.
//!
//! The distance between groups `i` and `j` is
//! `sqrt(n_i n_j / (n_i + n_j)) * ||φ_i - φ_j||` on `φ = (mean, std)`. A
//! merged group takes the summed size and the size-weighted mean of `φ`.

use serde::{Deserialize, Serialize};

use super::descriptors::ClusterDescriptor;
use super::ClusterError;
use crate::category::MotionCategory;

pub const SEMANTIC_GROUPS: usize = 4;

pub fn ward_distance(a: &ClusterDescriptor, b: &ClusterDescriptor) -> f64 {
    let (na, nb) = (a.size as f64, b.size as f64);
    let weight = (na * nb / (na + nb)).sqrt();
    let dm = a.mean - b.mean;
    let ds = a.std - b.std;
    weight * (dm * dm + ds * ds).sqrt()
}

fn merge(a: &ClusterDescriptor, b: &ClusterDescriptor) -> ClusterDescriptor {
    let size = a.size + b.size;
    let (wa, wb) = (a.size as f64, b.size as f64);
    let total = wa + wb;
    ClusterDescriptor {
        mean: (wa * a.mean + wb * b.mean) / total,
        std: (wa * a.std + wb * b.std) / total,
        size,
    }
}

/// One agglomeration step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WardMerge {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub distance: f64,
}

/// A set of k-means clusters with its merged descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterGroup {
    pub clusters: Vec<usize>,
    pub descriptor: ClusterDescriptor,
}

/// Greedy Ward agglomeration down to `target` groups. Ties in distance go to
/// the earliest pair in scan order. Returns the groups (each with sorted
/// member indices) and the merge history.
pub fn ward_agglomerate(
    descriptors: &[ClusterDescriptor],
    target: usize,
) -> Result<(Vec<ClusterGroup>, Vec<WardMerge>), ClusterError> {
    if target == 0 || descriptors.len() < target {
        return Err(ClusterError::TooFewClusters {
            found: descriptors.len(),
            required: target.max(1),
        });
    }
    let mut groups: Vec<ClusterGroup> = descriptors
        .iter()
        .enumerate()
        .map(|(i, d)| ClusterGroup {
            clusters: vec![i],
            descriptor: *d,
        })
        .collect();
    let mut merges = Vec::new();
    while groups.len() > target {
        let mut best = (0, 1, f64::INFINITY);
        for i in 0..groups.len() {
            for j in i + 1..groups.len() {
                let d = ward_distance(&groups[i].descriptor, &groups[j].descriptor);
                if d < best.2 {
                    best = (i, j, d);
                }
            }
        }
        let (i, j, distance) = best;
        let right = groups.remove(j);
        let left = &mut groups[i];
        merges.push(WardMerge {
            left: left.clusters.clone(),
            right: right.clusters.clone(),
            distance,
        });
        left.descriptor = merge(&left.descriptor, &right.descriptor);
        left.clusters.extend(right.clusters);
        left.clusters.sort_unstable();
    }
    Ok((groups, merges))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticGroup {
    pub label: MotionCategory,
    pub clusters: Vec<usize>,
    pub descriptor: ClusterDescriptor,
}

/// Exactly four labeled groups, ordered Halt, Slow, Normal, Fast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticGrouping {
    pub groups: Vec<SemanticGroup>,
    pub merges: Vec<WardMerge>,
}

impl SemanticGrouping {
    pub fn group(&self, label: MotionCategory) -> &SemanticGroup {
        self.groups
            .iter()
            .find(|g| g.label == label)
            .expect("every label present")
    }

    /// Label of a k-means cluster index.
    pub fn label_of(&self, cluster: usize) -> Option<MotionCategory> {
        self.groups
            .iter()
            .find(|g| g.clusters.contains(&cluster))
            .map(|g| g.label)
    }

    /// Group means strictly increase from Halt to Fast.
    pub fn is_strictly_ordered(&self) -> bool {
        self.groups.len() == SEMANTIC_GROUPS
            && self
                .groups
                .windows(2)
                .all(|w| w[0].descriptor.mean < w[1].descriptor.mean)
    }
}

/// Ward-merge cluster descriptors into the four semantic categories,
/// labeled by ascending size-weighted group mean (ties: smaller std first).
pub fn ward_group(descriptors: &[ClusterDescriptor]) -> Result<SemanticGrouping, ClusterError> {
    if descriptors.len() < SEMANTIC_GROUPS {
        return Err(ClusterError::TooFewClusters {
            found: descriptors.len(),
            required: SEMANTIC_GROUPS,
        });
    }
    let (mut groups, merges) = ward_agglomerate(descriptors, SEMANTIC_GROUPS)?;
    groups.sort_by(|a, b| {
        a.descriptor
            .mean
            .total_cmp(&b.descriptor.mean)
            .then(a.descriptor.std.total_cmp(&b.descriptor.std))
            .then(a.clusters[0].cmp(&b.clusters[0]))
    });
    let groups = groups
        .into_iter()
        .zip(MotionCategory::ORDERED)
        .map(|(g, label)| SemanticGroup {
            label,
            clusters: g.clusters,
            descriptor: g.descriptor,
        })
        .collect();
    Ok(SemanticGrouping { groups, merges })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desc(mean: f64, std: f64, size: usize) -> ClusterDescriptor {
        ClusterDescriptor { mean, std, size }
    }

    #[test]
    fn distance_by_direct_substitution() {
        // sqrt(2*2/4) * ||(3, 4)|| = 5
        assert_eq!(ward_distance(&desc(0.0, 0.0, 2), &desc(3.0, 4.0, 2)), 5.0);
        let (_, merges) = ward_agglomerate(&[desc(0.0, 0.0, 2), desc(3.0, 4.0, 2)], 1).unwrap();
        assert_eq!(merges[0].distance, 5.0);
    }

    #[test]
    fn four_descriptors_are_not_merged() {
        let d = [
            desc(9.0, 1.0, 5),
            desc(0.0, 0.0, 3),
            desc(4.0, 0.5, 7),
            desc(2.0, 0.2, 1),
        ];
        let g = ward_group(&d).unwrap();
        assert!(g.merges.is_empty());
        let order: Vec<Vec<usize>> = g.groups.iter().map(|g| g.clusters.clone()).collect();
        assert_eq!(order, vec![vec![1], vec![3], vec![2], vec![0]]);
        assert_eq!(g.group(MotionCategory::Fast).clusters, vec![0]);
        assert!(g.is_strictly_ordered());
    }

    #[test]
    fn eight_descriptors_merge_into_pairs() {
        let means = [0.0, 1.0, 5.0, 6.0, 10.0, 11.0, 20.0, 21.0];
        let d: Vec<_> = means.iter().map(|&m| desc(m, 0.5, 10)).collect();
        let g = ward_group(&d).unwrap();
        let got: Vec<Vec<usize>> = g.groups.iter().map(|g| g.clusters.clone()).collect();
        assert_eq!(got, vec![vec![0, 1], vec![2, 3], vec![4, 5], vec![6, 7]]);
        assert_eq!(g.merges.len(), 4);
        assert!(g.is_strictly_ordered());
    }

    // Oracle: replay greedy merges by exhaustive search over all current
    // group pairs, recomputing merged descriptors from raw member data.
    #[test]
    fn greedy_trace_matches_recomputed_oracle() {
        let d = [
            desc(0.2, 0.1, 30),
            desc(0.9, 0.3, 12),
            desc(3.5, 0.4, 40),
            desc(4.1, 0.6, 25),
            desc(7.8, 0.5, 33),
            desc(8.0, 0.9, 5),
            desc(15.0, 1.2, 9),
        ];
        let (groups, merges) = ward_agglomerate(&d, 4).unwrap();
        let mut sets: Vec<Vec<usize>> = (0..d.len()).map(|i| vec![i]).collect();
        let phi = |s: &Vec<usize>| {
            let n: f64 = s.iter().map(|&i| d[i].size as f64).sum();
            let m: f64 = s.iter().map(|&i| d[i].size as f64 * d[i].mean).sum::<f64>() / n;
            let sd: f64 = s.iter().map(|&i| d[i].size as f64 * d[i].std).sum::<f64>() / n;
            (n, m, sd)
        };
        for merge in &merges {
            let mut best = (0, 0, f64::INFINITY);
            for a in 0..sets.len() {
                for b in a + 1..sets.len() {
                    let (na, ma, sa) = phi(&sets[a]);
                    let (nb, mb, sb) = phi(&sets[b]);
                    let dist = (na * nb / (na + nb)).sqrt() * ((ma - mb).powi(2) + (sa - sb).powi(2)).sqrt();
                    if dist < best.2 {
                        best = (a, b, dist);
                    }
                }
            }
            let mut expect_left = sets[best.0].clone();
            expect_left.sort();
            assert_eq!(merge.left, expect_left);
            assert!((merge.distance - best.2).abs() <= 1e-9 * best.2);
            let right = sets.remove(best.1);
            sets[best.0].extend(right);
            sets[best.0].sort();
        }
        let mut got: Vec<Vec<usize>> = groups.iter().map(|g| g.clusters.clone()).collect();
        got.sort();
        sets.sort();
        assert_eq!(got, sets);
    }

    #[test]
    fn too_few_clusters() {
        let d = [desc(0.0, 0.0, 1), desc(1.0, 0.0, 1), desc(2.0, 0.0, 1)];
        assert_eq!(
            ward_group(&d),
            Err(ClusterError::TooFewClusters { found: 3, required: 4 })
        );
    }

    #[test]
    fn equal_means_break_ties_by_std() {
        let d = [
            desc(5.0, 2.0, 4),
            desc(5.0, 1.0, 4),
            desc(0.0, 0.0, 4),
            desc(9.0, 0.0, 4),
        ];
        let g = ward_group(&d).unwrap();
        assert_eq!(g.group(MotionCategory::Slow).clusters, vec![1]);
        assert_eq!(g.group(MotionCategory::Normal).clusters, vec![0]);
        assert!(!g.is_strictly_ordered());
    }
}
