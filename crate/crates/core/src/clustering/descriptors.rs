use serde::{Deserialize, Serialize};

use super::kmeans::KMeansModel;
use super::ClusterError;

/// `(mean, std)` of a cluster's magnitudes plus its size. Population
/// standard deviation, so singletons have `std = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterDescriptor {
    pub mean: f64,
    pub std: f64,
    pub size: usize,
}

impl ClusterDescriptor {
    pub fn from_members(members: &[f64]) -> Self {
        let n = members.len();
        if n == 0 {
            return Self {
                mean: 0.0,
                std: 0.0,
                size: 0,
            };
        }
        let mean = members.iter().sum::<f64>() / n as f64;
        let var = members.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        Self {
            mean,
            std: var.sqrt(),
            size: n,
        }
    }

    pub fn features(&self) -> [f64; 2] {
        [self.mean, self.std]
    }
}

/// One descriptor per k-means cluster, in cluster index order.
pub fn cluster_descriptors(model: &KMeansModel, data: &[f32]) -> Result<Vec<ClusterDescriptor>, ClusterError> {
    if model.assignments.len() != data.len() {
        return Err(ClusterError::SizeMismatch {
            expected: model.assignments.len(),
            found: data.len(),
        });
    }
    let mut members = vec![Vec::new(); model.k];
    for (&x, &a) in data.iter().zip(&model.assignments) {
        members[a].push(f64::from(x));
    }
    Ok(members.iter().map(|m| ClusterDescriptor::from_members(m)).collect())
}
