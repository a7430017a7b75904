//! Unsupervised structure over 1-D velocity observations.
//!
//! K-means (k-means++ seeding, Lloyd iterations, best of several restarts)
//! partitions the magnitudes; the elbow of the WCSS curve picks `k`. Cluster
//! `(mean, std)` descriptors are then merged with Ward's linkage into four
//! ordered motion categories. Silhouette scores and polynomial regression
//! are diagnostics only.

use std::ops::Range;

use thiserror::Error;

pub mod descriptors;
pub mod elbow;
pub mod kmeans;
pub mod polyreg;
pub mod silhouette;
pub mod ward;

pub use descriptors::{cluster_descriptors, ClusterDescriptor};
pub use elbow::{elbow_analysis, elbow_from_curve, elbow_from_curve_at_least, select_k_elbow, ElbowAnalysis};
pub use kmeans::{kmeans, kmeans_plus_plus, lloyd, wcss, KMeansModel, LloydRun, MAX_LLOYD_ITERATIONS};
pub use polyreg::{fit_polyreg, PolyFit};
pub use silhouette::silhouette;
pub use ward::{ward_agglomerate, ward_distance, ward_group, ClusterGroup, SemanticGroup, SemanticGrouping, WardMerge};

/// Default number of k-means restarts.
pub const DEFAULT_RESTARTS: usize = 10;
/// Default elbow search range, inclusive.
pub const DEFAULT_K_RANGE: (usize, usize) = (2, 12);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("k = {k} needs at least {k} observations, have {n}")]
    TooFewPoints { k: usize, n: usize },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("expected {expected} entries, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("elbow range [{k_min}, {k_max}] has no interior point")]
    RangeTooNarrow { k_min: usize, k_max: usize },
    #[error("silhouette needs at least two non-empty clusters")]
    SingleCluster,
    #[error("semantic grouping needs at least {required} clusters, have {found}")]
    TooFewClusters { found: usize, required: usize },
    #[error("regression system is rank deficient")]
    RankDeficient,
    #[error("observation set contains a non-finite value")]
    NonFinite,
}

/// Contiguous block of observations that came from one scene.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneSpan {
    pub scene_id: String,
    pub range: Range<usize>,
}

/// The flattened magnitudes `m_1 … m_N` fed to clustering, with per-scene
/// provenance. Boundary frames are excluded before observations get here.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservationSet {
    magnitudes: Vec<f32>,
    spans: Vec<SceneSpan>,
}

impl ObservationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_magnitudes(magnitudes: Vec<f32>) -> Self {
        let n = magnitudes.len();
        Self {
            magnitudes,
            spans: vec![SceneSpan {
                scene_id: String::new(),
                range: 0..n,
            }],
        }
    }

    /// Append one scene's magnitudes.
    pub fn extend_scene(&mut self, scene_id: &str, magnitudes: impl IntoIterator<Item = f32>) {
        let start = self.magnitudes.len();
        self.magnitudes.extend(magnitudes);
        let end = self.magnitudes.len();
        match self.spans.last_mut() {
            Some(last) if last.scene_id == scene_id && last.range.end == start => last.range.end = end,
            _ => self.spans.push(SceneSpan {
                scene_id: scene_id.to_string(),
                range: start..end,
            }),
        }
    }

    pub fn magnitudes(&self) -> &[f32] {
        &self.magnitudes
    }

    pub fn spans(&self) -> &[SceneSpan] {
        &self.spans
    }

    pub fn len(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.magnitudes.is_empty()
    }
}

impl AsRef<[f32]> for ObservationSet {
    fn as_ref(&self) -> &[f32] {
        &self.magnitudes
    }
}

pub(crate) fn to_f64(data: &[f32]) -> Result<Vec<f64>, ClusterError> {
    data.iter()
        .map(|&v| {
            if v.is_finite() {
                Ok(f64::from(v))
            } else {
                Err(ClusterError::NonFinite)
            }
        })
        .collect()
}

// SplitMix64 finalizer, used to derive independent sub-seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
