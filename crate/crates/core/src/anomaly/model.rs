use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::score::{anomaly_score, categorize, normal_bounds, CategoryThresholds, NormalBounds};
use super::AnomalyError;
use crate::category::MotionCategory;
use crate::clustering::ward::{ward_group, SEMANTIC_GROUPS};
use crate::clustering::{
    cluster_descriptors, elbow_analysis, elbow_from_curve_at_least, kmeans, ClusterDescriptor, ElbowAnalysis,
    KMeansModel, ObservationSet, SemanticGrouping, DEFAULT_K_RANGE, DEFAULT_RESTARTS,
};
use crate::regime::DensityRegime;
use crate::velocity::NormalizationConfig;

pub const MODEL_VERSION: u32 = 1;

/// The k-means part of a trained model, without per-observation assignments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansSummary {
    pub k: usize,
    pub centroids: Vec<f64>,
    pub cluster_sizes: Vec<usize>,
    pub wcss: f64,
    pub seed: u64,
}

impl From<&KMeansModel> for KMeansSummary {
    fn from(m: &KMeansModel) -> Self {
        Self {
            k: m.k,
            centroids: m.centroids.clone(),
            cluster_sizes: m.cluster_sizes(),
            wcss: m.wcss,
            seed: m.seed,
        }
    }
}

/// Trained artifact for one density regime. Immutable after training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionModel {
    pub version: u32,
    pub regime: DensityRegime,
    pub kmeans: KMeansSummary,
    pub descriptors: Vec<ClusterDescriptor>,
    pub grouping: SemanticGrouping,
    pub bounds: NormalBounds,
    pub normalization: NormalizationConfig,
    pub thresholds: CategoryThresholds,
}

impl MotionModel {
    pub fn score(&self, m_norm: f32) -> (f32, MotionCategory) {
        let score = anomaly_score(m_norm, &self.bounds);
        (score, categorize(score, &self.thresholds))
    }

    /// Check every structural invariant; used after loading from disk.
    pub fn validate(&self) -> Result<(), String> {
        if self.version != MODEL_VERSION {
            return Err(format!("model version {} (expected {MODEL_VERSION})", self.version));
        }
        self.bounds.validate().map_err(|e| e.to_string())?;
        self.thresholds.validate().map_err(|e| e.to_string())?;
        self.normalization.validate().map_err(|e| e.to_string())?;
        let k = self.kmeans.k;
        if self.kmeans.centroids.len() != k || self.kmeans.cluster_sizes.len() != k || self.descriptors.len() != k {
            return Err(format!("k = {k} but centroid/size/descriptor counts disagree"));
        }
        if self.kmeans.cluster_sizes.contains(&0) {
            return Err("empty k-means cluster".into());
        }
        if !self.kmeans.centroids.iter().all(|c| c.is_finite()) || !self.kmeans.wcss.is_finite() {
            return Err("non-finite k-means statistic".into());
        }
        for d in &self.descriptors {
            if !(d.mean.is_finite() && d.std.is_finite() && d.std >= 0.0) {
                return Err(format!("invalid descriptor {d:?}"));
            }
        }
        if self.grouping.groups.len() != SEMANTIC_GROUPS {
            return Err(format!("{} semantic groups", self.grouping.groups.len()));
        }
        for (g, label) in self.grouping.groups.iter().zip(MotionCategory::ORDERED) {
            if g.label != label {
                return Err(format!("group labeled {} where {} expected", g.label, label));
            }
        }
        if !self
            .grouping
            .groups
            .windows(2)
            .all(|w| w[0].descriptor.mean <= w[1].descriptor.mean)
        {
            return Err("semantic groups not ordered by mean".into());
        }
        let mut seen = vec![0usize; k];
        for g in &self.grouping.groups {
            for &c in &g.clusters {
                if c >= k {
                    return Err(format!("group references cluster {c} of {k}"));
                }
                seen[c] += 1;
            }
        }
        if seen.iter().any(|&n| n != 1) {
            return Err("k-means clusters not partitioned by groups".into());
        }
        if self.grouping.group(MotionCategory::Normal).clusters.is_empty() {
            return Err("empty normal group".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub seed: u64,
    pub restarts: usize,
    pub normalization: NormalizationConfig,
    pub thresholds: CategoryThresholds,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            k_min: DEFAULT_K_RANGE.0,
            k_max: DEFAULT_K_RANGE.1,
            seed: 0x5EED,
            restarts: DEFAULT_RESTARTS,
            normalization: NormalizationConfig::default(),
            thresholds: CategoryThresholds::default(),
        }
    }
}

/// A trained model together with the diagnostics produced on the way.
#[derive(Debug, Clone)]
pub struct TrainedRegime {
    pub model: MotionModel,
    pub elbow: ElbowAnalysis,
    pub observations: usize,
}

/// elbow → k-means → descriptors → Ward grouping → normal bounds.
pub fn train_regime(
    regime: DensityRegime,
    data: &ObservationSet,
    cfg: &TrainingConfig,
) -> Result<TrainedRegime, AnomalyError> {
    if data.is_empty() {
        return Err(AnomalyError::EmptyTrainingSet(regime));
    }
    cfg.thresholds.validate()?;
    let magnitudes = data.magnitudes();
    let mut elbow = elbow_analysis(magnitudes, cfg.k_min, cfg.k_max, cfg.seed, cfg.restarts)?;
    // Four semantic groups need at least four clusters.
    elbow.chosen_k = elbow_from_curve_at_least(&elbow.curve, SEMANTIC_GROUPS)?;
    let km = match elbow.model_for(elbow.chosen_k) {
        Some(m) => m.clone(),
        None => kmeans(magnitudes, elbow.chosen_k, cfg.seed, cfg.restarts)?,
    };
    let descriptors = cluster_descriptors(&km, magnitudes)?;
    let grouping = ward_group(&descriptors)?;
    let bounds = normal_bounds(&grouping, &km, magnitudes)?;
    let model = MotionModel {
        version: MODEL_VERSION,
        regime,
        kmeans: KMeansSummary::from(&km),
        descriptors,
        grouping,
        bounds,
        normalization: cfg.normalization,
        thresholds: cfg.thresholds,
    };
    debug_assert!(model.validate().is_ok());
    Ok(TrainedRegime {
        model,
        elbow,
        observations: data.len(),
    })
}

/// Train one model per regime. A failing regime does not stop the others.
pub fn train(
    data: &BTreeMap<DensityRegime, ObservationSet>,
    cfg: &TrainingConfig,
) -> BTreeMap<DensityRegime, Result<TrainedRegime, AnomalyError>> {
    data.iter()
        .map(|(&regime, set)| (regime, train_regime(regime, set, cfg)))
        .collect()
}
