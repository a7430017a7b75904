//! Per-regime motion models and anomaly scoring.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boxes::HeadBox;
use crate::category::MotionCategory;
use crate::clustering::ClusterError;
use crate::io::FlowField;
use crate::regime::DensityRegime;
use crate::velocity::{estimate_velocities, VelocityObservation};

pub mod model;
pub mod score;

pub use model::{train, train_regime, KMeansSummary, MotionModel, TrainedRegime, TrainingConfig, MODEL_VERSION};
pub use score::{anomaly_score, categorize, normal_bounds, CategoryThresholds, NormalBounds, SCORE_EPSILON};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnomalyError {
    #[error("no k-means cluster is labeled normal")]
    EmptyNormalGroup,
    #[error("no training observations for the {0} regime")]
    EmptyTrainingSet(DensityRegime),
    #[error("invalid normal bounds ({m_min}, {m_max})")]
    InvalidBounds { m_min: f32, m_max: f32 },
    #[error("invalid category thresholds {0:?}")]
    InvalidThresholds(CategoryThresholds),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

/// Score and category of one detected person in one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnomalyEvent {
    pub frame_index: u64,
    pub head_box: HeadBox,
    pub m_norm: f32,
    pub score: f32,
    pub category: MotionCategory,
}

impl AnomalyEvent {
    pub fn from_observation(obs: &VelocityObservation, model: &MotionModel) -> Self {
        let (score, category) = model.score(obs.m_norm);
        Self {
            frame_index: obs.frame_index,
            head_box: obs.head_box,
            m_norm: obs.m_norm,
            score,
            category,
        }
    }

    /// Only non-normal events are drawn on overlays.
    pub fn is_highlighted(&self) -> bool {
        self.category.is_anomalous()
    }
}

/// Velocity estimation, scoring and categorization for one frame, in box
/// order.
pub fn infer_frame(flow: &FlowField, boxes: &[HeadBox], model: &MotionModel) -> Vec<AnomalyEvent> {
    estimate_velocities(flow, boxes, &model.normalization, model.regime)
        .iter()
        .map(|o| AnomalyEvent::from_observation(o, model))
        .collect()
}

/// JSON Lines wire form of an [`AnomalyEvent`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub frame: u64,
    #[serde(rename = "box")]
    pub bbox: [f32; 4],
    pub m_norm: f32,
    pub score_pct: f64,
    pub category: MotionCategory,
}

/// Round a score to 0.1 %.
pub fn round_score(score: f32) -> f64 {
    let r = (f64::from(score) * 10.0).round() / 10.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

impl From<&AnomalyEvent> for EventRecord {
    fn from(e: &AnomalyEvent) -> Self {
        let b = &e.head_box;
        Self {
            frame: e.frame_index,
            bbox: [b.x_min, b.y_min, b.x_max, b.y_max],
            m_norm: e.m_norm,
            score_pct: round_score(e.score),
            category: e.category,
        }
    }
}

pub fn write_event<W: Write>(sink: &mut W, event: &AnomalyEvent) -> io::Result<()> {
    serde_json::to_writer(&mut *sink, &EventRecord::from(event))?;
    sink.write_all(b"\n")
}
