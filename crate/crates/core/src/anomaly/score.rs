use serde::{Deserialize, Serialize};

use super::AnomalyError;
use crate::category::MotionCategory;
use crate::clustering::{KMeansModel, SemanticGrouping};

/// Denominator floor for nearly halted normal bands.
pub const SCORE_EPSILON: f64 = 1e-6;

/// Extremes of the magnitudes in all Normal-labeled clusters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalBounds {
    pub m_min: f32,
    pub m_max: f32,
}

impl NormalBounds {
    pub fn new(m_min: f32, m_max: f32) -> Result<Self, AnomalyError> {
        let b = Self { m_min, m_max };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), AnomalyError> {
        if self.m_min.is_finite() && self.m_max.is_finite() && 0.0 <= self.m_min && self.m_min <= self.m_max {
            Ok(())
        } else {
            Err(AnomalyError::InvalidBounds {
                m_min: self.m_min,
                m_max: self.m_max,
            })
        }
    }

    pub fn contains(&self, m: f32) -> bool {
        self.m_min <= m && m <= self.m_max
    }
}

/// Score cut-offs, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryThresholds {
    /// Scores at or above this are Fast.
    pub fast_at: f32,
    /// Scores at or below this are Halt.
    pub slow_low: f32,
    /// Scores in `(slow_low, slow_high]` are Slow.
    pub slow_high: f32,
}

impl Default for CategoryThresholds {
    fn default() -> Self {
        Self {
            fast_at: 20.0,
            slow_low: -90.0,
            slow_high: -82.0,
        }
    }
}

impl CategoryThresholds {
    pub fn validate(&self) -> Result<(), AnomalyError> {
        if self.slow_low < self.slow_high && self.slow_high < 0.0 && 0.0 < self.fast_at {
            Ok(())
        } else {
            Err(AnomalyError::InvalidThresholds(*self))
        }
    }
}

/// Min and max member magnitude over every cluster labeled Normal.
pub fn normal_bounds(
    grouping: &SemanticGrouping,
    model: &KMeansModel,
    data: &[f32],
) -> Result<NormalBounds, AnomalyError> {
    let normal = &grouping.group(MotionCategory::Normal).clusters;
    if normal.is_empty() {
        return Err(AnomalyError::EmptyNormalGroup);
    }
    let mut lo = f32::INFINITY;
    let mut hi = f32::NEG_INFINITY;
    for (&m, &a) in data.iter().zip(&model.assignments) {
        if normal.contains(&a) {
            lo = lo.min(m);
            hi = hi.max(m);
        }
    }
    if lo > hi {
        return Err(AnomalyError::EmptyNormalGroup);
    }
    NormalBounds::new(lo, hi)
}

/// Signed percentage deviation from the normal band: positive above
/// `m_max`, negative at or below `m_min`, zero in between.
pub fn anomaly_score(m: f32, bounds: &NormalBounds) -> f32 {
    let m = f64::from(m);
    let lo = f64::from(bounds.m_min);
    let hi = f64::from(bounds.m_max);
    let floor = |d: f64| if d < SCORE_EPSILON { SCORE_EPSILON } else { d };
    let score = if m > hi {
        (m - hi) / floor(hi) * 100.0
    } else if m <= lo {
        (m - lo) / floor(lo) * 100.0
    } else {
        0.0
    };
    score as f32
}

pub fn categorize(score: f32, thresholds: &CategoryThresholds) -> MotionCategory {
    if score >= thresholds.fast_at {
        MotionCategory::Fast
    } else if score <= thresholds.slow_low {
        MotionCategory::Halt
    } else if score <= thresholds.slow_high {
        MotionCategory::Slow
    } else {
        MotionCategory::Normal
    }
}
