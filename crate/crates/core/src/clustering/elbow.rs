use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kmeans::{kmeans, KMeansModel};
use super::{mix_seed, ClusterError, DEFAULT_RESTARTS};

/// WCSS curve over a `k` range and the elbow picked from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowAnalysis {
    pub k_min: usize,
    pub k_max: usize,
    /// `(k, WCSS(k))` for every k in the range.
    pub curve: Vec<(usize, f64)>,
    /// `(k, |WCSS(k-1) - 2 WCSS(k) + WCSS(k+1)|)` for interior k.
    pub second_differences: Vec<(usize, f64)>,
    pub chosen_k: usize,
    #[serde(skip)]
    pub models: Vec<KMeansModel>,
}

impl ElbowAnalysis {
    pub fn model_for(&self, k: usize) -> Option<&KMeansModel> {
        self.models.iter().find(|m| m.k == k)
    }
}

fn second_differences(curve: &[(usize, f64)]) -> Vec<(usize, f64)> {
    curve
        .windows(3)
        .map(|w| (w[1].0, (w[0].1 - 2.0 * w[1].1 + w[2].1).abs()))
        .collect()
}

/// Interior `k` maximizing the absolute discrete second difference. Values
/// within `1e-9` of the curve's scale count as ties, resolved toward the
/// smaller `k`.
pub fn elbow_from_curve(curve: &[(usize, f64)]) -> Result<usize, ClusterError> {
    elbow_from_curve_at_least(curve, 0)
}

/// As [`elbow_from_curve`], considering only interior `k >= min_k`.
pub fn elbow_from_curve_at_least(curve: &[(usize, f64)], min_k: usize) -> Result<usize, ClusterError> {
    let too_narrow = || ClusterError::RangeTooNarrow {
        k_min: curve.first().map_or(0, |c| c.0),
        k_max: curve.last().map_or(0, |c| c.0),
    };
    if curve.len() < 3 {
        return Err(too_narrow());
    }
    let diffs: Vec<(usize, f64)> = second_differences(curve).into_iter().filter(|d| d.0 >= min_k).collect();
    if diffs.is_empty() {
        return Err(too_narrow());
    }
    let scale = curve.iter().map(|c| c.1.abs()).fold(0.0, f64::max);
    let tol = 1e-9 * scale.max(f64::MIN_POSITIVE);
    let max = diffs.iter().map(|d| d.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(diffs.iter().find(|d| d.1 >= max - tol).map(|d| d.0).expect("non-empty"))
}

/// Fit k-means for every k in `[k_min, k_max]` and pick the elbow.
pub fn elbow_analysis(
    data: &[f32],
    k_min: usize,
    k_max: usize,
    seed: u64,
    restarts: usize,
) -> Result<ElbowAnalysis, ClusterError> {
    if k_min == 0 {
        return Err(ClusterError::InvalidK);
    }
    if k_max < k_min + 2 {
        return Err(ClusterError::RangeTooNarrow { k_min, k_max });
    }
    if data.len() < k_max {
        return Err(ClusterError::TooFewPoints {
            k: k_max,
            n: data.len(),
        });
    }
    // Each k has its own sub-seed, so the result is schedule independent.
    let models: Vec<KMeansModel> = (k_min..=k_max)
        .into_par_iter()
        .map(|k| kmeans(data, k, mix_seed(seed, k as u64), restarts))
        .collect::<Result<_, _>>()?;
    let curve: Vec<(usize, f64)> = models.iter().map(|m| (m.k, m.wcss)).collect();
    let chosen_k = elbow_from_curve(&curve)?;
    Ok(ElbowAnalysis {
        k_min,
        k_max,
        second_differences: second_differences(&curve),
        curve,
        chosen_k,
        models,
    })
}

pub fn select_k_elbow(data: &[f32], k_min: usize, k_max: usize, seed: u64) -> Result<usize, ClusterError> {
    elbow_analysis(data, k_min, k_max, seed, DEFAULT_RESTARTS).map(|a| a.chosen_k)
}
