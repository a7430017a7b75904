//! Model-selection diagnostics: WCSS and silhouette against `k`, and
//! polynomial fits of raw box magnitude against box area.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::clustering::{elbow_analysis, fit_polyreg, silhouette, ClusterError, PolyFit};
use crate::regime::DensityRegime;
use crate::velocity::VelocityObservation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KRow {
    pub k: usize,
    pub wcss: f64,
    /// Absolute second difference; absent at the ends of the range.
    pub second_difference: Option<f64>,
    pub silhouette: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub table: Vec<KRow>,
    pub elbow_k: usize,
    pub silhouette_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaRegression {
    pub linear: PolyFit,
    pub quadratic: PolyFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeDiagnostics {
    pub regime: DensityRegime,
    pub observations: usize,
    /// Absent when every box has the same area.
    pub regression: Option<AreaRegression>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regression_error: Option<String>,
    pub selection: KSelection,
}

/// WCSS, second difference and silhouette for every `k` in range.
pub fn k_selection(
    data: &[f32],
    k_min: usize,
    k_max: usize,
    seed: u64,
    restarts: usize,
) -> Result<KSelection, ClusterError> {
    let elbow = elbow_analysis(data, k_min.max(2), k_max, seed, restarts)?;
    let mut table = Vec::with_capacity(elbow.curve.len());
    for (model, &(k, wcss)) in elbow.models.iter().zip(&elbow.curve) {
        let second_difference = elbow.second_differences.iter().find(|d| d.0 == k).map(|d| d.1);
        table.push(KRow {
            k,
            wcss,
            second_difference,
            silhouette: silhouette(data, &model.assignments)?,
        });
    }
    let best = table.iter().map(|r| r.silhouette).fold(f64::NEG_INFINITY, f64::max);
    let silhouette_k = table
        .iter()
        .find(|r| r.silhouette == best)
        .map(|r| r.k)
        .expect("non-empty");
    Ok(KSelection {
        table,
        elbow_k: elbow.chosen_k,
        silhouette_k,
    })
}

/// Degree 1 and 2 fits of raw mean magnitude against box area.
pub fn area_regression(observations: &[VelocityObservation]) -> Result<AreaRegression, ClusterError> {
    let xs: Vec<f64> = observations.iter().map(|o| f64::from(o.box_area)).collect();
    let ys: Vec<f64> = observations.iter().map(|o| f64::from(o.raw_mean)).collect();
    Ok(AreaRegression {
        linear: fit_polyreg(&xs, &ys, 1)?,
        quadratic: fit_polyreg(&xs, &ys, 2)?,
    })
}

pub fn diagnose_regime(
    regime: DensityRegime,
    observations: &[VelocityObservation],
    k_min: usize,
    k_max: usize,
    seed: u64,
    restarts: usize,
) -> Result<RegimeDiagnostics, ClusterError> {
    // Too few points for a quadratic is an error; a degenerate spread of
    // areas only drops the regression from the report.
    if observations.len() < 3 {
        return Err(ClusterError::RankDeficient);
    }
    let (regression, regression_error) = match area_regression(observations) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let data: Vec<f32> = observations.iter().map(|o| o.m_norm).collect();
    Ok(RegimeDiagnostics {
        regime,
        observations: observations.len(),
        regression,
        regression_error,
        selection: k_selection(&data, k_min, k_max, seed, restarts)?,
    })
}

/// Diagnostics for every regime present in `observations`.
pub fn diagnose(
    observations: &[VelocityObservation],
    k_min: usize,
    k_max: usize,
    seed: u64,
    restarts: usize,
) -> BTreeMap<DensityRegime, Result<RegimeDiagnostics, ClusterError>> {
    let mut by_regime: BTreeMap<DensityRegime, Vec<VelocityObservation>> = BTreeMap::new();
    for o in observations {
        by_regime.entry(o.regime).or_default().push(*o);
    }
    by_regime
        .into_iter()
        .map(|(r, obs)| (r, diagnose_regime(r, &obs, k_min, k_max, seed, restarts)))
        .collect()
}
