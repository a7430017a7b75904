//! Least-squares polynomial fits of magnitude against box area. Used for
//! diagnostics only.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ClusterError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyFit {
    pub degree: usize,
    /// Coefficients in ascending powers of the raw input.
    pub coefficients: Vec<f64>,
    /// Euclidean norm of the residual vector.
    pub residual_norm: f64,
}

impl PolyFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Fit `y ≈ Σ a_j x^j` for `j ≤ degree` (1 or 2) via the normal equations on
/// centered and scaled inputs.
pub fn fit_polyreg(xs: &[f64], ys: &[f64], degree: usize) -> Result<PolyFit, ClusterError> {
    if xs.len() != ys.len() {
        return Err(ClusterError::SizeMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    assert!((1..=2).contains(&degree), "degree must be 1 or 2");
    let n = xs.len();
    if n < degree + 1 {
        return Err(ClusterError::RankDeficient);
    }
    let center = xs.iter().sum::<f64>() / n as f64;
    let scale = (xs.iter().map(|x| (x - center).powi(2)).sum::<f64>() / n as f64).sqrt();
    if !scale.is_finite() || scale <= 0.0 {
        return Err(ClusterError::RankDeficient);
    }
    let cols = degree + 1;
    let design = DMatrix::from_fn(n, cols, |i, j| ((xs[i] - center) / scale).powi(j as i32));
    let y = DVector::from_column_slice(ys);
    let normal = design.transpose() * &design;
    let rhs = design.transpose() * &y;

    // Reject near-singular systems before solving.
    let eig = normal.clone().symmetric_eigenvalues();
    let (lo, hi) = eig
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    if lo.is_nan() || lo <= hi * 1e-12 {
        return Err(ClusterError::RankDeficient);
    }
    let scaled = normal.cholesky().ok_or(ClusterError::RankDeficient)?.solve(&rhs);

    // Expand Σ c_j ((x - m)/s)^j into raw powers of x.
    let mut coefficients = vec![0.0; cols];
    for (j, &c) in scaled.iter().enumerate() {
        let cj = c / scale.powi(j as i32);
        for (p, coef) in coefficients.iter_mut().enumerate().take(j + 1) {
            *coef += cj * binomial(j, p) * (-center).powi((j - p) as i32);
        }
    }
    let residual = &y - &design * &scaled;
    Ok(PolyFit {
        degree,
        coefficients,
        residual_norm: residual.norm(),
    })
}
