//! Ridge regression on constructed features with closed-form leave-one-out
//! errors.
//!
//! Features are z-scored with their own statistics and the target is centered,
//! so the penalized system has no intercept column. With `Z` the standardized
//! features and `A = ZᵀZ + αI`:
//!
//! ```text
//! w = A⁻¹ Zᵀ (y − ȳ)
//! h = diag(Z A⁻¹ Zᵀ)
//! e = ((y − ȳ − Z w) / (1 − h))²
//! ```
//!
//! `e_i` equals the squared error on row `i` of the same ridge problem refitted
//! without that row.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::StandardizationStats;
use crate::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedRidgeModel {
    /// One weight per standardized feature.
    pub weights: Vec<f64>,
    pub target_mean: f64,
    pub alpha: f64,
    pub feature_stats: StandardizationStats,
    /// Squared leave-one-out errors on the training rows.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loocv_errors: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub leverages: Vec<f64>,
}

impl FittedRidgeModel {
    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    /// Mean leave-one-out error.
    pub fn loocv_mse(&self) -> f64 {
        self.loocv_errors.iter().sum::<f64>() / self.loocv_errors.len() as f64
    }

    /// Predictions on centered scale (without `target_mean`) for raw features.
    pub fn predict_centered(&self, phi: &DMatrix<f64>) -> Result<Vec<f64>> {
        if phi.ncols() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                found: phi.ncols(),
            });
        }
        let mut out = vec![0.0; phi.nrows()];
        for (j, col) in phi.column_iter().enumerate() {
            let (m, s, w) = (
                self.feature_stats.means[j],
                self.feature_stats.stddevs[j],
                self.weights[j],
            );
            if w == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(col.iter()) {
                *o += (v - m) / s * w;
            }
        }
        Ok(out)
    }

    pub fn predict(&self, phi: &DMatrix<f64>) -> Result<Vec<f64>> {
        let mut out = self.predict_centered(phi)?;
        out.iter_mut().for_each(|v| *v += self.target_mean);
        Ok(out)
    }

    /// Prediction for a single row of raw features.
    pub fn predict_row(&self, phi_row: &[f64]) -> f64 {
        let mut acc = self.target_mean;
        for (j, v) in phi_row.iter().enumerate() {
            acc += (v - self.feature_stats.means[j]) / self.feature_stats.stddevs[j] * self.weights[j];
        }
        acc
    }
}

pub fn fit(phi: &DMatrix<f64>, y: &[f64], alpha: f64) -> Result<FittedRidgeModel> {
    let (n, p) = phi.shape();
    if n < 2 || p < 1 {
        return Err(Error::InvalidArgument(format!("ridge needs n ≥ 2 and p ≥ 1, got {n}×{p}")));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.len() });
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    if phi.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }

    let feature_stats = StandardizationStats::fit(phi);
    let z = feature_stats.apply(phi);
    let target_mean = y.iter().sum::<f64>() / n as f64;
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - target_mean));

    let mut a = z.tr_mul(&z);
    for i in 0..p {
        a[(i, i)] += alpha;
    }
    let chol = a.cholesky().ok_or(Error::NonFinite)?;
    let w = chol.solve(&z.tr_mul(&yc));
    // Columns of A⁻¹ Zᵀ give the leverages without forming the hat matrix.
    let ainv_zt = chol.solve(&z.transpose());
    let fitted = &z * &w;

    let mut leverages = Vec::with_capacity(n);
    let mut loocv_errors = Vec::with_capacity(n);
    for i in 0..n {
        let h: f64 = (0..p).map(|j| z[(i, j)] * ainv_zt[(j, i)]).sum();
        let r = (yc[i] - fitted[i]) / (1.0 - h);
        leverages.push(h);
        loocv_errors.push(r * r);
    }
    if loocv_errors.iter().any(|e| !e.is_finite()) || w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }

    Ok(FittedRidgeModel {
        weights: w.iter().copied().collect(),
        target_mean,
        alpha,
        feature_stats,
        loocv_errors,
        leverages,
    })
}
