use nalgebra::DMatrix;

use super::kernel::{cholesky_in_place, cholesky_solve, rbf_from_sq, rbf_kernel, sq_dists};
use super::{check_xy, LearnerError};

/// RBF kernel ridge regressor with a fitted constant offset.
#[derive(Debug, Clone, PartialEq)]
pub struct KrrModel {
    support: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    intercept: f64,
    gamma: f64,
}

/// Dual weights and offset solved from a precomputed train kernel.
pub(crate) fn krr_dual(k: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<(Vec<f64>, f64), LearnerError> {
    if k.iter().any(|v| !v.is_finite()) {
        return Err(LearnerError::NonFinite("kernel"));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let mut a = k.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += lambda;
    }
    cholesky_in_place(&mut a)?;
    let centred: Vec<f64> = y.iter().map(|v| v - mean).collect();
    Ok((cholesky_solve(&a, &centred), mean))
}

impl KrrModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let k = rbf_kernel(std::slice::from_ref(&x.to_vec()), &self.support, self.gamma);
        self.intercept + k.iter().zip(&self.alpha).map(|(k, a)| k * a).sum::<f64>()
    }

    pub fn predict_many(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        let k = rbf_kernel(xs, &self.support, self.gamma);
        (0..xs.len())
            .map(|i| self.intercept + k.row(i).iter().zip(&self.alpha).map(|(k, a)| k * a).sum::<f64>())
            .collect()
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn dual_weights(&self) -> &[f64] {
        &self.alpha
    }

    pub(crate) fn from_parts(rows: &[Vec<f64>], alpha: Vec<f64>, intercept: f64, gamma: f64) -> Self {
        KrrModel { support: rows.to_vec(), alpha, intercept, gamma }
    }
}

/// Fits `α = (K + λI)⁻¹ (y - ȳ)`; predictions are `ȳ + k(x, ·)ᵀα`.
pub fn fit_krr_rbf(x: &[Vec<f64>], y: &[f64], lambda: f64, gamma: f64) -> Result<KrrModel, LearnerError> {
    check_xy(x, y.len())?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(LearnerError::NonFinite("targets"));
    }
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(LearnerError::InvalidParam { name: "lambda".into(), value: lambda });
    }
    let k = rbf_from_sq(&sq_dists(x, x), gamma);
    let (alpha, intercept) = krr_dual(&k, y, lambda)?;
    Ok(KrrModel::from_parts(x, alpha, intercept, gamma))
}
