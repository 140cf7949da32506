use nalgebra::{DMatrix, DVector};

use super::{check_xy, LearnerError};
use crate::protocol::kfold_indices;
use crate::seed::{child_seed, stage};

pub const DEFAULT_RIDGE: f64 = 1e-6;
const SFS_MIN_GAIN: f64 = 1e-9;

/// `y ≈ x·w + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + x.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>()
    }
}

/// Ridge regression with an unpenalised intercept, solved exactly on
/// centred data.
pub fn fit_linreg(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<LinearModel, LearnerError> {
    check_xy(x, y.len())?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(LearnerError::NonFinite("targets"));
    }
    let n = x.len();
    let d = x[0].len();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    if d == 0 {
        return Ok(LinearModel { weights: Vec::new(), intercept: y_mean });
    }
    let mut x_mean = vec![0.0; d];
    for row in x {
        for (m, v) in x_mean.iter_mut().zip(row) {
            *m += v / n as f64;
        }
    }
    let xc = DMatrix::from_fn(n, d, |i, j| x[i][j] - x_mean[j]);
    let yc = DVector::from_fn(n, |i, _| y[i] - y_mean);
    let mut a = xc.tr_mul(&xc);
    for j in 0..d {
        a[(j, j)] += lambda;
    }
    let b = xc.tr_mul(&yc);
    let w = match a.clone().cholesky() {
        Some(ch) => ch.solve(&b),
        None => a.svd(true, true).solve(&b, 1e-12).map_err(|_| LearnerError::NotPositiveDefinite(0))?,
    };
    let weights: Vec<f64> = w.iter().copied().collect();
    let intercept = y_mean - weights.iter().zip(&x_mean).map(|(w, m)| w * m).sum::<f64>();
    Ok(LinearModel { weights, intercept })
}

fn columns(row: &[f64], cols: &[usize]) -> Vec<f64> {
    cols.iter().map(|&c| row[c]).collect()
}

/// Pooled k-fold MSE of ridge regression restricted to `cols`.
pub fn cv_mse(
    x: &[Vec<f64>],
    y: &[f64],
    cols: &[usize],
    folds: &[(Vec<usize>, Vec<usize>)],
    lambda: f64,
) -> Result<f64, LearnerError> {
    let mut sse = 0.0;
    let mut count = 0;
    for (train, test) in folds {
        let xt: Vec<Vec<f64>> = train.iter().map(|&i| columns(&x[i], cols)).collect();
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let m = fit_linreg(&xt, &yt, lambda)?;
        for &i in test {
            sse += (m.predict(&columns(&x[i], cols)) - y[i]).powi(2);
            count += 1;
        }
    }
    Ok(sse / count as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SfsResult {
    /// Chosen columns in the order they were added.
    pub selected: Vec<usize>,
    pub cv_mse: f64,
    /// Inner-CV MSE of the intercept-only model.
    pub empty_cv_mse: f64,
}

/// Greedy forward selection by inner k-fold CV MSE.
///
/// Each step adds the column whose inclusion gives the lowest CV MSE (lowest
/// index on ties); selection stops once the best step improves by no more
/// than 1e-9 or `max_features` columns are in.
pub fn sfs_select(
    x: &[Vec<f64>],
    y: &[f64],
    max_features: usize,
    inner_k: usize,
    lambda: f64,
    seed: u64,
) -> Result<SfsResult, LearnerError> {
    check_xy(x, y.len())?;
    let n = x.len();
    let d = x[0].len();
    let k = inner_k.min(n);
    if k < 2 {
        return Ok(SfsResult { selected: Vec::new(), cv_mse: f64::NAN, empty_cv_mse: f64::NAN });
    }
    let folds = kfold_indices(n, k, child_seed(seed, &[stage::SFS])).expect("k is within 2..=n");
    let empty = cv_mse(x, y, &[], &folds, lambda)?;
    let mut selected: Vec<usize> = Vec::new();
    let mut best = empty;
    while selected.len() < max_features.min(d) {
        let mut step: Option<(usize, f64)> = None;
        for c in (0..d).filter(|c| !selected.contains(c)) {
            let mut cols = selected.clone();
            cols.push(c);
            let score = cv_mse(x, y, &cols, &folds, lambda)?;
            if step.is_none_or(|(_, s)| score < s) {
                step = Some((c, score));
            }
        }
        match step {
            Some((c, score)) if best - score > SFS_MIN_GAIN => {
                selected.push(c);
                best = score;
            }
            _ => break,
        }
    }
    Ok(SfsResult { selected, cv_mse: best, empty_cv_mse: empty })
}
