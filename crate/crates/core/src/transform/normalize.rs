use super::TransformError;
use crate::corpus::InstanceSet;

fn zero_variance(std: f64, mean: f64) -> bool {
    std <= 1e-12 * (1.0 + mean.abs())
}

/// Column-wise standardisation with statistics frozen at fit time.
#[derive(Debug, Clone, PartialEq)]
pub struct ZScaler {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl ZScaler {
    /// Fits population mean and std per column.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self, TransformError> {
        let first = rows.first().ok_or(TransformError::EmptyTrain)?;
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
        Ok(ZScaler { mean, std })
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| if zero_variance(*s, *m) { 0.0 } else { (v - m) / s })
            .collect()
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }
}

/// Z-scores every feature with the statistics of the instance's own user,
/// computed over all of that user's instances.
///
/// Test instances contribute to the statistics; this is the leaky
/// normalisation whose effect the P3 "+" settings measure.
pub fn per_user_zscore(xs: &InstanceSet) -> Result<InstanceSet, TransformError> {
    let mut rows: Vec<Vec<f64>> = vec![Vec::new(); xs.len()];
    for (user, idx) in xs.indices_by_user() {
        if idx.len() < 2 {
            return Err(TransformError::SingleInstanceUser(user));
        }
        let user_rows = xs.rows(&idx);
        let scaler = ZScaler::fit(&user_rows)?;
        for (i, r) in idx.iter().zip(&user_rows) {
            rows[*i] = scaler.transform_row(r);
        }
    }
    Ok(xs.with_features(rows, xs.lag_columns().to_vec()).expect("row count preserved"))
}

/// Global z-score fitted on `train` only and applied to `apply_to`.
pub fn train_fitted_zscore(
    train: &InstanceSet,
    apply_to: &InstanceSet,
) -> Result<InstanceSet, TransformError> {
    let scaler = ZScaler::fit(&train.rows(&(0..train.len()).collect::<Vec<_>>()))?;
    let rows = scaler.transform(&apply_to.rows(&(0..apply_to.len()).collect::<Vec<_>>()));
    Ok(apply_to.with_features(rows, apply_to.lag_columns().to_vec()).expect("row count preserved"))
}
