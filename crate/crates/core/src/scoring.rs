//! Evaluation metrics.
//!
//! Metrics whose denominator vanishes return `None` rather than a number;
//! reports render those as `NA`.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TargetRange;

#[derive(Debug, Error, PartialEq)]
pub enum ScoringError {
    #[error("length mismatch: {preds} predictions vs {truths} truths")]
    LengthMismatch { preds: usize, truths: usize },
    #[error("no instances to score")]
    Empty,
    #[error("per-user grouping needs ≥ 2 instances per user; a user has {0}")]
    TooFewPerUser(usize),
    #[error("invalid range [{0}, {1}]")]
    InvalidRange(f64, f64),
}

/// Which mean the R² denominator is taken around.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Grouping {
    Global,
    PerUser,
}

/// One computed metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricResult {
    pub name: String,
    pub value: Option<f64>,
    pub grouping: Grouping,
    pub n: usize,
}

fn check(preds: usize, truths: usize) -> Result<(), ScoringError> {
    if preds != truths {
        return Err(ScoringError::LengthMismatch { preds, truths });
    }
    if preds == 0 {
        return Err(ScoringError::Empty);
    }
    Ok(())
}

pub fn mse(preds: &[f64], truths: &[f64]) -> Result<f64, ScoringError> {
    check(preds.len(), truths.len())?;
    Ok(preds.iter().zip(truths).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / preds.len() as f64)
}

pub fn rmse(preds: &[f64], truths: &[f64]) -> Result<f64, ScoringError> {
    mse(preds, truths).map(f64::sqrt)
}

/// Coefficient of determination with a global or per-user baseline mean.
///
/// Under [`Grouping::PerUser`] each residual's baseline is the mean of the
/// truths of that instance's own user within the scored pool, so predicting
/// each user's mean scores exactly 0. Returns `Ok(None)` for a zero
/// denominator.
pub fn r2_grouped<U: Eq + Hash>(
    preds: &[f64],
    truths: &[f64],
    user_of: &[U],
    mode: Grouping,
) -> Result<Option<f64>, ScoringError> {
    check(preds.len(), truths.len())?;
    check(user_of.len(), truths.len())?;
    let ss_res: f64 = preds.iter().zip(truths).map(|(p, t)| (p - t).powi(2)).sum();
    let ss_tot: f64 = match mode {
        Grouping::Global => {
            let mean = truths.iter().sum::<f64>() / truths.len() as f64;
            truths.iter().map(|t| (t - mean).powi(2)).sum()
        }
        Grouping::PerUser => {
            let mut acc: HashMap<&U, (f64, usize)> = HashMap::new();
            for (u, t) in user_of.iter().zip(truths) {
                let e = acc.entry(u).or_insert((0.0, 0));
                e.0 += t;
                e.1 += 1;
            }
            if let Some((_, n)) = acc.values().find(|(_, n)| *n < 2) {
                return Err(ScoringError::TooFewPerUser(*n));
            }
            user_of
                .iter()
                .zip(truths)
                .map(|(u, t)| {
                    let (s, n) = acc[u];
                    (t - s / n as f64).powi(2)
                })
                .sum()
        }
    };
    if ss_tot == 0.0 {
        return Ok(None);
    }
    Ok(Some(1.0 - ss_res / ss_tot))
}

/// Fraction of predictions whose squared error is below `(w/2)²`, where
/// `w = (hi - lo) / n_classes` is the class width of the scale.
pub fn likamwa_accuracy(
    preds: &[f64],
    truths: &[f64],
    range: TargetRange,
    n_classes: usize,
) -> Result<f64, ScoringError> {
    check(preds.len(), truths.len())?;
    if range.hi.partial_cmp(&range.lo) != Some(std::cmp::Ordering::Greater) || n_classes == 0 {
        return Err(ScoringError::InvalidRange(range.lo, range.hi));
    }
    let width = (range.hi - range.lo) / n_classes as f64;
    let threshold = (width / 2.0).powi(2);
    let correct = preds.iter().zip(truths).filter(|(p, t)| (*p - *t).powi(2) < threshold).count();
    Ok(correct as f64 / preds.len() as f64)
}

/// `(TP / (TP + FN), TN / (TN + FP))`; a side with no instances is `None`.
pub fn sensitivity_specificity(
    preds: &[bool],
    truths: &[bool],
) -> Result<(Option<f64>, Option<f64>), ScoringError> {
    if preds.len() != truths.len() {
        return Err(ScoringError::LengthMismatch { preds: preds.len(), truths: truths.len() });
    }
    let (mut tp, mut fneg, mut tn, mut fp) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &t) in preds.iter().zip(truths) {
        match (t, p) {
            (true, true) => tp += 1,
            (true, false) => fneg += 1,
            (false, false) => tn += 1,
            (false, true) => fp += 1,
        }
    }
    let ratio = |a: usize, b: usize| (a + b > 0).then(|| a as f64 / (a + b) as f64);
    Ok((ratio(tp, fneg), ratio(tn, fp)))
}

/// Mean of sensitivity and specificity, when both are defined.
pub fn balanced_accuracy(preds: &[bool], truths: &[bool]) -> Result<Option<f64>, ScoringError> {
    let (sens, spec) = sensitivity_specificity(preds, truths)?;
    Ok(sens.zip(spec).map(|(a, b)| 0.5 * (a + b)))
}

pub fn accuracy<T: PartialEq>(preds: &[T], truths: &[T]) -> Result<f64, ScoringError> {
    check(preds.len(), truths.len())?;
    let hits = preds.iter().zip(truths).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / preds.len() as f64)
}
