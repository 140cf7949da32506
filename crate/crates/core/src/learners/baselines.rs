use std::collections::BTreeMap;

use super::LearnerError;
use crate::corpus::{Day, UserId};

/// Predicts a train-target mean, per user or global.
#[derive(Debug, Clone, PartialEq)]
pub struct AvgModel {
    per_user: bool,
    user_means: BTreeMap<UserId, f64>,
    global: f64,
}

impl AvgModel {
    /// Prediction for `user`, and whether it fell back to the global mean
    /// because the user had no training data.
    pub fn predict(&self, user: &UserId) -> (f64, bool) {
        if !self.per_user {
            return (self.global, false);
        }
        match self.user_means.get(user) {
            Some(&m) => (m, false),
            None => (self.global, true),
        }
    }

    pub fn global_mean(&self) -> f64 {
        self.global
    }
}

pub fn fit_baseline_avg(users: &[UserId], targets: &[f64], per_user: bool) -> Result<AvgModel, LearnerError> {
    if targets.is_empty() {
        return Err(LearnerError::EmptyTrain);
    }
    if users.len() != targets.len() {
        return Err(LearnerError::LengthMismatch { rows: users.len(), targets: targets.len() });
    }
    let mut sums: BTreeMap<UserId, (f64, usize)> = BTreeMap::new();
    for (u, &t) in users.iter().zip(targets) {
        let e = sums.entry(u.clone()).or_default();
        e.0 += t;
        e.1 += 1;
    }
    Ok(AvgModel {
        per_user,
        user_means: sums.into_iter().map(|(u, (s, c))| (u, s / c as f64)).collect(),
        global: targets.iter().sum::<f64>() / targets.len() as f64,
    })
}

/// Persistence baseline: the user's most recent earlier target.
#[derive(Debug, Clone, PartialEq)]
pub struct LastModel {
    history: BTreeMap<UserId, Vec<(Day, f64)>>,
}

impl LastModel {
    /// Most recent value strictly before `day`.
    pub fn predict(&self, user: &UserId, day: Day) -> Result<f64, LearnerError> {
        let no_prior = || LearnerError::NoPrior { user: user.to_string(), day };
        let h = self.history.get(user).ok_or_else(no_prior)?;
        let pos = h.partition_point(|p| p.0 < day);
        if pos == 0 {
            return Err(no_prior());
        }
        Ok(h[pos - 1].1)
    }
}

pub fn fit_baseline_last(records: &[(UserId, Day, f64)]) -> LastModel {
    let mut history: BTreeMap<UserId, Vec<(Day, f64)>> = BTreeMap::new();
    for (u, d, v) in records {
        history.entry(u.clone()).or_default().push((*d, *v));
    }
    for h in history.values_mut() {
        h.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    }
    LastModel { history }
}

/// Most frequent training label; ties go to the low class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MajorityModel {
    pub label: bool,
}

pub fn fit_majority(labels: &[bool]) -> Result<MajorityModel, LearnerError> {
    if labels.is_empty() {
        return Err(LearnerError::EmptyTrain);
    }
    let high = labels.iter().filter(|l| **l).count();
    Ok(MajorityModel { label: 2 * high > labels.len() })
}
