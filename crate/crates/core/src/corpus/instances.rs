use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CorpusError, Dataset, Day, UserId};

/// Per-dimension aggregation over the present days of a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Mean,
    Sum,
}

/// Aggregated feature vector for one report, with its window metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub user: UserId,
    pub form_day: Day,
    /// Nominal inclusive `[start, end]` day window; `end == form_day`. May
    /// start before the first recorded day.
    pub window: (Day, Day),
    pub features: Vec<f64>,
    pub target: f64,
    /// Other targets reported on the same form.
    pub aux_targets: BTreeMap<String, f64>,
}

impl Instance {
    pub fn window_len(&self) -> Day {
        self.window.1 - self.window.0 + 1
    }
}

/// Instances of one target, in `(user, form_day)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSet {
    instances: Vec<Instance>,
    dim: usize,
    lag_columns: Vec<usize>,
    target: String,
    dropped: usize,
}

impl InstanceSet {
    /// Assembles a set; every instance must have `dim` features.
    ///
    /// `lag_columns` declares which feature columns hold prior target values.
    pub fn new(
        instances: Vec<Instance>,
        dim: usize,
        lag_columns: Vec<usize>,
        target: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        if let Some(bad) = instances.iter().find(|i| i.features.len() != dim) {
            return Err(CorpusError::Schema(format!(
                "instance of user {} day {} has {} features, expected {dim}",
                bad.user,
                bad.form_day,
                bad.features.len()
            )));
        }
        if let Some(&c) = lag_columns.iter().find(|&&c| c >= dim) {
            return Err(CorpusError::Schema(format!("lag column {c} out of range")));
        }
        Ok(InstanceSet { instances, dim, lag_columns, target: target.into(), dropped: 0 })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn get(&self, i: usize) -> &Instance {
        &self.instances[i]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lag_columns(&self) -> &[usize] {
        &self.lag_columns
    }

    pub fn target_name(&self) -> &str {
        &self.target
    }

    /// Reports that failed the data-density rule when the set was built.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn targets(&self) -> Vec<f64> {
        self.instances.iter().map(|i| i.target).collect()
    }

    pub fn users(&self) -> Vec<UserId> {
        self.indices_by_user().into_keys().collect()
    }

    pub fn user_of(&self) -> Vec<UserId> {
        self.instances.iter().map(|i| i.user.clone()).collect()
    }

    pub fn indices_by_user(&self) -> BTreeMap<UserId, Vec<usize>> {
        let mut out: BTreeMap<UserId, Vec<usize>> = BTreeMap::new();
        for (i, inst) in self.instances.iter().enumerate() {
            out.entry(inst.user.clone()).or_default().push(i);
        }
        out
    }

    pub fn rows(&self, idx: &[usize]) -> Vec<Vec<f64>> {
        idx.iter().map(|&i| self.instances[i].features.clone()).collect()
    }

    pub fn targets_of(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&i| self.instances[i].target).collect()
    }

    /// Same instances with new feature rows (one per instance, equal length).
    pub fn with_features(
        &self,
        rows: Vec<Vec<f64>>,
        lag_columns: Vec<usize>,
    ) -> Result<InstanceSet, CorpusError> {
        if rows.len() != self.instances.len() {
            return Err(CorpusError::Schema("feature row count mismatch".into()));
        }
        let dim = rows.first().map_or(0, Vec::len);
        let instances = self
            .instances
            .iter()
            .zip(rows)
            .map(|(inst, f)| Instance { features: f, ..inst.clone() })
            .collect();
        let mut out = InstanceSet::new(instances, dim, lag_columns, self.target.clone())?;
        out.dropped = self.dropped;
        Ok(out)
    }

    /// Same instances with new targets.
    pub fn with_targets(&self, targets: &[f64]) -> InstanceSet {
        assert_eq!(targets.len(), self.instances.len());
        let mut out = self.clone();
        for (inst, &t) in out.instances.iter_mut().zip(targets) {
            inst.target = t;
        }
        out
    }

    /// Keeps only the listed feature columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> InstanceSet {
        let rows = self.instances.iter().map(|i| cols.iter().map(|&c| i.features[c]).collect()).collect();
        let lags = cols
            .iter()
            .enumerate()
            .filter(|(_, c)| self.lag_columns.contains(c))
            .map(|(new, _)| new)
            .collect();
        let mut out = self.with_features(rows, lags).expect("columns are in range");
        out.dim = cols.len();
        out
    }

    /// Keeps the listed instances, in the given order.
    pub fn subset(&self, idx: &[usize]) -> InstanceSet {
        InstanceSet {
            instances: idx.iter().map(|&i| self.instances[i].clone()).collect(),
            dim: self.dim,
            lag_columns: self.lag_columns.clone(),
            target: self.target.clone(),
            dropped: self.dropped,
        }
    }
}

/// Builds one instance per report of `target`.
///
/// The window of a report on day `t` is `[max(0, t - W + 1), t]`. Features
/// are the per-dimension aggregation over the raw days present in the
/// window, followed by the user's `lags` most recent prior target values
/// (most recent first). Reports whose window holds no raw day, or with
/// fewer than `lags` earlier reports, are dropped and counted.
pub fn build_instances(
    ds: &Dataset,
    target: &str,
    window_days: usize,
    aggregation: Aggregation,
    lags: usize,
) -> Result<InstanceSet, CorpusError> {
    ds.target_range(target)?;
    if window_days == 0 {
        return Err(CorpusError::InvalidConfig("window_days must be ≥ 1".into()));
    }
    let dim = ds.feature_dim();

    let mut raw_by_user: BTreeMap<&UserId, Vec<(Day, &[f64])>> = BTreeMap::new();
    for r in ds.raw_days() {
        raw_by_user.entry(&r.user).or_default().push((r.day, &r.features));
    }

    let mut instances = Vec::new();
    let mut dropped = 0;
    let mut history: Vec<f64> = Vec::new();
    let mut current_user: Option<&UserId> = None;
    for rep in ds.reports() {
        let Some(&y) = rep.targets.get(target) else { continue };
        if current_user != Some(&rep.user) {
            current_user = Some(&rep.user);
            history.clear();
        }
        let start = rep.day - window_days as Day + 1;
        let days = raw_by_user.get(&rep.user).map_or(&[][..], |v| v.as_slice());
        let lo = days.partition_point(|d| d.0 < start);
        let hi = days.partition_point(|d| d.0 <= rep.day);
        let present = &days[lo..hi];

        if present.is_empty() || history.len() < lags {
            dropped += 1;
            history.push(y);
            continue;
        }

        let mut features = vec![0.0; dim];
        for (_, f) in present {
            for (acc, v) in features.iter_mut().zip(f.iter()) {
                *acc += v;
            }
        }
        if aggregation == Aggregation::Mean {
            let n = present.len() as f64;
            features.iter_mut().for_each(|v| *v /= n);
        }
        features.extend(history.iter().rev().take(lags));

        let aux_targets =
            rep.targets.iter().filter(|(k, _)| k.as_str() != target).map(|(k, v)| (k.clone(), *v)).collect();
        instances.push(Instance {
            user: rep.user.clone(),
            form_day: rep.day,
            window: (start, rep.day),
            features,
            target: y,
            aux_targets,
        });
        history.push(y);
    }

    if instances.is_empty() {
        return Err(CorpusError::NoInstances { target: target.to_string(), window: window_days, lags });
    }
    let mut set = InstanceSet::new(instances, dim + lags, (dim..dim + lags).collect(), target)?;
    set.dropped = dropped;
    Ok(set)
}
