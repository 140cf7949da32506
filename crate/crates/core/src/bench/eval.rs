//! Fold loops shared by the pipelines.

use super::report::{Provenance, ReportRow, ReportTable};
use super::{BenchError, ExperimentConfig};
use crate::corpus::{Dataset, InstanceSet, UserId};
use crate::learners::{
    fit_baseline_avg, fit_baseline_last, fit_linreg, fit_majority, fit_searched, sfs_select, KernelCache,
    ModelSpec, DEFAULT_RIDGE,
};
use crate::protocol::{generate_splits, LeakageSummary, Protocol, Split};
use crate::seed::child_seed;
use crate::transform::ZScaler;

/// Accumulates rows and notes for one report.
pub(crate) struct Recorder {
    experiment: String,
    target: String,
    seed: u64,
    pub rows: Vec<ReportRow>,
    pub notes: Vec<String>,
}

impl Recorder {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, BenchError> {
        Ok(Recorder {
            experiment: cfg.experiment()?.to_string(),
            target: cfg.target.clone(),
            seed: cfg.seed,
            rows: Vec::new(),
            notes: Vec::new(),
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        setting: &str,
        protocol: Protocol,
        mode: &str,
        metric: &str,
        value: Option<f64>,
        audit: &LeakageSummary,
        n: usize,
    ) {
        self.rows.push(ReportRow {
            experiment: self.experiment.clone(),
            setting: setting.to_string(),
            protocol: protocol.to_string(),
            mode: mode.to_string(),
            target: self.target.clone(),
            metric: metric.to_string(),
            value: value.filter(|v| v.is_finite()),
            user_overlap: audit.user_overlap,
            max_window_overlap: audit.max_window_overlap,
            target_leak: audit.target_leak,
            n,
            seed: self.seed,
        });
    }

    pub fn note(&mut self, note: String) {
        self.notes.push(note);
    }

    pub fn finish(self, ds: &Dataset, cfg: &ExperimentConfig) -> ReportTable {
        ReportTable {
            rows: self.rows,
            provenance: Provenance {
                config: cfg.echo(),
                seed: cfg.seed,
                dataset_digest: ds.digest(),
                notes: self.notes,
            },
        }
    }
}

/// Stable seed-path tag of a protocol.
pub(crate) fn protocol_tag(p: Protocol) -> u64 {
    match p {
        Protocol::Louocv => 0,
        Protocol::Loiocv => 1,
        Protocol::Mixed => 2,
    }
}

/// Splits of one protocol with their audit.
pub(crate) struct Folds {
    pub protocol: Protocol,
    pub splits: Vec<Split>,
    pub audit: LeakageSummary,
}

pub(crate) fn folds(
    xs: &InstanceSet,
    protocol: Protocol,
    cfg: &ExperimentConfig,
    rec: &mut Recorder,
    context: &str,
) -> Result<Folds, BenchError> {
    let set = generate_splits(protocol, xs, cfg.mixed_k, cfg.seed)?;
    if !set.skipped_users.is_empty() {
        rec.note(format!(
            "{context} {protocol}: {} user(s) with a single instance skipped",
            set.skipped_users.len()
        ));
    }
    let audit = LeakageSummary::of_splits(&set.splits, xs);
    if protocol == Protocol::Louocv && audit.user_overlap > 0 {
        return Err(BenchError::Harness(format!(
            "LOUOCV split shares {} test instance users with train",
            audit.user_overlap
        )));
    }
    Ok(Folds { protocol, splits: set.splits, audit })
}

/// Predictions per instance; `None` where an instance was never tested or
/// the model had nothing to say.
pub(crate) type Preds = Vec<Option<f64>>;

/// Paired `(prediction, truth, user)` columns over the predicted instances.
pub(crate) struct Pooled {
    pub preds: Vec<f64>,
    pub truths: Vec<f64>,
    pub users: Vec<UserId>,
}

impl Pooled {
    pub fn len(&self) -> usize {
        self.preds.len()
    }
}

pub(crate) fn pool(xs: &InstanceSet, preds: &Preds) -> Pooled {
    let mut out = Pooled { preds: Vec::new(), truths: Vec::new(), users: Vec::new() };
    for (i, p) in preds.iter().enumerate() {
        if let Some(p) = p {
            out.preds.push(*p);
            out.truths.push(xs.get(i).target);
            out.users.push(xs.get(i).user.clone());
        }
    }
    out
}

/// Restricts `preds` to the instances where `mask` has a prediction.
pub(crate) fn paired(preds: &Preds, mask: &Preds) -> Preds {
    preds.iter().zip(mask).map(|(p, m)| m.and(*p)).collect()
}

/// How features are normalised inside each split.
#[derive(Clone, Copy, PartialEq)]
pub(crate) enum SplitNorm {
    None,
    TrainFitted,
}

fn local_rows(xs: &InstanceSet, split: &Split, norm: SplitNorm) -> Result<Vec<Vec<f64>>, BenchError> {
    let train = xs.rows(&split.train);
    let test = xs.rows(&split.test);
    Ok(match norm {
        SplitNorm::None => train.into_iter().chain(test).collect(),
        SplitNorm::TrainFitted => {
            let s = ZScaler::fit(&train)?;
            s.transform(&train).into_iter().chain(s.transform(&test)).collect()
        }
    })
}

/// Grid-searched kernel model per split. Classifier targets must be 0/1.
pub(crate) fn searched_predictions(
    spec: &ModelSpec,
    xs: &InstanceSet,
    splits: &[Split],
    norm: SplitNorm,
    inner_k: usize,
    seed: u64,
) -> Result<Preds, BenchError> {
    let mut out = vec![None; xs.len()];
    for split in splits {
        let rows = local_rows(xs, split, norm)?;
        let y: Vec<f64> = split.train.iter().chain(&split.test).map(|&i| xs.get(i).target).collect();
        let ntr = split.train.len();
        let train: Vec<usize> = (0..ntr).collect();
        let test: Vec<usize> = (ntr..rows.len()).collect();
        let mut cache = KernelCache::new(&rows);
        let fitted = fit_searched(
            spec,
            &mut cache,
            &train,
            &test,
            &y,
            inner_k,
            child_seed(seed, &[split.fold as u64]),
        )?;
        for (&i, p) in split.test.iter().zip(fitted.predictions) {
            out[i] = Some(p);
        }
    }
    Ok(out)
}

/// Forward selection plus ridge refit per split.
pub(crate) fn sfs_predictions(
    xs: &InstanceSet,
    splits: &[Split],
    max_features: Option<usize>,
    inner_k: usize,
    seed: u64,
) -> Result<Preds, BenchError> {
    let mut out = vec![None; xs.len()];
    let cap = max_features.unwrap_or(xs.dim().min(20));
    for split in splits {
        let x = xs.rows(&split.train);
        let y = xs.targets_of(&split.train);
        let sel = sfs_select(&x, &y, cap, inner_k, DEFAULT_RIDGE, child_seed(seed, &[split.fold as u64]))?;
        let pick = |r: &[f64]| -> Vec<f64> { sel.selected.iter().map(|&c| r[c]).collect() };
        let xs_sel: Vec<Vec<f64>> = x.iter().map(|r| pick(r)).collect();
        let m = fit_linreg(&xs_sel, &y, DEFAULT_RIDGE)?;
        for &i in &split.test {
            out[i] = Some(m.predict(&pick(&xs.get(i).features)));
        }
    }
    Ok(out)
}

/// Train-target mean per user (or global); returns predictions and the
/// number of test instances that fell back to the global mean.
pub(crate) fn avg_predictions(
    xs: &InstanceSet,
    splits: &[Split],
    per_user: bool,
) -> Result<(Preds, usize), BenchError> {
    let mut out = vec![None; xs.len()];
    let mut fallbacks = 0;
    for split in splits {
        let users: Vec<UserId> = split.train.iter().map(|&i| xs.get(i).user.clone()).collect();
        let m = fit_baseline_avg(&users, &xs.targets_of(&split.train), per_user)?;
        for &i in &split.test {
            let (p, fell_back) = m.predict(&xs.get(i).user);
            fallbacks += usize::from(fell_back);
            out[i] = Some(p);
        }
    }
    Ok((out, fallbacks))
}

/// Each test instance predicted by the mean of its own user's test targets:
/// the "always predicts the user's average" reference for unseen users.
pub(crate) fn own_mean_predictions(xs: &InstanceSet, splits: &[Split]) -> Preds {
    let mut out = vec![None; xs.len()];
    for split in splits {
        let mut by_user: std::collections::BTreeMap<&UserId, Vec<usize>> = Default::default();
        for &i in &split.test {
            by_user.entry(&xs.get(i).user).or_default().push(i);
        }
        for idx in by_user.values() {
            let mean = idx.iter().map(|&i| xs.get(i).target).sum::<f64>() / idx.len() as f64;
            for &i in idx {
                out[i] = Some(mean);
            }
        }
    }
    out
}

/// Most recent strictly earlier train target of the same user; returns
/// predictions and how many test instances had none.
pub(crate) fn last_predictions(xs: &InstanceSet, splits: &[Split]) -> (Preds, usize) {
    let mut out = vec![None; xs.len()];
    let mut excluded = 0;
    for split in splits {
        let records: Vec<_> = split
            .train
            .iter()
            .map(|&i| {
                let inst = xs.get(i);
                (inst.user.clone(), inst.form_day, inst.target)
            })
            .collect();
        let m = fit_baseline_last(&records);
        for &i in &split.test {
            match m.predict(&xs.get(i).user, xs.get(i).form_day) {
                Ok(p) => out[i] = Some(p),
                Err(_) => excluded += 1,
            }
        }
    }
    (out, excluded)
}

/// Majority train label per split (targets 0/1).
pub(crate) fn majority_predictions(xs: &InstanceSet, splits: &[Split]) -> Result<Preds, BenchError> {
    let mut out = vec![None; xs.len()];
    for split in splits {
        let labels: Vec<bool> = xs.targets_of(&split.train).iter().map(|&t| t > 0.5).collect();
        let m = fit_majority(&labels)?;
        for &i in &split.test {
            out[i] = Some(if m.label { 1.0 } else { 0.0 });
        }
    }
    Ok(out)
}

pub(crate) fn as_labels(v: &[f64]) -> Vec<bool> {
    v.iter().map(|&x| x > 0.5).collect()
}
