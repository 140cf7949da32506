//! Classification of smoothed, detrended, binarised targets across feature
//! windows, with date, persistence and random-feature baselines.

use std::collections::{BTreeMap, BTreeSet};

use super::config::Experiment;
use super::eval::{
    as_labels, folds, last_predictions, own_mean_predictions, paired, pool, protocol_tag,
    searched_predictions, Folds, Preds, Recorder, SplitNorm,
};
use super::report::ReportTable;
use super::{BenchError, ExperimentConfig};
use crate::corpus::{build_instances, randomize_raw_features, Dataset, Day, InstanceSet, UserId};
use crate::learners::{make_probe_features, ModelKind, ProbeKind};
use crate::protocol::Protocol;
use crate::scoring::{balanced_accuracy, sensitivity_specificity};
use crate::seed::{child_seed, stage};
use crate::transform::{binarize_one_std, moving_average_filter, weekday_detrend, LabeledSeries};

/// Sensitivity, specificity and balanced accuracy of pooled predictions.
type ClassScores = (Option<f64>, Option<f64>, Option<f64>, usize);

fn class_scores(xs: &InstanceSet, preds: &Preds) -> Result<ClassScores, BenchError> {
    let p = pool(xs, preds);
    if p.len() == 0 {
        return Ok((None, None, None, 0));
    }
    let (pl, tl) = (as_labels(&p.preds), as_labels(&p.truths));
    let (sens, spec) = sensitivity_specificity(&pl, &tl)?;
    Ok((sens, spec, balanced_accuracy(&pl, &tl)?, p.len()))
}

fn push_scores(rec: &mut Recorder, setting: &str, f: &Folds, mode: &str, s: ClassScores) {
    rec.push(setting, f.protocol, mode, "sensitivity", s.0, &f.audit, s.3);
    rec.push(setting, f.protocol, mode, "specificity", s.1, &f.audit, s.3);
    rec.push(setting, f.protocol, mode, "balanced_accuracy", s.2, &f.audit, s.3);
}

fn mean_of(values: &[Option<f64>]) -> Option<f64> {
    let v: Vec<f64> = values.iter().flatten().copied().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Binary label per `(user, day)`.
type Labels = BTreeMap<(UserId, Day), bool>;

/// Daily labels after the moving-average → weekday-detrend → one-std chain.
pub(crate) fn target_labels(
    ds: &Dataset,
    cfg: &ExperimentConfig,
) -> Result<(Labels, Vec<UserId>), BenchError> {
    let mut labels = BTreeMap::new();
    let mut dropped = Vec::new();
    let series = ds.target_series(&cfg.target);
    if series.is_empty() {
        return Err(BenchError::Precondition(format!("no reports of target {}", cfg.target)));
    }
    for (user, points) in series {
        if points.len() < cfg.min_series_len {
            dropped.push(user);
            continue;
        }
        let s = LabeledSeries::new(user.clone(), points)?;
        let smooth = moving_average_filter(&s, cfg.smoothing_days)?;
        let detrended = weekday_detrend(&smooth)?;
        let bits = binarize_one_std(&detrended)?;
        for (&(day, _), b) in detrended.points().iter().zip(bits) {
            labels.insert((user.clone(), day), b);
        }
    }
    Ok((labels, dropped))
}

fn labelled_instances(
    ds: &Dataset,
    cfg: &ExperimentConfig,
    window: usize,
    labels: &Labels,
) -> Result<InstanceSet, BenchError> {
    let xs = build_instances(ds, &cfg.target, window, cfg.aggregation, 0)?;
    let targets: Vec<f64> = xs
        .instances()
        .iter()
        .map(|i| if labels[&(i.user.clone(), i.form_day)] { 1.0 } else { 0.0 })
        .collect();
    Ok(xs.with_targets(&targets))
}

fn beats(
    rec: &mut Recorder,
    f: &Folds,
    mode: &str,
    xs: &InstanceSet,
    model: &Preds,
    reference: &Preds,
) -> Result<(), BenchError> {
    let m = class_scores(xs, &paired(model, reference))?;
    let r = class_scores(xs, &paired(reference, model))?;
    let wins = matches!((m.2, r.2), (Some(a), Some(b)) if a > b);
    rec.push("FEAT", f.protocol, mode, "beats_naive", Some(f64::from(u8::from(wins))), &f.audit, m.3);
    Ok(())
}

/// FEAT rows for every window in `t_hist`; DATE, LAST (LOIOCV) and RAND
/// rows at each window in `rand_t_hist`. The `mode` column holds
/// `thist=<days>`.
pub fn run_p2(ds: &Dataset, cfg: &ExperimentConfig) -> Result<ReportTable, BenchError> {
    cfg.validate()?;
    if cfg.experiment()? != Experiment::P2 {
        return Err(BenchError::Config("run_p2 needs a P2 config".into()));
    }
    let mut rec = Recorder::new(cfg)?;
    let (labels, dropped) = target_labels(ds, cfg)?;
    if !dropped.is_empty() {
        rec.note(format!("{} user(s) with fewer than {} reports dropped", dropped.len(), cfg.min_series_len));
    }
    let kept: BTreeSet<UserId> = labels.keys().map(|k| k.0.clone()).collect();
    if kept.is_empty() {
        return Err(BenchError::Precondition("no user has a long enough report series".into()));
    }
    let ds = ds.retain_users(&kept);
    let feat_spec = cfg.model(ModelKind::SvmRbf);
    let date_spec = cfg.model(ModelKind::DateOnly);
    let rand_spec = cfg.model(ModelKind::RandFeat);
    let rand_windows = cfg.rand_t_hist();
    let mut windows = cfg.t_hist();
    for w in &rand_windows {
        if !windows.contains(w) {
            windows.push(*w);
        }
    }
    let rand_sets: Vec<Dataset> = if rand_windows.is_empty() {
        Vec::new()
    } else {
        (0..cfg.rand_runs)
            .map(|r| randomize_raw_features(&ds, child_seed(cfg.seed, &[stage::RAND_RUN, r as u64])))
            .collect()
    };

    for &w in &windows {
        let mode = format!("thist={w}");
        let xs = labelled_instances(&ds, cfg, w, &labels)?;
        if xs.dropped() > 0 {
            rec.note(format!("{mode}: {} report(s) without window data excluded", xs.dropped()));
        }
        for protocol in cfg.protocols() {
            let f = folds(&xs, protocol, cfg, &mut rec, &format!("P2 {mode}"))?;
            let seed = |setting: u64, run: u64| {
                child_seed(cfg.seed, &[stage::GRID_SEARCH, w as u64, protocol_tag(protocol), setting, run])
            };
            let feat = searched_predictions(
                &feat_spec,
                &xs,
                &f.splits,
                SplitNorm::TrainFitted,
                cfg.inner_k,
                seed(0, 0),
            )?;
            let feat_scores = class_scores(&xs, &feat)?;
            if cfg.t_hist().contains(&w) {
                push_scores(&mut rec, "FEAT", &f, &mode, feat_scores);
            }
            if !rand_windows.contains(&w) {
                continue;
            }
            if !cfg.t_hist().contains(&w) {
                push_scores(&mut rec, "FEAT", &f, &mode, feat_scores);
            }

            let date_xs = make_probe_features(&xs, ProbeKind::DateOnly)?;
            let date = searched_predictions(
                &date_spec,
                &date_xs,
                &f.splits,
                SplitNorm::None,
                cfg.inner_k,
                seed(1, 0),
            )?;
            push_scores(&mut rec, "DATE", &f, &mode, class_scores(&xs, &date)?);

            let reference = if protocol == Protocol::Loiocv {
                let (last, excluded) = last_predictions(&xs, &f.splits);
                if excluded > 0 {
                    rec.note(format!(
                        "LAST {mode}: {excluded} test instance(s) without an earlier label excluded"
                    ));
                }
                push_scores(&mut rec, "LAST", &f, &mode, class_scores(&xs, &last)?);
                last
            } else {
                own_mean_predictions(&xs, &f.splits)
            };
            beats(&mut rec, &f, &mode, &xs, &feat, &reference)?;

            let mut runs: Vec<ClassScores> = Vec::with_capacity(rand_sets.len());
            for (r, rds) in rand_sets.iter().enumerate() {
                let rxs = labelled_instances(rds, cfg, w, &labels)?;
                if rxs.len() != xs.len() {
                    return Err(BenchError::Harness("randomised features changed the instance set".into()));
                }
                let preds = searched_predictions(
                    &rand_spec,
                    &rxs,
                    &f.splits,
                    SplitNorm::TrainFitted,
                    cfg.inner_k,
                    seed(2, r as u64),
                )?;
                runs.push(class_scores(&rxs, &preds)?);
            }
            let n = runs.first().map_or(0, |s| s.3);
            let sens: Vec<_> = runs.iter().map(|s| s.0).collect();
            let spec: Vec<_> = runs.iter().map(|s| s.1).collect();
            let bacc: Vec<_> = runs.iter().map(|s| s.2).collect();
            push_scores(&mut rec, "RAND", &f, &mode, (mean_of(&sens), mean_of(&spec), mean_of(&bacc), n));
        }
    }
    Ok(rec.finish(&ds, cfg))
}
