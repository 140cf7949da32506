//! Past-window regression with prior target values as features.

use super::config::Experiment;
use super::eval::{
    avg_predictions, folds, last_predictions, own_mean_predictions, paired, pool, sfs_predictions, Folds,
    Preds, Recorder,
};
use super::report::ReportTable;
use super::{BenchError, ExperimentConfig};
use crate::corpus::{build_instances, Dataset, InstanceSet, TargetRange};
use crate::protocol::{LeakageSummary, Protocol};
use crate::scoring::{likamwa_accuracy, mse};
use crate::seed::{child_seed, stage};

const LIKAMWA_CLASSES: usize = 5;

fn require_protocol(cfg: &ExperimentConfig, p: Protocol) -> Result<(), BenchError> {
    if cfg.protocols().contains(&p) {
        Ok(())
    } else {
        Err(BenchError::Config(format!("P1 needs protocol {p} in the protocol set")))
    }
}

fn score(
    rec: &mut Recorder,
    xs: &InstanceSet,
    range: TargetRange,
    setting: &str,
    f: &Folds,
    preds: &Preds,
) -> Result<Option<f64>, BenchError> {
    let p = pool(xs, preds);
    if p.len() == 0 {
        rec.note(format!("{setting}: no test instance could be predicted"));
        rec.push(setting, f.protocol, "", "mse", None, &f.audit, 0);
        rec.push(setting, f.protocol, "", "likamwa_accuracy", None, &f.audit, 0);
        return Ok(None);
    }
    let m = mse(&p.preds, &p.truths)?;
    rec.push(setting, f.protocol, "", "mse", Some(m), &f.audit, p.len());
    let acc = likamwa_accuracy(&p.preds, &p.truths, range, LIKAMWA_CLASSES)?;
    rec.push(setting, f.protocol, "", "likamwa_accuracy", Some(acc), &f.audit, p.len());
    Ok(Some(m))
}

fn mse_of(xs: &InstanceSet, preds: &Preds) -> Option<f64> {
    let p = pool(xs, preds);
    (p.len() > 0).then(|| mse(&p.preds, &p.truths).expect("lengths match"))
}

fn beats(rec: &mut Recorder, setting: &str, f: &Folds, model: &Preds, refs: &[&Preds], xs: &InstanceSet) {
    let mut wins = true;
    let mut n = 0;
    for r in refs {
        let m = mse_of(xs, &paired(model, r));
        let b = mse_of(xs, &paired(r, model));
        n = n.max(pool(xs, &paired(model, r)).len());
        wins &= matches!((m, b), (Some(m), Some(b)) if m < b);
    }
    rec.push(setting, f.protocol, "", "beats_naive", Some(f64::from(u8::from(wins))), &f.audit, n);
}

/// Rows `LOIOCV`, `LOUOCV` (forward-selected ridge on all features),
/// `A (AVG)`, `B (LAST)` (LOIOCV splits), `C (-feat)` and `D (-mood)`
/// (LOUOCV, lag-only and lag-free features).
pub fn run_p1(ds: &Dataset, cfg: &ExperimentConfig) -> Result<ReportTable, BenchError> {
    cfg.validate()?;
    if cfg.experiment()? != Experiment::P1 {
        return Err(BenchError::Config("run_p1 needs a P1 config".into()));
    }
    require_protocol(cfg, Protocol::Loiocv)?;
    require_protocol(cfg, Protocol::Louocv)?;
    let lags = cfg.target_lags();
    if lags == 0 {
        return Err(BenchError::Config("P1 needs at least one target lag".into()));
    }
    let range = ds.target_range(&cfg.target)?;
    let xs = build_instances(ds, &cfg.target, cfg.window_days(), cfg.aggregation, lags)?;
    let mut rec = Recorder::new(cfg)?;
    if xs.dropped() > 0 {
        rec.note(format!("{} report(s) without enough history or window data excluded", xs.dropped()));
    }
    let sfs_seed = |tag: u64| child_seed(cfg.seed, &[stage::SFS, tag]);

    let loi = folds(&xs, Protocol::Loiocv, cfg, &mut rec, "P1")?;
    let lou = folds(&xs, Protocol::Louocv, cfg, &mut rec, "P1")?;

    let model_loi = sfs_predictions(&xs, &loi.splits, cfg.max_features, cfg.sfs_inner_k, sfs_seed(0))?;
    score(&mut rec, &xs, range, "LOIOCV", &loi, &model_loi)?;
    let model_lou = sfs_predictions(&xs, &lou.splits, cfg.max_features, cfg.sfs_inner_k, sfs_seed(1))?;
    score(&mut rec, &xs, range, "LOUOCV", &lou, &model_lou)?;

    let (avg, fallbacks) = avg_predictions(&xs, &loi.splits, true)?;
    if fallbacks > 0 {
        rec.note(format!("A (AVG): {fallbacks} prediction(s) fell back to the global mean"));
    }
    score(&mut rec, &xs, range, "A (AVG)", &loi, &avg)?;
    let (last, excluded) = last_predictions(&xs, &loi.splits);
    if excluded > 0 {
        rec.note(format!("B (LAST): {excluded} test instance(s) without an earlier value excluded"));
    }
    score(&mut rec, &xs, range, "B (LAST)", &loi, &last)?;

    let lag_cols = xs.lag_columns().to_vec();
    let feat_cols: Vec<usize> = (0..xs.dim()).filter(|c| !lag_cols.contains(c)).collect();
    let no_feat = xs.select_columns(&lag_cols);
    let no_mood = xs.select_columns(&feat_cols);
    let lou_c = Folds {
        protocol: lou.protocol,
        splits: lou.splits.clone(),
        audit: LeakageSummary::of_splits(&lou.splits, &no_feat),
    };
    let lou_d = Folds {
        protocol: lou.protocol,
        splits: lou.splits.clone(),
        audit: LeakageSummary::of_splits(&lou.splits, &no_mood),
    };
    let model_c = sfs_predictions(&no_feat, &lou.splits, cfg.max_features, cfg.sfs_inner_k, sfs_seed(2))?;
    score(&mut rec, &xs, range, "C (-feat)", &lou_c, &model_c)?;
    let model_d = sfs_predictions(&no_mood, &lou.splits, cfg.max_features, cfg.sfs_inner_k, sfs_seed(3))?;
    score(&mut rec, &xs, range, "D (-mood)", &lou_d, &model_d)?;

    let own = own_mean_predictions(&xs, &lou.splits);
    beats(&mut rec, "LOIOCV", &loi, &model_loi, &[&last, &avg], &xs);
    beats(&mut rec, "LOUOCV", &lou, &model_lou, &[&own], &xs);
    beats(&mut rec, "C (-feat)", &lou_c, &model_c, &[&own], &xs);
    beats(&mut rec, "D (-mood)", &lou_d, &model_d, &[&own], &xs);

    Ok(rec.finish(ds, cfg))
}
