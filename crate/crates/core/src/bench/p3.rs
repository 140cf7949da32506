//! Same-day regression and top/bottom classification under three protocols.

use super::config::{Experiment, NormVariant};
use super::eval::{
    as_labels, avg_predictions, folds, last_predictions, majority_predictions, own_mean_predictions, paired,
    pool, protocol_tag, searched_predictions, Folds, Preds, Recorder, SplitNorm,
};
use super::report::ReportTable;
use super::{BenchError, ExperimentConfig};
use crate::corpus::{build_instances, Dataset, InstanceSet};
use crate::learners::{make_probe_features, ModelKind, ProbeKind};
use crate::protocol::Protocol;
use crate::scoring::{accuracy, mse, r2_grouped, rmse, Grouping};
use crate::seed::{child_seed, stage};
use crate::transform::{bin_top_bottom, per_user_zscore};

fn expect(cfg: &ExperimentConfig, exp: Experiment) -> Result<(), BenchError> {
    cfg.validate()?;
    if cfg.experiment()? != exp {
        return Err(BenchError::Config(format!("expected a {exp} config")));
    }
    Ok(())
}

/// Same-day instances of users with at least two of them.
fn same_day_instances(
    ds: &Dataset,
    cfg: &ExperimentConfig,
    rec: &mut Recorder,
) -> Result<InstanceSet, BenchError> {
    let xs = build_instances(ds, &cfg.target, cfg.window_days(), cfg.aggregation, cfg.target_lags())?;
    if xs.dropped() > 0 {
        rec.note(format!("{} report(s) without window data excluded", xs.dropped()));
    }
    let mut keep = Vec::new();
    let mut lone = 0;
    for idx in xs.indices_by_user().values() {
        if idx.len() < 2 {
            lone += 1;
        } else {
            keep.extend_from_slice(idx);
        }
    }
    if lone > 0 {
        rec.note(format!("{lone} user(s) with a single instance dropped"));
    }
    keep.sort_unstable();
    let xs = xs.subset(&keep);
    if xs.users().len() < 2 {
        return Err(BenchError::Precondition("fewer than two users with repeated reports".into()));
    }
    Ok(xs)
}

fn grouping(p: Protocol) -> (Grouping, &'static str) {
    match p {
        Protocol::Mixed => (Grouping::Global, "r2_global"),
        _ => (Grouping::PerUser, "r2_per_user"),
    }
}

fn mse_of(xs: &InstanceSet, preds: &Preds) -> Option<f64> {
    let p = pool(xs, preds);
    (p.len() > 0).then(|| mse(&p.preds, &p.truths).expect("lengths match"))
}

fn push_regression(
    rec: &mut Recorder,
    xs: &InstanceSet,
    setting: &str,
    f: &Folds,
    mode: &str,
    preds: &Preds,
) -> Result<(), BenchError> {
    let p = pool(xs, preds);
    let (g, name) = grouping(f.protocol);
    let (r2, err) = if p.len() == 0 {
        (None, None)
    } else {
        (r2_grouped(&p.preds, &p.truths, &p.users, g)?, Some(rmse(&p.preds, &p.truths)?))
    };
    rec.push(setting, f.protocol, mode, name, r2, &f.audit, p.len());
    rec.push(setting, f.protocol, mode, "rmse", err, &f.audit, p.len());
    Ok(())
}

/// Kernel ridge rows per normalisation variant (`mode` `+` or `-`) and
/// protocol, plus the user-identity probe under MIXED. R² is global under
/// MIXED and per user otherwise.
pub fn run_p3_regression(ds: &Dataset, cfg: &ExperimentConfig) -> Result<ReportTable, BenchError> {
    expect(cfg, Experiment::P3R)?;
    let mut rec = Recorder::new(cfg)?;
    let xs = same_day_instances(ds, cfg, &mut rec)?;
    let krr = cfg.model(ModelKind::KrrRbf);
    let protocols = cfg.protocols();
    let mut split_sets = Vec::with_capacity(protocols.len());
    for &p in &protocols {
        split_sets.push(folds(&xs, p, cfg, &mut rec, "P3R")?);
    }

    for variant in cfg.normalization() {
        let (vx, norm) = match variant {
            NormVariant::PerUser => (per_user_zscore(&xs)?, SplitNorm::None),
            NormVariant::TrainFitted => (xs.clone(), SplitNorm::TrainFitted),
        };
        let mode = variant.tag();
        for f in &split_sets {
            let seed = child_seed(cfg.seed, &[stage::GRID_SEARCH, protocol_tag(f.protocol), variant as u64]);
            let preds = searched_predictions(&krr, &vx, &f.splits, norm, cfg.inner_k, seed)?;
            push_regression(&mut rec, &xs, "KRR_RBF", f, mode, &preds)?;

            let refs: Vec<Preds> = match f.protocol {
                Protocol::Louocv => vec![own_mean_predictions(&xs, &f.splits)],
                Protocol::Loiocv => {
                    vec![last_predictions(&xs, &f.splits).0, avg_predictions(&xs, &f.splits, true)?.0]
                }
                Protocol::Mixed => vec![avg_predictions(&xs, &f.splits, true)?.0],
            };
            let mut wins = true;
            for r in &refs {
                let m = mse_of(&xs, &paired(&preds, r));
                let b = mse_of(&xs, &paired(r, &preds));
                wins &= matches!((m, b), (Some(m), Some(b)) if m < b);
            }
            rec.push(
                "KRR_RBF",
                f.protocol,
                mode,
                "beats_naive",
                Some(f64::from(u8::from(wins))),
                &f.audit,
                pool(&xs, &preds).len(),
            );
        }
    }

    if let Some(f) = split_sets.iter().find(|f| f.protocol == Protocol::Mixed) {
        let probe = make_probe_features(&xs, ProbeKind::UserIdOnly)?;
        let spec = cfg.model(ModelKind::UserIdOnly);
        let seed = child_seed(cfg.seed, &[stage::GRID_SEARCH, protocol_tag(f.protocol), 9]);
        let preds = searched_predictions(&spec, &probe, &f.splits, SplitNorm::None, cfg.inner_k, seed)?;
        push_regression(&mut rec, &xs, "USER_ID_ONLY", f, "", &preds)?;
    }
    Ok(rec.finish(ds, cfg))
}

/// RBF-SVM and majority-class rows per binning mode (`mode` `UNIQ` or
/// `PERS`) and protocol.
pub fn run_p3_classification(ds: &Dataset, cfg: &ExperimentConfig) -> Result<ReportTable, BenchError> {
    expect(cfg, Experiment::P3C)?;
    let mut rec = Recorder::new(cfg)?;
    let xs = same_day_instances(ds, cfg, &mut rec)?;
    let svm = cfg.model(ModelKind::SvmRbf);

    for (mi, mode) in cfg.binning_modes().into_iter().enumerate() {
        let binned = bin_top_bottom(&xs, cfg.binning_fraction, mode)?;
        if !binned.skipped_users.is_empty() {
            rec.note(format!("{mode}: {} user(s) too small to bin skipped", binned.skipped_users.len()));
        }
        let targets: Vec<f64> = binned.labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
        let bx = xs.subset(&binned.retained).with_targets(&targets);
        let mode = mode.to_string();
        for protocol in cfg.protocols() {
            let f = folds(&bx, protocol, cfg, &mut rec, &format!("P3C {mode}"))?;
            let seed = child_seed(cfg.seed, &[stage::GRID_SEARCH, protocol_tag(protocol), mi as u64]);
            let preds =
                searched_predictions(&svm, &bx, &f.splits, SplitNorm::TrainFitted, cfg.inner_k, seed)?;
            let majority = majority_predictions(&bx, &f.splits)?;
            let score = |p: &Preds| -> Result<(Option<f64>, usize), BenchError> {
                let p = pool(&bx, p);
                if p.len() == 0 {
                    return Ok((None, 0));
                }
                Ok((Some(accuracy(&as_labels(&p.preds), &as_labels(&p.truths))?), p.len()))
            };
            let (acc, n) = score(&preds)?;
            let (base, nb) = score(&majority)?;
            rec.push("SVM_RBF", protocol, &mode, "accuracy", acc, &f.audit, n);
            rec.push("MAJORITY", protocol, &mode, "accuracy", base, &f.audit, nb);
            let wins = matches!((acc, base), (Some(a), Some(b)) if a > b);
            rec.push("SVM_RBF", protocol, &mode, "beats_naive", Some(f64::from(u8::from(wins))), &f.audit, n);
        }
    }
    Ok(rec.finish(ds, cfg))
}
