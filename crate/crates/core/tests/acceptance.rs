//! Acceptance gate: one pass/fail line per criterion, non-zero exit on any
//! failure.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use leakbench::bench::{
    emit_report, run_experiment, Experiment, ExperimentConfig, ReportFormat, ReportTable,
};
use leakbench::corpus::{
    build_instances, generate_synthetic, Aggregation, Dataset, GenConfig, Instance, TargetRange,
};
use leakbench::learners::{fit_svm_rbf, rbf_kernel, smo_solve, DEFAULT_TOL};
use leakbench::protocol::{audit_split, loiocv_splits, louocv_splits, mixed_kfold_splits, Split};
use leakbench::scoring::{likamwa_accuracy, mse, r2_grouped, sensitivity_specificity, Grouping};
use leakbench::{InstanceSet, Protocol, UserId};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(got: f64, want: f64, tol: f64, what: &str) -> Result<(), String> {
    ensure((got - want).abs() <= tol, format!("{what}: got {got}, want {want} ± {tol}"))
}

fn value(t: &ReportTable, setting: &str, protocol: &str, mode: &str, metric: &str) -> Result<f64, String> {
    t.value(setting, protocol, mode, metric)
        .ok_or_else(|| format!("missing or undefined {setting}/{protocol}/{mode}/{metric}"))
}

// ---------------------------------------------------------------- 1

fn metric_oracles() -> Outcome {
    let users = ["A", "A", "B", "B"];
    let truths = [1.0, 3.0, 11.0, 13.0];
    let preds = [2.0, 2.0, 12.0, 12.0];
    // global: ss_res 4 over ss_tot around 7
    let ss_tot: f64 = truths.iter().map(|t| (t - 7.0f64).powi(2)).sum();
    let global = r2_grouped(&preds, &truths, &users, Grouping::Global).map_err(|e| e.to_string())?.unwrap();
    close(global, 1.0 - 4.0 / ss_tot, 1e-9, "r2 global")?;
    close(global, 0.9615, 1e-4, "r2 global rounded")?;
    let per_user =
        r2_grouped(&preds, &truths, &users, Grouping::PerUser).map_err(|e| e.to_string())?.unwrap();
    close(per_user, 0.0, 1e-9, "r2 per user")?;

    // unit-spaced 5-class scale: threshold (1/2)² = 0.25
    let range = TargetRange::new(0.0, 5.0).map_err(|e| e.to_string())?;
    let inside = likamwa_accuracy(&[2.4], &[2.0], range, 5).map_err(|e| e.to_string())?;
    close(inside, 1.0, 1e-9, "likamwa 0.16")?;
    let outside = likamwa_accuracy(&[2.6], &[2.0], range, 5).map_err(|e| e.to_string())?;
    close(outside, 0.0, 1e-9, "likamwa 0.36")?;
    let edge = likamwa_accuracy(&[2.5], &[2.0], range, 5).map_err(|e| e.to_string())?;
    close(edge, 0.0, 1e-9, "likamwa 0.25")?;

    let m = mse(&[1.0, 2.0, 4.0], &[1.0, 3.0, 1.0]).map_err(|e| e.to_string())?;
    close(m, 10.0 / 3.0, 1e-9, "mse")?;
    let (sens, spec) = sensitivity_specificity(&[true, false, true, false], &[true, false, false, false])
        .map_err(|e| e.to_string())?;
    close(sens.ok_or("sens undefined")?, 1.0, 1e-9, "sens")?;
    close(spec.ok_or("spec undefined")?, 2.0 / 3.0, 1e-9, "spec")?;
    let (sens, spec) = sensitivity_specificity(&[true, false], &[false, false]).map_err(|e| e.to_string())?;
    ensure(sens.is_none() && spec == Some(0.5), "absent positive class must leave sens undefined")?;
    Ok(format!("r2 global {global:.6}, per user {per_user}"))
}

// ---------------------------------------------------------------- 2

fn instance(user: &str, day: i64, w: i64) -> Instance {
    Instance {
        user: UserId::from(user),
        form_day: day,
        window: (day - w + 1, day),
        features: vec![0.0],
        target: 0.0,
        aux_targets: Default::default(),
    }
}

fn shaped(counts: &[usize]) -> InstanceSet {
    let names = ["a", "b", "c"];
    let mut v = Vec::new();
    for (u, &c) in counts.iter().enumerate() {
        for d in 0..c {
            v.push(instance(names[u], 100 + d as i64, 1));
        }
    }
    InstanceSet::new(v, 1, vec![], "mood").unwrap()
}

fn partition(splits: &[Split], expect: &BTreeSet<usize>, n: usize) -> Result<(), String> {
    let mut seen = Vec::new();
    for s in splits {
        let train: BTreeSet<_> = s.train.iter().copied().collect();
        ensure(s.test.iter().all(|i| !train.contains(i)), "train and test intersect")?;
        ensure(s.train.iter().chain(&s.test).all(|&i| i < n), "index out of range")?;
        seen.extend(s.test.iter().copied());
    }
    seen.sort_unstable();
    ensure(seen == expect.iter().copied().collect::<Vec<_>>(), "test sets do not cover exactly once")
}

fn splitter_invariants() -> Outcome {
    let mut shapes = 0;
    for a in 1..=4usize {
        for b in 0..=4usize {
            for c in 0..=4usize {
                if b == 0 && c > 0 {
                    continue;
                }
                let counts: Vec<usize> = [a, b, c].into_iter().filter(|&x| x > 0).collect();
                let xs = shaped(&counts);
                let n = xs.len();
                shapes += 1;
                if counts.len() >= 2 {
                    let s = louocv_splits(&xs).map_err(|e| e.to_string())?.splits;
                    partition(&s, &(0..n).collect(), n)?;
                    for split in &s {
                        ensure(audit_split(split, &xs).user_overlap == 0, "LOUOCV user overlap")?;
                        let tu: BTreeSet<_> = split.test.iter().map(|&i| xs.get(i).user.clone()).collect();
                        ensure(
                            split.train.iter().all(|&i| !tu.contains(&xs.get(i).user)),
                            "LOUOCV shares a user",
                        )?;
                    }
                }
                let eligible: BTreeSet<usize> = (0..n)
                    .filter(|&i| xs.instances().iter().filter(|x| x.user == xs.get(i).user).count() >= 2)
                    .collect();
                match loiocv_splits(&xs) {
                    Ok(s) => {
                        partition(&s.splits, &eligible, n)?;
                        for split in &s.splits {
                            ensure(split.test.len() == 1, "LOIOCV test size")?;
                            let u = &xs.get(split.test[0]).user;
                            ensure(
                                split.train.iter().all(|&i| &xs.get(i).user == u),
                                "LOIOCV trains on another user",
                            )?;
                        }
                    }
                    Err(_) => ensure(eligible.is_empty(), "LOIOCV failed with eligible users")?,
                }
                for k in 2..=n {
                    let s = mixed_kfold_splits(&xs, k, 11).map_err(|e| e.to_string())?.splits;
                    partition(&s, &(0..n).collect(), n)?;
                    ensure(s.len() == k, "MIXED fold count")?;
                }
            }
        }
    }
    let adj = InstanceSet::new(
        vec![instance("a", 30, 14), instance("a", 31, 14), instance("a", 60, 14)],
        1,
        vec![],
        "mood",
    )
    .unwrap();
    let s = loiocv_splits(&adj).map_err(|e| e.to_string())?.splits;
    let worst = audit_split(&s[1], &adj).max_window_overlap;
    ensure(worst == 13.0 / 14.0, format!("adjacent W=14 overlap {worst}"))?;
    Ok(format!("{shapes} shapes, adjacent-day overlap {worst:.6}"))
}

// ---------------------------------------------------------------- 3

fn dual_objective(k: &DMatrix<f64>, y: &[f64], a: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += a[i] * a[j] * y[i] * y[j] * k[(i, j)];
        }
    }
    a.iter().sum::<f64>() - 0.5 * quad
}

fn kkt_residual(k: &DMatrix<f64>, y: &[f64], alpha: &[f64], rho: f64, c: f64) -> f64 {
    let n = y.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let f: f64 = (0..n).map(|j| alpha[j] * y[j] * k[(i, j)]).sum::<f64>() - rho;
        let r = y[i] * f - 1.0;
        let v = if alpha[i] <= 0.0 {
            (-r).max(0.0)
        } else if alpha[i] >= c {
            r.max(0.0)
        } else {
            r.abs()
        };
        worst = worst.max(v);
    }
    worst
}

fn small_problem(seed: u64, n: usize) -> (DMatrix<f64>, Vec<f64>) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> =
        (0..n).map(|_| vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]).collect();
    let mut y: Vec<f64> = x
        .iter()
        .map(|p| if p[0] + 0.5 * p[1] + 0.3 * r.random_range(-1.0..1.0) > 0.0 { 1.0 } else { -1.0 })
        .collect();
    y[0] = 1.0;
    y[1] = -1.0;
    (rbf_kernel(&x, &x, 1.5), y)
}

fn smo_correctness() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let (k, y) = small_problem(1000 + seed, 25);
        let s = smo_solve(&k, &y, 1.0, DEFAULT_TOL, 1_000_000);
        ensure(s.converged, format!("seed {seed} did not converge"))?;
        let eq: f64 = s.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        ensure(eq.abs() < 1e-9, format!("seed {seed}: Σ yα = {eq}"))?;
        let r = kkt_residual(&k, &y, &s.alpha, s.rho, 1.0);
        ensure(r <= DEFAULT_TOL, format!("seed {seed}: KKT residual {r}"))?;
        worst = worst.max(r);
    }
    let mut gap: f64 = 0.0;
    for seed in 0..5 {
        let (k, y) = small_problem(2000 + seed, 4);
        let c = 1.0;
        let s = smo_solve(&k, &y, c, 1e-6, 1_000_000);
        let mut best = f64::NEG_INFINITY;
        for a in 0..=100 {
            for b in 0..=100 {
                for d in 0..=100 {
                    let al = [a as f64 / 100.0, b as f64 / 100.0, d as f64 / 100.0];
                    let last = -(al[0] * y[0] + al[1] * y[1] + al[2] * y[2]) * y[3];
                    if (-1e-12..=c + 1e-12).contains(&last) {
                        best = best.max(dual_objective(&k, &y, &[al[0], al[1], al[2], last]));
                    }
                }
            }
        }
        let got = dual_objective(&k, &y, &s.alpha);
        ensure((got - best).abs() <= 1e-3, format!("4-point seed {seed}: smo {got}, grid {best}"))?;
        gap = gap.max((got - best).abs());
    }
    let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
    let labels = [false, false, true, true];
    let m = fit_svm_rbf(&x, &labels, 10.0, 1.0).map_err(|e| e.to_string())?;
    let hits = x.iter().zip(labels).filter(|(p, l)| m.predict(p) == *l).count();
    ensure(hits == 4, format!("XOR training accuracy {}/4", hits))?;
    Ok(format!("max KKT residual {worst:.2e}, max dual gap {gap:.2e}, XOR 4/4"))
}

// ---------------------------------------------------------------- 4–7

fn scenario_a() -> Dataset {
    generate_synthetic(&GenConfig::scenario_a(20260101)).expect("scenario A")
}

fn autoregressive() -> Dataset {
    generate_synthetic(&GenConfig::autoregressive(20260102)).expect("AR dataset")
}

fn user_bias() -> Outcome {
    let cfg = ExperimentConfig::new(Experiment::P3R, 4);
    let t = run_experiment(&scenario_a(), &cfg).map_err(|e| e.to_string())?;
    let mixed = value(&t, "KRR_RBF", "MIXED", "-", "r2_global")?;
    let probe = value(&t, "USER_ID_ONLY", "MIXED", "", "r2_global")?;
    let lou = value(&t, "KRR_RBF", "LOUOCV", "-", "r2_per_user")?;
    let detail = format!("MIXED R² {mixed:.3}, USER_ID_ONLY R² {probe:.3}, LOUOCV per-user R² {lou:.3}");
    ensure(mixed >= 0.2 && probe >= 0.2 && lou <= 0.05, detail.clone())?;
    Ok(detail)
}

fn temporal_leak() -> Outcome {
    let mut cfg = ExperimentConfig::new(Experiment::P2, 5);
    cfg.protocols = Some(vec![Protocol::Loiocv]);
    cfg.t_hist = Some(vec![1, 14]);
    cfg.rand_t_hist = Some(vec![1, 14]);
    cfg.rand_runs = 20;
    let t = run_experiment(&autoregressive(), &cfg).map_err(|e| e.to_string())?;
    let feat = value(&t, "FEAT", "LOIOCV", "thist=14", "sensitivity")?;
    let rand = value(&t, "RAND", "LOIOCV", "thist=14", "sensitivity")?;
    let date = value(&t, "DATE", "LOIOCV", "thist=14", "sensitivity")?;
    let rand1 = value(&t, "RAND", "LOIOCV", "thist=1", "balanced_accuracy")?;
    let detail = format!(
        "T=14 sens FEAT {feat:.3} RAND {rand:.3} DATE {date:.3}; T=1 RAND balanced accuracy {rand1:.3}"
    );
    ensure(
        (feat - rand).abs() <= 0.15
            && feat >= 0.3
            && rand >= 0.3
            && (0.40..=0.60).contains(&rand1)
            && (date - feat).abs() <= 0.15,
        detail.clone(),
    )?;
    Ok(detail)
}

fn binning_bias() -> Outcome {
    let cfg = ExperimentConfig::new(Experiment::P3C, 6);
    let t = run_experiment(&scenario_a(), &cfg).map_err(|e| e.to_string())?;
    let uniq = value(&t, "SVM_RBF", "MIXED", "UNIQ", "accuracy")?;
    let pers = value(&t, "SVM_RBF", "MIXED", "PERS", "accuracy")?;
    let pers_lou = value(&t, "SVM_RBF", "LOUOCV", "PERS", "accuracy")?;
    let detail = format!("UNIQ MIXED {uniq:.3}, PERS MIXED {pers:.3}, PERS LOUOCV {pers_lou:.3}");
    ensure(uniq - pers >= 0.15 && (0.40..=0.60).contains(&pers_lou), detail.clone())?;
    Ok(detail)
}

/// MSE of predicting every instance by the mean target of the other users.
fn global_mean_mse(xs: &InstanceSet) -> f64 {
    let mut sse = 0.0;
    for i in 0..xs.len() {
        let u = &xs.get(i).user;
        let others: Vec<f64> = xs.instances().iter().filter(|x| &x.user != u).map(|x| x.target).collect();
        let m = others.iter().sum::<f64>() / others.len() as f64;
        sse += (xs.get(i).target - m).powi(2);
    }
    sse / xs.len() as f64
}

fn p1_direction() -> Outcome {
    let cfg = ExperimentConfig::new(Experiment::P1, 7);
    let a = run_experiment(&scenario_a(), &cfg).map_err(|e| e.to_string())?;
    let avg = value(&a, "A (AVG)", "LOIOCV", "", "mse")?;
    let no_mood = value(&a, "D (-mood)", "LOUOCV", "", "mse")?;

    let ar = autoregressive();
    let t = run_experiment(&ar, &cfg).map_err(|e| e.to_string())?;
    let no_feat = value(&t, "C (-feat)", "LOUOCV", "", "mse")?;
    let xs = build_instances(&ar, "mood", cfg.window_days(), Aggregation::Mean, cfg.target_lags())
        .map_err(|e| e.to_string())?;
    let n = t.find(Some("C (-feat)"), Some("LOUOCV"), Some(""), Some("mse"))[0].n;
    ensure(n == xs.len(), format!("-feat scored {n} of {} instances", xs.len()))?;
    let global = global_mean_mse(&xs);
    let detail = format!(
        "scenario A: AVG {avg:.3} < -mood {no_mood:.3}; AR: -feat {no_feat:.3} < global mean {global:.3}"
    );
    ensure(avg < no_mood && no_feat < global, detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------- 8

fn determinism() -> Outcome {
    let mut g = GenConfig::scenario_a(88);
    g.n_users = 6;
    g.days_per_user = 30;
    g.d_noise = 2;
    let ds = generate_synthetic(&g).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut checked = 0;
    for exp in [Experiment::P1, Experiment::P2, Experiment::P3R, Experiment::P3C] {
        let mut cfg = ExperimentConfig::new(exp, 8);
        if exp == Experiment::P2 {
            cfg.t_hist = Some(vec![1, 3]);
            cfg.rand_t_hist = Some(vec![3]);
            cfg.rand_runs = 3;
        }
        for format in [ReportFormat::Csv, ReportFormat::Markdown] {
            let mut bytes = Vec::new();
            for run in 0..2 {
                let t = run_experiment(&ds, &cfg).map_err(|e| format!("{exp}: {e}"))?;
                let p = dir.path().join(format!("{exp}-{run}.out"));
                emit_report(&t, &p, format).map_err(|e| e.to_string())?;
                bytes.push(std::fs::read(&p).map_err(|e| e.to_string())?);
            }
            ensure(bytes[0] == bytes[1], format!("{exp} {format:?} reports differ between runs"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} report pairs byte-identical"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("metric oracles", metric_oracles, Duration::from_secs(1)),
        ("splitter and audit invariants", splitter_invariants, Duration::from_secs(5)),
        ("SMO correctness", smo_correctness, Duration::from_secs(30)),
        ("user-bias reproduction", user_bias, Duration::from_secs(120)),
        ("temporal-leak reproduction", temporal_leak, Duration::from_secs(600)),
        ("binning-bias reproduction", binning_bias, Duration::from_secs(120)),
        ("P1 direction", p1_direction, Duration::from_secs(60)),
        ("determinism", determinism, Duration::MAX),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if took <= *budget => (true, d),
            Ok(d) => (false, format!("{d}; took {took:.1?}, budget {budget:.0?}")),
            Err(e) => (false, e),
        };
        failed += usize::from(!ok);
        println!("criterion {}: {} {name} ({took:.2?}): {detail}", i + 1, if ok { "PASS" } else { "FAIL" });
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
