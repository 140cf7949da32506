use nalgebra::DMatrix;

use super::kernel::{rbf_from_sq, sq_dists};
use super::krr::krr_dual;
use super::svm::SvmDual;
use super::{check_xy, param, resolve_gamma, LearnerError, ModelKind, ModelSpec};
use crate::protocol::kfold_indices;
use crate::seed::{child_seed, stage};

pub const DEFAULT_INNER_K: usize = 3;

/// Squared distances over a fixed row set, with RBF matrices memoised per width.
pub struct KernelCache {
    sq: DMatrix<f64>,
    dim: usize,
    kernels: Vec<(f64, DMatrix<f64>)>,
}

impl KernelCache {
    pub fn new(rows: &[Vec<f64>]) -> Self {
        KernelCache { sq: sq_dists(rows, rows), dim: rows.first().map_or(0, Vec::len), kernels: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kernel(&mut self, gamma: f64) -> &DMatrix<f64> {
        let pos = match self.kernels.iter().position(|(g, _)| *g == gamma) {
            Some(p) => p,
            None => {
                self.kernels.push((gamma, rbf_from_sq(&self.sq, gamma)));
                self.kernels.len() - 1
            }
        };
        &self.kernels[pos].1
    }
}

fn sub(k: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| k[(rows[i], cols[j])])
}

#[derive(Clone, Copy, PartialEq)]
enum Task {
    Classify,
    Regress,
}

fn task_of(kind: ModelKind) -> Result<Task, LearnerError> {
    match kind {
        ModelKind::SvmRbf | ModelKind::DateOnly | ModelKind::RandFeat => Ok(Task::Classify),
        ModelKind::KrrRbf | ModelKind::UserIdOnly => Ok(Task::Regress),
        other => Err(LearnerError::Unsupported(other, "grid-searched")),
    }
}

/// Fits on `train` and predicts `test`; classification predictions are 1/0.
fn fit_predict(
    task: Task,
    k: &DMatrix<f64>,
    point: &[(String, f64)],
    train: &[usize],
    test: &[usize],
    y: &[f64],
) -> Result<Vec<f64>, LearnerError> {
    let ktt = sub(k, train, train);
    let kst = sub(k, test, train);
    let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    match task {
        Task::Classify => {
            let c = param(point, "C").unwrap_or(1.0);
            let labels: Vec<bool> = yt.iter().map(|&v| v > 0.5).collect();
            let dual = SvmDual::fit(&ktt, &labels, c);
            Ok((0..test.len())
                .map(|r| if dual.predict(kst.row(r).iter().copied()) { 1.0 } else { 0.0 })
                .collect())
        }
        Task::Regress => {
            let lambda = param(point, "lambda").unwrap_or(1.0);
            let (alpha, mean) = krr_dual(&ktt, &yt, lambda)?;
            Ok((0..test.len())
                .map(|r| mean + kst.row(r).iter().zip(&alpha).map(|(k, a)| k * a).sum::<f64>())
                .collect())
        }
    }
}

/// Selected grid point with its inner-CV score (accuracy for
/// classifiers, MSE for regressors).
#[derive(Debug, Clone, PartialEq)]
pub struct GridChoice {
    pub params: Vec<(String, f64)>,
    pub score: f64,
}

/// Grid search by inner k-fold CV over the `train` rows of `cache`.
///
/// Ties keep the earliest grid point.
pub fn grid_search_cached(
    spec: &ModelSpec,
    cache: &mut KernelCache,
    train: &[usize],
    y: &[f64],
    inner_k: usize,
    seed: u64,
) -> Result<GridChoice, LearnerError> {
    let task = task_of(spec.kind)?;
    let points = spec.points();
    if spec.grid.is_empty() {
        return Err(LearnerError::EmptyGrid(spec.kind.to_string()));
    }
    spec.validate()?;
    let k = inner_k.min(train.len());
    if k < 2 || points.len() == 1 {
        return Ok(GridChoice { params: points[0].clone(), score: f64::NAN });
    }
    let folds: Vec<(Vec<usize>, Vec<usize>)> =
        kfold_indices(train.len(), k, child_seed(seed, &[stage::GRID_SEARCH]))
            .expect("k is within 2..=n")
            .into_iter()
            .map(|(tr, te)| (tr.iter().map(|&i| train[i]).collect(), te.iter().map(|&i| train[i]).collect()))
            .collect();
    let dim = cache.dim();
    let mut best: Option<GridChoice> = None;
    for point in points {
        let kern = cache.kernel(resolve_gamma(&point, dim));
        let mut total = 0.0;
        let mut count = 0usize;
        for (tr, te) in &folds {
            let preds = fit_predict(task, kern, &point, tr, te, y)?;
            for (p, &i) in preds.iter().zip(te) {
                total += match task {
                    Task::Classify => f64::from(u8::from((*p > 0.5) == (y[i] > 0.5))),
                    Task::Regress => (p - y[i]).powi(2),
                };
                count += 1;
            }
        }
        let score = total / count as f64;
        let better = match (&best, task) {
            (None, _) => true,
            (Some(b), Task::Classify) => score > b.score,
            (Some(b), Task::Regress) => score < b.score,
        };
        if better {
            best = Some(GridChoice { params: point, score });
        }
    }
    Ok(best.expect("grid has at least one point"))
}

/// Grid search over all rows of `x` (`y` holds 0/1 for classifiers).
pub fn grid_search(
    spec: &ModelSpec,
    x: &[Vec<f64>],
    y: &[f64],
    inner_k: usize,
    seed: u64,
) -> Result<GridChoice, LearnerError> {
    check_xy(x, y.len())?;
    let mut cache = KernelCache::new(x);
    let train: Vec<usize> = (0..x.len()).collect();
    grid_search_cached(spec, &mut cache, &train, y, inner_k, seed)
}

/// Outcome of search-then-refit on one outer split.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchedModel {
    pub choice: GridChoice,
    /// Aligned with the `test` indices; 1/0 for classifiers.
    pub predictions: Vec<f64>,
}

/// Grid-searches on `train`, refits the winner on all of `train` and
/// predicts `test`. Indices refer to rows of `cache`; `y` is indexed the
/// same way and only read at train positions.
pub fn fit_searched(
    spec: &ModelSpec,
    cache: &mut KernelCache,
    train: &[usize],
    test: &[usize],
    y: &[f64],
    inner_k: usize,
    seed: u64,
) -> Result<SearchedModel, LearnerError> {
    if train.is_empty() {
        return Err(LearnerError::EmptyTrain);
    }
    let choice = grid_search_cached(spec, cache, train, y, inner_k, seed)?;
    let task = task_of(spec.kind)?;
    let dim = cache.dim();
    let kern = cache.kernel(resolve_gamma(&choice.params, dim));
    let predictions = fit_predict(task, kern, &choice.params, train, test, y)?;
    Ok(SearchedModel { choice, predictions })
}
