use nalgebra::DMatrix;

use super::kernel::{rbf_from_sq, rbf_kernel, sq_dists};
use super::{check_xy, LearnerError};

pub const DEFAULT_TOL: f64 = 1e-3;
const TAU: f64 = 1e-12;

/// Dual solution of a C-SVM.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    /// Offset: the decision value is `Σ αᵢ yᵢ k(xᵢ, x) - rho`.
    pub rho: f64,
    pub iterations: usize,
    /// The maximal KKT violation fell below `tol` before `max_iter`.
    pub converged: bool,
}

/// Solves `max Σα - ½ ΣΣ αᵢαⱼyᵢyⱼKᵢⱼ` s.t. `0 ≤ α ≤ C`, `Σ yᵢαᵢ = 0` by
/// sequential minimal optimisation.
///
/// Working pairs are picked by maximal violation for the first index and
/// second-order gain for the second; iteration stops once the violation
/// gap is at most `tol`. Labels must be ±1.
pub fn smo_solve(k: &DMatrix<f64>, y: &[f64], c: f64, tol: f64, max_iter: usize) -> SmoSolution {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    // gradient of the minimisation form ½αᵀQα - Σα
    let mut grad = vec![-1.0; n];
    let diag: Vec<f64> = (0..n).map(|i| k[(i, i)]).collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let Some((i, j)) = select_pair(k, y, &alpha, &grad, &diag, c, tol) else {
            converged = true;
            break;
        };
        iterations += 1;
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let kij = k[(i, j)];
        let quad = (diag[i] + diag[j] - 2.0 * kij).max(TAU);
        let (mut ai, mut aj) = (old_i, old_j);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = ((ai - old_i) * y[i], (aj - old_j) * y[j]);
        let (ki, kj) = (k.column(i), k.column(j));
        for t in 0..n {
            grad[t] += y[t] * (ki[t] * di + kj[t] * dj);
        }
    }
    let rho = compute_rho(y, &alpha, &grad, c);
    SmoSolution { alpha, rho, iterations, converged }
}

fn in_up(y: f64, a: f64, c: f64) -> bool {
    if y > 0.0 {
        a < c
    } else {
        a > 0.0
    }
}

fn in_low(y: f64, a: f64, c: f64) -> bool {
    if y > 0.0 {
        a > 0.0
    } else {
        a < c
    }
}

fn select_pair(
    k: &DMatrix<f64>,
    y: &[f64],
    alpha: &[f64],
    grad: &[f64],
    diag: &[f64],
    c: f64,
    tol: f64,
) -> Option<(usize, usize)> {
    let n = y.len();
    let mut gmax = f64::NEG_INFINITY;
    let mut i = usize::MAX;
    for t in 0..n {
        if in_up(y[t], alpha[t], c) && -y[t] * grad[t] >= gmax {
            gmax = -y[t] * grad[t];
            i = t;
        }
    }
    if i == usize::MAX {
        return None;
    }
    let ki = k.column(i);
    let mut gmin = f64::INFINITY;
    let mut best = f64::INFINITY;
    let mut j = usize::MAX;
    for t in 0..n {
        if !in_low(y[t], alpha[t], c) {
            continue;
        }
        let v = -y[t] * grad[t];
        gmin = gmin.min(v);
        let b = gmax - v;
        if b > 0.0 {
            let quad = (diag[i] + diag[t] - 2.0 * ki[t]).max(TAU);
            let gain = -(b * b) / quad;
            if gain <= best {
                best = gain;
                j = t;
            }
        }
    }
    if gmax - gmin < tol || j == usize::MAX {
        return None;
    }
    Some((i, j))
}

fn compute_rho(y: &[f64], alpha: &[f64], grad: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg)
            } else {
                lb = lb.max(yg)
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg)
            } else {
                lb = lb.max(yg)
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// Trained RBF classifier; `true` is the positive class.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    support: Vec<Vec<f64>>,
    coef: Vec<f64>,
    rho: f64,
    gamma: f64,
    /// Set when training saw a single class; every prediction is that class.
    pub constant: Option<bool>,
    pub converged: bool,
}

/// Coefficients `αᵢyᵢ` and offset from a precomputed train kernel, or the
/// class to predict when only one is present.
pub(crate) enum SvmDual {
    Constant(bool),
    Fitted { coef: Vec<f64>, rho: f64, converged: bool },
}

impl SvmDual {
    pub(crate) fn fit(k: &DMatrix<f64>, labels: &[bool], c: f64) -> SvmDual {
        let pos = labels.iter().filter(|l| **l).count();
        if pos == 0 || pos == labels.len() {
            return SvmDual::Constant(pos > 0);
        }
        let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
        let max_iter = 10_000_000usize.max(100 * y.len());
        let sol = smo_solve(k, &y, c, DEFAULT_TOL, max_iter);
        SvmDual::Fitted {
            coef: sol.alpha.iter().zip(&y).map(|(a, y)| a * y).collect(),
            rho: sol.rho,
            converged: sol.converged,
        }
    }

    /// Predicts from kernel values against every training point.
    pub(crate) fn predict(&self, k_row: impl Iterator<Item = f64>) -> bool {
        match self {
            SvmDual::Constant(l) => *l,
            SvmDual::Fitted { coef, rho, .. } => {
                coef.iter().zip(k_row).map(|(c, k)| c * k).sum::<f64>() - rho > 0.0
            }
        }
    }
}

impl SvmModel {
    pub(crate) fn from_dual(rows: &[Vec<f64>], dual: SvmDual, gamma: f64) -> SvmModel {
        match dual {
            SvmDual::Constant(l) => SvmModel {
                support: Vec::new(),
                coef: Vec::new(),
                rho: 0.0,
                gamma,
                constant: Some(l),
                converged: true,
            },
            SvmDual::Fitted { coef, rho, converged } => {
                let keep: Vec<usize> = (0..coef.len()).filter(|&i| coef[i] != 0.0).collect();
                SvmModel {
                    support: keep.iter().map(|&i| rows[i].clone()).collect(),
                    coef: keep.iter().map(|&i| coef[i]).collect(),
                    rho,
                    gamma,
                    constant: None,
                    converged,
                }
            }
        }
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        if let Some(l) = self.constant {
            return if l { 1.0 } else { -1.0 };
        }
        let k = rbf_kernel(std::slice::from_ref(&x.to_vec()), &self.support, self.gamma);
        k.iter().zip(&self.coef).map(|(k, c)| k * c).sum::<f64>() - self.rho
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.decision(x) > 0.0
    }

    pub fn n_support(&self) -> usize {
        self.support.len()
    }
}

pub fn fit_svm_rbf(x: &[Vec<f64>], y: &[bool], c: f64, gamma: f64) -> Result<SvmModel, LearnerError> {
    check_xy(x, y.len())?;
    if c.is_nan() || c <= 0.0 || gamma.is_nan() || gamma <= 0.0 {
        return Err(LearnerError::InvalidParam { name: "C/gamma".into(), value: c.min(gamma) });
    }
    let k = rbf_from_sq(&sq_dists(x, x), gamma);
    Ok(SvmModel::from_dual(x, SvmDual::fit(&k, y, c), gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng;
    use rand::Rng;

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

    /// Per-point KKT residuals recomputed from α alone.
    fn kkt_violation(k: &DMatrix<f64>, y: &[f64], s: &SmoSolution, c: f64) -> f64 {
        let n = y.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let f: f64 = (0..n).map(|j| s.alpha[j] * y[j] * k[(i, j)]).sum::<f64>() - s.rho;
            let r = y[i] * f - 1.0;
            let v = if s.alpha[i] <= 0.0 {
                (-r).max(0.0)
            } else if s.alpha[i] >= c {
                r.max(0.0)
            } else {
                r.abs()
            };
            worst = worst.max(v);
        }
        worst
    }

    fn problem(seed: u64, n: usize) -> (DMatrix<f64>, Vec<f64>) {
        let mut r = rng(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..2).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let mut y: Vec<f64> = x
            .iter()
            .map(|p| if p[0] * p[1] + 0.2 * r.random_range(-1.0..1.0) > 0.0 { 1.0 } else { -1.0 })
            .collect();
        y[0] = 1.0;
        y[1] = -1.0;
        (rbf_kernel(&x, &x, 2.0), y)
    }

    #[test]
    fn xor_is_separated() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let y = [false, false, true, true];
        let m = fit_svm_rbf(&x, &y, 10.0, 1.0).unwrap();
        assert!(m.converged);
        for (p, l) in x.iter().zip(y) {
            assert_eq!(m.predict(p), l);
        }
    }

    #[test]
    fn kkt_holds_on_seeded_problems() {
        for seed in 0..20 {
            let (k, y) = problem(seed, 30);
            for c in [0.5, 10.0] {
                let s = smo_solve(&k, &y, c, DEFAULT_TOL, 100_000);
                assert!(s.converged);
                let dot: f64 = s.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
                assert!(dot.abs() < 1e-9);
                assert!(s.alpha.iter().all(|&a| (0.0..=c).contains(&a)));
                assert!(kkt_violation(&k, &y, &s, c) <= DEFAULT_TOL + 1e-12, "seed {seed} C {c}");
            }
        }
    }

    #[test]
    fn dual_objective_matches_exhaustive_grid() {
        for seed in 0..5 {
            let (k, y) = problem(100 + seed, 4);
            let c = 1.0;
            let s = smo_solve(&k, &y, c, 1e-6, 100_000);
            // brute force: α1..α3 on a 0.01 lattice, α4 fixed by Σ yα = 0
            let mut best = f64::NEG_INFINITY;
            for a in 0..=100 {
                for b in 0..=100 {
                    for d in 0..=100 {
                        let al = [a as f64 / 100.0, b as f64 / 100.0, d as f64 / 100.0];
                        let a4 = -(al[0] * y[0] + al[1] * y[1] + al[2] * y[2]) * y[3];
                        if !(-1e-12..=c + 1e-12).contains(&a4) {
                            continue;
                        }
                        best = best.max(dual_objective(&k, &y, &[al[0], al[1], al[2], a4]));
                    }
                }
            }
            let got = dual_objective(&k, &y, &s.alpha);
            assert!((got - best).abs() <= 1e-3, "seed {seed}: smo {got} grid {best}");
            assert!(got >= best - 1e-12);
        }
    }

    #[test]
    fn single_class_is_constant() {
        let x = vec![vec![0.0], vec![1.0]];
        let m = fit_svm_rbf(&x, &[true, true], 1.0, 1.0).unwrap();
        assert_eq!(m.constant, Some(true));
        assert!(m.predict(&[5.0]));
    }

    #[test]
    fn training_order_does_not_change_decisions() {
        let mut r = rng(3);
        let x: Vec<Vec<f64>> =
            (0..20).map(|_| vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]).collect();
        let y: Vec<bool> = x.iter().map(|p| p[0] > 0.0).collect();
        let a = fit_svm_rbf(&x, &y, 1.0, 0.5).unwrap();
        let b = fit_svm_rbf(&x, &y, 1.0, 0.5).unwrap();
        assert_eq!(a, b);
    }
}
