//! Baselines, bias probes and from-scratch models.

mod baselines;
mod kernel;
mod krr;
mod linear;
mod probes;
mod search;
mod svm;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use baselines::{fit_baseline_avg, fit_baseline_last, fit_majority, AvgModel, LastModel, MajorityModel};
pub use kernel::{cholesky_in_place, cholesky_solve, rbf_from_sq, rbf_kernel, sq_dists};
pub use krr::{fit_krr_rbf, KrrModel};
pub use linear::{cv_mse, fit_linreg, sfs_select, LinearModel, SfsResult, DEFAULT_RIDGE};
pub use probes::{make_probe_features, ProbeKind};
pub use search::{fit_searched, grid_search, GridChoice, KernelCache, SearchedModel, DEFAULT_INNER_K};
pub use svm::{fit_svm_rbf, smo_solve, SmoSolution, SvmModel, DEFAULT_TOL};

#[derive(Debug, Error, PartialEq)]
pub enum LearnerError {
    #[error("training set is empty")]
    EmptyTrain,
    #[error("{rows} feature rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("matrix is not positive definite (pivot {0})")]
    NotPositiveDefinite(usize),
    #[error("no earlier value for user {user} before day {day}")]
    NoPrior { user: String, day: i64 },
    #[error("grid for {0} is empty")]
    EmptyGrid(String),
    #[error("invalid hyperparameter {name} = {value}")]
    InvalidParam { name: String, value: f64 },
    #[error("model kind {0} cannot be {1}")]
    Unsupported(ModelKind, &'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModelKind {
    Avg,
    Last,
    Majority,
    LinregSfs,
    SvmRbf,
    KrrRbf,
    DateOnly,
    UserIdOnly,
    RandFeat,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelKind::Avg => "AVG",
            ModelKind::Last => "LAST",
            ModelKind::Majority => "MAJORITY",
            ModelKind::LinregSfs => "LINREG_SFS",
            ModelKind::SvmRbf => "SVM_RBF",
            ModelKind::KrrRbf => "KRR_RBF",
            ModelKind::DateOnly => "DATE_ONLY",
            ModelKind::UserIdOnly => "USER_ID_ONLY",
            ModelKind::RandFeat => "RAND_FEAT",
        };
        f.write_str(s)
    }
}

/// One named hyperparameter and the values to try, in order.
///
/// Recognised names: `C`, `gamma` (absolute), `gamma_scale` (multiplied by
/// 1/d at fit time), `lambda`, `max_features`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamGrid {
    pub name: String,
    pub values: Vec<f64>,
}

impl ParamGrid {
    pub fn new(name: &str, values: &[f64]) -> Self {
        ParamGrid { name: name.to_string(), values: values.to_vec() }
    }
}

/// A model family with its hyperparameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default)]
    pub grid: Vec<ParamGrid>,
}

impl ModelSpec {
    /// The kind with its default grid.
    pub fn default_for(kind: ModelKind) -> Self {
        let grid = match kind {
            ModelKind::SvmRbf | ModelKind::DateOnly | ModelKind::RandFeat => vec![
                ParamGrid::new("C", &[0.1, 1.0, 10.0, 100.0]),
                ParamGrid::new("gamma_scale", &[0.01, 0.1, 1.0]),
            ],
            ModelKind::KrrRbf | ModelKind::UserIdOnly => vec![
                ParamGrid::new("lambda", &[1e-3, 1e-2, 1e-1, 1.0]),
                ParamGrid::new("gamma_scale", &[0.01, 0.1, 1.0]),
            ],
            ModelKind::LinregSfs => vec![ParamGrid::new("lambda", &[DEFAULT_RIDGE])],
            ModelKind::Avg | ModelKind::Last | ModelKind::Majority => Vec::new(),
        };
        ModelSpec { kind, grid }
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        for g in &self.grid {
            if g.values.is_empty() {
                return Err(LearnerError::EmptyGrid(g.name.clone()));
            }
            for &v in &g.values {
                let ok = match g.name.as_str() {
                    "max_features" => v >= 0.0 && v.fract() == 0.0,
                    "C" | "gamma" | "gamma_scale" | "lambda" => v > 0.0 && v.is_finite(),
                    _ => false,
                };
                if !ok {
                    return Err(LearnerError::InvalidParam { name: g.name.clone(), value: v });
                }
            }
        }
        Ok(())
    }

    /// Every grid point, first parameter varying slowest.
    pub fn points(&self) -> Vec<Vec<(String, f64)>> {
        let mut out = vec![Vec::new()];
        for g in &self.grid {
            out = out
                .into_iter()
                .flat_map(|p| {
                    g.values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push((g.name.clone(), v));
                        q
                    })
                })
                .collect();
        }
        out
    }
}

/// Looks up `name` in a grid point.
pub fn param(point: &[(String, f64)], name: &str) -> Option<f64> {
    point.iter().find(|(n, _)| n == name).map(|p| p.1)
}

/// Resolves the RBF width of a grid point for `d` features.
pub fn resolve_gamma(point: &[(String, f64)], d: usize) -> f64 {
    if let Some(g) = param(point, "gamma") {
        return g;
    }
    param(point, "gamma_scale").unwrap_or(1.0) / d.max(1) as f64
}

pub(crate) fn check_xy(x: &[Vec<f64>], n_targets: usize) -> Result<(), LearnerError> {
    if x.is_empty() {
        return Err(LearnerError::EmptyTrain);
    }
    if x.len() != n_targets {
        return Err(LearnerError::LengthMismatch { rows: x.len(), targets: n_targets });
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(LearnerError::NonFinite("features"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points_in_declared_order() {
        let spec = ModelSpec {
            kind: ModelKind::SvmRbf,
            grid: vec![ParamGrid::new("C", &[1.0, 2.0]), ParamGrid::new("gamma", &[0.5, 0.25])],
        };
        let pts = spec.points();
        assert_eq!(pts.len(), 4);
        assert_eq!(param(&pts[1], "C"), Some(1.0));
        assert_eq!(param(&pts[1], "gamma"), Some(0.25));
        assert_eq!(param(&pts[2], "C"), Some(2.0));
        assert_eq!(resolve_gamma(&pts[0], 10), 0.5);
        assert_eq!(resolve_gamma(&[("gamma_scale".into(), 1.0)], 4), 0.25);
    }

    #[test]
    fn validation() {
        assert!(ModelSpec::default_for(ModelKind::SvmRbf).validate().is_ok());
        let bad = ModelSpec { kind: ModelKind::SvmRbf, grid: vec![ParamGrid::new("C", &[])] };
        assert_eq!(bad.validate(), Err(LearnerError::EmptyGrid("C".into())));
        let neg = ModelSpec { kind: ModelKind::KrrRbf, grid: vec![ParamGrid::new("lambda", &[0.0])] };
        assert!(neg.validate().is_err());
        let unknown = ModelSpec { kind: ModelKind::KrrRbf, grid: vec![ParamGrid::new("eta", &[1.0])] };
        assert!(unknown.validate().is_err());
        let json = r#"{"kind":"SVM_RBF","grid":[{"name":"C","values":[1]}]}"#;
        let spec: ModelSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.kind, ModelKind::SvmRbf);
    }
}
