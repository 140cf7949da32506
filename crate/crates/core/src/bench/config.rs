use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::corpus::Aggregation;
use crate::learners::{ModelKind, ModelSpec, DEFAULT_INNER_K};
use crate::protocol::Protocol;
use crate::transform::BinningMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Experiment {
    P1,
    P2,
    P3R,
    P3C,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::P1 => "P1",
            Experiment::P2 => "P2",
            Experiment::P3R => "P3R",
            Experiment::P3C => "P3C",
        })
    }
}

impl FromStr for Experiment {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "P1" => Ok(Experiment::P1),
            "P2" => Ok(Experiment::P2),
            "P3R" => Ok(Experiment::P3R),
            "P3C" => Ok(Experiment::P3C),
            _ => Err(BenchError::Config(format!("unknown experiment {s:?}"))),
        }
    }
}

/// Feature normalisation applied before kernel models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NormVariant {
    /// Per-user z-score over all of a user's instances, test ones included ("+").
    PerUser,
    /// Global z-score fitted on each training split ("-").
    TrainFitted,
}

impl NormVariant {
    pub fn tag(&self) -> &'static str {
        match self {
            NormVariant::PerUser => "+",
            NormVariant::TrainFitted => "-",
        }
    }
}

fn default_target() -> String {
    "mood".to_string()
}
fn default_fraction() -> f64 {
    0.3
}
fn default_rand_runs() -> usize {
    100
}
fn default_mixed_k() -> usize {
    5
}
fn default_inner_k() -> usize {
    DEFAULT_INNER_K
}
fn default_sfs_inner_k() -> usize {
    5
}
fn default_smoothing() -> usize {
    14
}
fn default_min_series() -> usize {
    15
}

/// Settings of one experiment run. Optional fields fall back to the
/// experiment's defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: Option<Experiment>,
    #[serde(default = "default_target")]
    pub target: String,
    #[serde(default)]
    pub protocols: Option<Vec<Protocol>>,
    /// Feature window in days (P1, P3).
    #[serde(default)]
    pub window_days: Option<usize>,
    /// Prior target values appended as features (P1).
    #[serde(default)]
    pub target_lags: Option<usize>,
    /// Feature windows swept by P2.
    #[serde(default)]
    pub t_hist: Option<Vec<usize>>,
    /// P2 windows at which the DATE / LAST / RAND baselines run.
    #[serde(default)]
    pub rand_t_hist: Option<Vec<usize>>,
    #[serde(default)]
    pub aggregation: Aggregation,
    /// Overrides of the default grid per model kind.
    #[serde(default)]
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub normalization: Option<Vec<NormVariant>>,
    #[serde(default = "default_fraction")]
    pub binning_fraction: f64,
    #[serde(default)]
    pub binning_modes: Option<Vec<BinningMode>>,
    #[serde(default = "default_rand_runs")]
    pub rand_runs: usize,
    #[serde(default = "default_mixed_k")]
    pub mixed_k: usize,
    #[serde(default = "default_inner_k")]
    pub inner_k: usize,
    #[serde(default = "default_sfs_inner_k")]
    pub sfs_inner_k: usize,
    #[serde(default)]
    pub max_features: Option<usize>,
    /// Moving-average width of the P2 target chain.
    #[serde(default = "default_smoothing")]
    pub smoothing_days: usize,
    /// Minimum reports per user for P2.
    #[serde(default = "default_min_series")]
    pub min_series_len: usize,
    /// Keep only the last report of a day instead of averaging (applied at load).
    #[serde(default)]
    pub last_score_per_day: bool,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Defaults for `experiment` with the given seed.
    pub fn new(experiment: Experiment, seed: u64) -> Self {
        ExperimentConfig {
            experiment: Some(experiment),
            target: default_target(),
            protocols: None,
            window_days: None,
            target_lags: None,
            t_hist: None,
            rand_t_hist: None,
            aggregation: Aggregation::Mean,
            models: Vec::new(),
            normalization: None,
            binning_fraction: default_fraction(),
            binning_modes: None,
            rand_runs: default_rand_runs(),
            mixed_k: default_mixed_k(),
            inner_k: default_inner_k(),
            sfs_inner_k: default_sfs_inner_k(),
            max_features: None,
            smoothing_days: default_smoothing(),
            min_series_len: default_min_series(),
            last_score_per_day: false,
            seed,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn experiment(&self) -> Result<Experiment, BenchError> {
        self.experiment.ok_or_else(|| BenchError::Config("experiment is not set".into()))
    }

    pub fn protocols(&self) -> Vec<Protocol> {
        if let Some(p) = &self.protocols {
            return p.clone();
        }
        match self.experiment {
            Some(Experiment::P1) | Some(Experiment::P2) => vec![Protocol::Loiocv, Protocol::Louocv],
            _ => vec![Protocol::Mixed, Protocol::Loiocv, Protocol::Louocv],
        }
    }

    pub fn window_days(&self) -> usize {
        self.window_days.unwrap_or(match self.experiment {
            Some(Experiment::P1) => 3,
            _ => 1,
        })
    }

    pub fn target_lags(&self) -> usize {
        self.target_lags.unwrap_or(match self.experiment {
            Some(Experiment::P1) => 2,
            _ => 0,
        })
    }

    pub fn t_hist(&self) -> Vec<usize> {
        self.t_hist.clone().unwrap_or_else(|| (1..=14).collect())
    }

    pub fn rand_t_hist(&self) -> Vec<usize> {
        self.rand_t_hist.clone().unwrap_or_else(|| vec![14])
    }

    pub fn normalization(&self) -> Vec<NormVariant> {
        self.normalization.clone().unwrap_or_else(|| vec![NormVariant::PerUser, NormVariant::TrainFitted])
    }

    pub fn binning_modes(&self) -> Vec<BinningMode> {
        self.binning_modes.clone().unwrap_or_else(|| vec![BinningMode::Uniq, BinningMode::Pers])
    }

    /// Spec of `kind`: the configured override, else the default grid.
    pub fn model(&self, kind: ModelKind) -> ModelSpec {
        self.models.iter().find(|m| m.kind == kind).cloned().unwrap_or_else(|| ModelSpec::default_for(kind))
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        let exp = self.experiment()?;
        if self.protocols().is_empty() {
            return bad("protocol set is empty".into());
        }
        if self.window_days() == 0 || self.window_days() > 366 {
            return bad(format!("window_days {} outside 1..=366", self.window_days()));
        }
        if self.target_lags() > 30 {
            return bad(format!("target_lags {} exceeds 30", self.target_lags()));
        }
        for &t in self.t_hist().iter().chain(&self.rand_t_hist()) {
            if t == 0 || t > 366 {
                return bad(format!("T_HIST {t} outside 1..=366"));
            }
        }
        if exp == Experiment::P2 && self.t_hist().is_empty() {
            return bad("t_hist is empty".into());
        }
        if !(self.binning_fraction > 0.0 && self.binning_fraction <= 0.5) {
            return bad(format!("binning_fraction {} outside (0, 0.5]", self.binning_fraction));
        }
        if self.binning_modes().is_empty() || self.normalization().is_empty() {
            return bad("binning_modes and normalization must be non-empty".into());
        }
        if self.rand_runs == 0 {
            return bad("rand_runs must be positive".into());
        }
        if self.mixed_k < 2 || self.inner_k < 2 || self.sfs_inner_k < 2 {
            return bad("mixed_k, inner_k and sfs_inner_k must be at least 2".into());
        }
        if self.smoothing_days == 0 || self.min_series_len < 2 {
            return bad("smoothing_days must be ≥ 1 and min_series_len ≥ 2".into());
        }
        for m in &self.models {
            m.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Canonical JSON used in report provenance.
    pub fn echo(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_and_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"experiment":"P1","seed":7}"#).unwrap();
        assert_eq!(cfg.window_days(), 3);
        assert_eq!(cfg.target_lags(), 2);
        assert_eq!(cfg.protocols(), vec![Protocol::Loiocv, Protocol::Louocv]);
        cfg.validate().unwrap();
        let p3 = ExperimentConfig::new(Experiment::P3R, 1);
        assert_eq!(p3.window_days(), 1);
        assert_eq!(p3.protocols().len(), 3);
        assert_eq!(ExperimentConfig::new(Experiment::P2, 1).t_hist().len(), 14);
    }

    #[test]
    fn seed_is_required_and_unknown_keys_fail() {
        assert!(ExperimentConfig::from_json(r#"{"experiment":"P1"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment":"P1","seed":1,"colour":2}"#).is_err());
    }

    #[test]
    fn out_of_range_values_fail_validation() {
        let mut cfg = ExperimentConfig::new(Experiment::P3C, 1);
        cfg.binning_fraction = 0.7;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::new(Experiment::P2, 1);
        cfg.t_hist = Some(vec![0]);
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::new(Experiment::P1, 1);
        cfg.experiment = None;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn echo_round_trips() {
        let cfg = ExperimentConfig::new(Experiment::P2, 3);
        assert_eq!(ExperimentConfig::from_json(&cfg.echo()).unwrap(), cfg);
        assert_eq!("p3c".parse::<Experiment>().unwrap(), Experiment::P3C);
    }
}
