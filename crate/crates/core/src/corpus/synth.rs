//! Synthetic longitudinal panels and the RAND feature ablation.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{write_file, CorpusError, Dataset, Day, MoodReport, RawDay, TargetRange, UserId};
use crate::seed::{child_seed, rng, stage};

/// Parameters of the synthetic panel generator.
///
/// Per user `u` a baseline `b_u ~ N(mid, σ_b²)` is drawn and the latent mood
/// follows a stationary AR(1) around it with marginal within-user variance
/// `σ_w²`. Feature channels are laid out as `[noise | identity | signal]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub n_users: usize,
    pub days_per_user: usize,
    pub user_baseline_sd: f64,
    pub within_user_sd: f64,
    #[serde(default)]
    pub ar_coefficient: f64,
    #[serde(default)]
    pub d_noise: usize,
    #[serde(default)]
    pub d_id: usize,
    #[serde(default)]
    pub d_signal: usize,
    #[serde(default = "default_signal_gain")]
    pub signal_gain: f64,
    #[serde(default = "default_identity_gain")]
    pub identity_gain: f64,
    #[serde(default = "default_report_every")]
    pub report_every_k_days: usize,
    #[serde(default = "default_target_name")]
    pub target_name: String,
    #[serde(default = "default_target_range")]
    pub target_range: TargetRange,
    pub seed: u64,
}

fn default_signal_gain() -> f64 {
    1.0
}

fn default_identity_gain() -> f64 {
    3.0
}

fn default_report_every() -> usize {
    1
}

fn default_target_name() -> String {
    "mood".to_string()
}

fn default_target_range() -> TargetRange {
    TargetRange { lo: 10.0, hi: 50.0 }
}

impl GenConfig {
    /// Strong user offsets, identity-only features, no state signal.
    pub fn scenario_a(seed: u64) -> Self {
        GenConfig {
            n_users: 20,
            days_per_user: 60,
            user_baseline_sd: 6.0,
            within_user_sd: 3.0,
            ar_coefficient: 0.0,
            d_noise: 0,
            d_id: 5,
            d_signal: 0,
            signal_gain: default_signal_gain(),
            identity_gain: default_identity_gain(),
            report_every_k_days: 1,
            target_name: default_target_name(),
            target_range: default_target_range(),
            seed,
        }
    }

    /// Strongly autocorrelated daily target with mostly uninformative features.
    pub fn autoregressive(seed: u64) -> Self {
        GenConfig {
            n_users: 15,
            days_per_user: 80,
            user_baseline_sd: 4.0,
            within_user_sd: 3.0,
            ar_coefficient: 0.9,
            d_noise: 6,
            d_id: 0,
            d_signal: 2,
            signal_gain: 0.3,
            identity_gain: 0.0,
            report_every_k_days: 1,
            target_name: default_target_name(),
            target_range: default_target_range(),
            seed,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.d_noise + self.d_id + self.d_signal
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: &str| Err(CorpusError::InvalidConfig(m.to_string()));
        if self.n_users < 2 {
            return bad("n_users must be ≥ 2");
        }
        if self.days_per_user < 2 {
            return bad("days_per_user must be ≥ 2");
        }
        if !(self.user_baseline_sd >= 0.0 && self.user_baseline_sd.is_finite()) {
            return bad("user_baseline_sd must be ≥ 0");
        }
        if !(self.within_user_sd > 0.0 && self.within_user_sd.is_finite()) {
            return bad("within_user_sd must be > 0");
        }
        if !(0.0..1.0).contains(&self.ar_coefficient) {
            return bad("ar_coefficient must lie in [0, 1)");
        }
        if self.feature_dim() == 0 {
            return bad("d_noise + d_id + d_signal must be ≥ 1");
        }
        if self.report_every_k_days == 0 {
            return bad("report_every_k_days must be ≥ 1");
        }
        if !self.signal_gain.is_finite() || !self.identity_gain.is_finite() {
            return bad("gains must be finite");
        }
        if self.target_name.is_empty() || self.target_name.contains(',') {
            return bad("target_name must be a non-empty CSV-safe name");
        }
        Ok(())
    }
}

/// Generates a dataset; identical configs give identical datasets.
pub fn generate_synthetic(cfg: &GenConfig) -> Result<Dataset, CorpusError> {
    cfg.validate()?;
    let range = cfg.target_range;
    let width = (cfg.n_users - 1).to_string().len();
    let innov_sd = cfg.within_user_sd * (1.0 - cfg.ar_coefficient.powi(2)).sqrt();
    let phi = cfg.ar_coefficient;

    let mut raw_days = Vec::with_capacity(cfg.n_users * cfg.days_per_user);
    let mut reports = Vec::new();
    for u in 0..cfg.n_users {
        let user = UserId(format!("u{u:0width$}"));
        let mut r = rng(child_seed(cfg.seed, &[stage::GENERATE, u as u64]));
        let mut normal = || -> f64 { r.sample(StandardNormal) };

        let baseline = range.mid() + cfg.user_baseline_sd * normal();
        let offsets: Vec<f64> = (0..cfg.d_id).map(|_| normal()).collect();
        let mut latent = baseline + cfg.within_user_sd * normal();
        for t in 0..cfg.days_per_user {
            if t > 0 {
                latent = baseline + phi * (latent - baseline) + innov_sd * normal();
            }
            let mut features = Vec::with_capacity(cfg.feature_dim());
            features.extend((0..cfg.d_noise).map(|_| normal()));
            features.extend(offsets.iter().map(|o| o * cfg.identity_gain + normal()));
            features.extend((0..cfg.d_signal).map(|_| cfg.signal_gain * (latent - baseline) + normal()));
            let day = t as Day;
            raw_days.push(RawDay { user: user.clone(), day, features });
            if t % cfg.report_every_k_days == 0 {
                reports.push(MoodReport {
                    user: user.clone(),
                    day,
                    targets: BTreeMap::from([(cfg.target_name.clone(), range.clamp(latent))]),
                });
            }
        }
    }
    Dataset::new(raw_days, reports, BTreeMap::from([(cfg.target_name.clone(), range)]))
}

/// Writes the dataset tables plus `gen_config.json` echoing `cfg`.
pub fn write_synthetic(ds: &Dataset, cfg: &GenConfig, dir: &Path) -> Result<(), CorpusError> {
    ds.write_to_dir(dir)?;
    let json = serde_json::to_string_pretty(cfg).expect("config serialises");
    write_file(&dir.join(super::GEN_CONFIG_FILE), &(json + "\n"))
}

/// Replaces every raw feature value by iid `N(0, 1)` noise of the same
/// dimensionality. Reports are untouched.
pub fn randomize_raw_features(ds: &Dataset, seed: u64) -> Dataset {
    let mut r = rng(child_seed(seed, &[stage::RANDOMIZE]));
    let dim = ds.feature_dim();
    let features =
        ds.raw_days().iter().map(|_| (0..dim).map(|_| r.sample(StandardNormal)).collect()).collect();
    ds.with_raw_features(features)
}
