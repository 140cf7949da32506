//! Data model, CSV ingestion and instance construction.
//!
//! A [`Dataset`] holds per-day feature vectors ([`RawDay`]) and self-reports
//! ([`MoodReport`]) keyed by user and integer day index. Windows are
//! aggregated into [`Instance`]s by [`build_instances`].

mod instances;
mod synth;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use instances::{build_instances, Aggregation, Instance, InstanceSet};
pub use synth::{generate_synthetic, randomize_raw_features, write_synthetic, GenConfig};

/// Day index counted from the dataset epoch.
pub type Day = i64;

pub const RAW_FEATURES_FILE: &str = "raw_features.csv";
pub const REPORTS_FILE: &str = "reports.csv";
pub const GEN_CONFIG_FILE: &str = "gen_config.json";
pub const RANGES_FILE: &str = "ranges.json";

/// Opaque user identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub String);

impl UserId {
    pub fn new(id: impl Into<String>) -> Self {
        UserId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for UserId {
    fn from(s: &str) -> Self {
        UserId(s.to_string())
    }
}

/// Declared closed range of a psychological scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct TargetRange {
    pub lo: f64,
    pub hi: f64,
}

impl TargetRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self, CorpusError> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(CorpusError::Schema(format!("invalid target range [{lo}, {hi}]")));
        }
        Ok(TargetRange { lo, hi })
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
}

impl TryFrom<[f64; 2]> for TargetRange {
    type Error = CorpusError;

    fn try_from(v: [f64; 2]) -> Result<Self, Self::Error> {
        TargetRange::new(v[0], v[1])
    }
}

impl From<TargetRange> for [f64; 2] {
    fn from(r: TargetRange) -> Self {
        [r.lo, r.hi]
    }
}

/// One user-day of aggregated event-level feature values.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDay {
    pub user: UserId,
    pub day: Day,
    pub features: Vec<f64>,
}

/// One (possibly pre-averaged) self-report.
#[derive(Debug, Clone, PartialEq)]
pub struct MoodReport {
    pub user: UserId,
    pub day: Day,
    pub targets: BTreeMap<String, f64>,
}

/// How several reports of the same user on the same day are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SameDayPolicy {
    /// Mean per target over the day's reports.
    #[default]
    Average,
    /// Keep the last report of the day in file order.
    Last,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: parse error on line {line}: {message}")]
    Parse { file: String, line: u64, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("duplicate raw row for user {user}, day {day}")]
    Duplicate { user: UserId, day: Day },
    #[error("target {target} = {value} for user {user}, day {day} is outside [{lo}, {hi}]")]
    OutOfRange { user: UserId, day: Day, target: String, value: f64, lo: f64, hi: f64 },
    #[error("negative day index {day} for user {user}")]
    NegativeDay { user: UserId, day: Day },
    #[error("unknown target {0}")]
    UnknownTarget(String),
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("no report of target {target} has raw data in a {window}-day window and {lags} prior reports")]
    NoInstances { target: String, window: usize, lags: usize },
}

/// Both corpora in one abstract form.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    raw_days: Vec<RawDay>,
    reports: Vec<MoodReport>,
    target_ranges: BTreeMap<String, TargetRange>,
    feature_dim: usize,
    targets_only: bool,
}

impl Dataset {
    /// Validates and assembles a dataset. Rows are sorted by `(user, day)`.
    ///
    /// With an empty `raw_days` the dataset is flagged targets-only and
    /// `feature_dim` is 0.
    pub fn new(
        mut raw_days: Vec<RawDay>,
        mut reports: Vec<MoodReport>,
        target_ranges: BTreeMap<String, TargetRange>,
    ) -> Result<Self, CorpusError> {
        raw_days.sort_by(|a, b| (&a.user, a.day).cmp(&(&b.user, b.day)));
        reports.sort_by(|a, b| (&a.user, a.day).cmp(&(&b.user, b.day)));

        let targets_only = raw_days.is_empty();
        let feature_dim = raw_days.first().map_or(0, |r| r.features.len());
        if !targets_only && feature_dim == 0 {
            return Err(CorpusError::Schema("feature dimensionality must be ≥ 1".into()));
        }
        for pair in raw_days.windows(2) {
            if pair[0].user == pair[1].user && pair[0].day == pair[1].day {
                return Err(CorpusError::Duplicate { user: pair[1].user.clone(), day: pair[1].day });
            }
        }
        for r in &raw_days {
            if r.day < 0 {
                return Err(CorpusError::NegativeDay { user: r.user.clone(), day: r.day });
            }
            if r.features.len() != feature_dim {
                return Err(CorpusError::Schema(format!(
                    "user {} day {} has {} features, expected {feature_dim}",
                    r.user,
                    r.day,
                    r.features.len()
                )));
            }
            if r.features.iter().any(|v| !v.is_finite()) {
                return Err(CorpusError::Schema(format!(
                    "non-finite feature for user {} day {}",
                    r.user, r.day
                )));
            }
        }

        let raw_users: BTreeSet<&UserId> = raw_days.iter().map(|r| &r.user).collect();
        for pair in reports.windows(2) {
            if pair[0].user == pair[1].user && pair[0].day == pair[1].day {
                return Err(CorpusError::Schema(format!(
                    "more than one report for user {} day {}; merge same-day reports first",
                    pair[1].user, pair[1].day
                )));
            }
        }
        for rep in &reports {
            if rep.day < 0 {
                return Err(CorpusError::NegativeDay { user: rep.user.clone(), day: rep.day });
            }
            if !targets_only && !raw_users.contains(&rep.user) {
                return Err(CorpusError::Schema(format!("report user {} has no raw feature rows", rep.user)));
            }
            for (name, &value) in &rep.targets {
                let range =
                    target_ranges.get(name).ok_or_else(|| CorpusError::UnknownTarget(name.clone()))?;
                if !range.contains(value) {
                    return Err(CorpusError::OutOfRange {
                        user: rep.user.clone(),
                        day: rep.day,
                        target: name.clone(),
                        value,
                        lo: range.lo,
                        hi: range.hi,
                    });
                }
            }
        }

        Ok(Dataset { raw_days, reports, target_ranges, feature_dim, targets_only })
    }

    pub fn raw_days(&self) -> &[RawDay] {
        &self.raw_days
    }

    pub fn reports(&self) -> &[MoodReport] {
        &self.reports
    }

    pub fn target_ranges(&self) -> &BTreeMap<String, TargetRange> {
        &self.target_ranges
    }

    pub fn target_range(&self, target: &str) -> Result<TargetRange, CorpusError> {
        self.target_ranges.get(target).copied().ok_or_else(|| CorpusError::UnknownTarget(target.to_string()))
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn is_targets_only(&self) -> bool {
        self.targets_only
    }

    /// Users that appear in either table, sorted.
    pub fn users(&self) -> Vec<UserId> {
        let set: BTreeSet<&UserId> =
            self.raw_days.iter().map(|r| &r.user).chain(self.reports.iter().map(|r| &r.user)).collect();
        set.into_iter().cloned().collect()
    }

    /// Same dataset restricted to the given users.
    pub fn retain_users(&self, keep: &BTreeSet<UserId>) -> Dataset {
        Dataset {
            raw_days: self.raw_days.iter().filter(|r| keep.contains(&r.user)).cloned().collect(),
            reports: self.reports.iter().filter(|r| keep.contains(&r.user)).cloned().collect(),
            target_ranges: self.target_ranges.clone(),
            feature_dim: self.feature_dim,
            targets_only: self.targets_only,
        }
    }

    /// Copy with the feature vectors replaced; `features` must follow
    /// [`Dataset::raw_days`] order.
    pub(crate) fn with_raw_features(&self, features: Vec<Vec<f64>>) -> Dataset {
        debug_assert_eq!(features.len(), self.raw_days.len());
        let raw_days = self
            .raw_days
            .iter()
            .zip(features)
            .map(|(r, f)| RawDay { user: r.user.clone(), day: r.day, features: f })
            .collect();
        Dataset { raw_days, ..self.clone() }
    }

    /// Report series `(day, value)` of one target per user, days increasing.
    pub fn target_series(&self, target: &str) -> BTreeMap<UserId, Vec<(Day, f64)>> {
        let mut out: BTreeMap<UserId, Vec<(Day, f64)>> = BTreeMap::new();
        for rep in &self.reports {
            if let Some(&v) = rep.targets.get(target) {
                out.entry(rep.user.clone()).or_default().push((rep.day, v));
            }
        }
        out
    }

    fn raw_csv(&self) -> String {
        let mut s = String::from("user_id,day");
        for i in 0..self.feature_dim {
            s.push_str(&format!(",f{i}"));
        }
        s.push('\n');
        for r in &self.raw_days {
            s.push_str(&format!("{},{}", r.user, r.day));
            for v in &r.features {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }

    fn reports_csv(&self) -> String {
        let names: Vec<&String> = self.target_ranges.keys().collect();
        let mut s = String::from("user_id,day");
        for n in &names {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for rep in &self.reports {
            s.push_str(&format!("{},{}", rep.user, rep.day));
            for n in &names {
                s.push(',');
                if let Some(v) = rep.targets.get(*n) {
                    s.push_str(&format!("{v}"));
                }
            }
            s.push('\n');
        }
        s
    }

    /// Hex SHA-256 over the canonical CSV serialisation of both tables.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.raw_csv().as_bytes());
        h.update(b"\0");
        h.update(self.reports_csv().as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Writes `raw_features.csv`, `reports.csv` and `ranges.json` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<(), CorpusError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        write_file(&dir.join(RAW_FEATURES_FILE), &self.raw_csv())?;
        write_file(&dir.join(REPORTS_FILE), &self.reports_csv())?;
        let ranges = serde_json::to_string_pretty(&self.target_ranges).expect("ranges serialise");
        write_file(&dir.join(RANGES_FILE), &(ranges + "\n"))
    }
}

pub(crate) fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io { path: path.to_path_buf(), source }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CorpusError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

/// Loads the two CSV tables, averaging same-day reports.
pub fn load_dataset(
    raw_path: &Path,
    reports_path: &Path,
    target_ranges: &BTreeMap<String, TargetRange>,
) -> Result<Dataset, CorpusError> {
    load_dataset_with(raw_path, reports_path, target_ranges, SameDayPolicy::Average)
}

pub fn load_dataset_with(
    raw_path: &Path,
    reports_path: &Path,
    target_ranges: &BTreeMap<String, TargetRange>,
    policy: SameDayPolicy,
) -> Result<Dataset, CorpusError> {
    let raw_days = read_raw(raw_path)?;
    let reports = read_reports(reports_path, target_ranges, policy)?;
    Dataset::new(raw_days, reports, target_ranges.clone())
}

/// Loads a dataset directory. Target ranges come from `ranges.json`, or
/// from the `target_name`/`target_range` of `gen_config.json`.
pub fn load_dataset_dir(dir: &Path, policy: SameDayPolicy) -> Result<Dataset, CorpusError> {
    let ranges = load_ranges(dir)?;
    load_dataset_with(&dir.join(RAW_FEATURES_FILE), &dir.join(REPORTS_FILE), &ranges, policy)
}

pub fn load_ranges(dir: &Path) -> Result<BTreeMap<String, TargetRange>, CorpusError> {
    let ranges_path = dir.join(RANGES_FILE);
    if ranges_path.exists() {
        let text = fs::read_to_string(&ranges_path).map_err(|e| io_err(&ranges_path, e))?;
        return serde_json::from_str(&text)
            .map_err(|e| CorpusError::Schema(format!("{}: {e}", ranges_path.display())));
    }
    let gen_path = dir.join(GEN_CONFIG_FILE);
    if gen_path.exists() {
        let text = fs::read_to_string(&gen_path).map_err(|e| io_err(&gen_path, e))?;
        let cfg: GenConfig = serde_json::from_str(&text)
            .map_err(|e| CorpusError::Schema(format!("{}: {e}", gen_path.display())))?;
        return Ok(BTreeMap::from([(cfg.target_name.clone(), cfg.target_range)]));
    }
    Err(CorpusError::Schema(format!("{} has neither {RANGES_FILE} nor {GEN_CONFIG_FILE}", dir.display())))
}

fn open_csv(path: &Path) -> Result<csv::Reader<fs::File>, CorpusError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn file_label(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> CorpusError {
    CorpusError::Parse { file: file_label(path), line, message: message.into() }
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn csv_err(path: &Path, e: csv::Error) -> CorpusError {
    let line = e.position().map_or(0, |p| p.line());
    parse_err(path, line, e.to_string())
}

fn parse_key(path: &Path, rec: &csv::StringRecord) -> Result<(UserId, Day), CorpusError> {
    let line = record_line(rec);
    let user = rec.get(0).unwrap_or("").trim();
    if user.is_empty() {
        return Err(parse_err(path, line, "empty user_id"));
    }
    let day_s = rec.get(1).unwrap_or("").trim();
    let day: Day = day_s.parse().map_err(|_| parse_err(path, line, format!("bad day index {day_s:?}")))?;
    Ok((UserId::new(user), day))
}

fn read_raw(path: &Path) -> Result<Vec<RawDay>, CorpusError> {
    let mut rdr = open_csv(path)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.len() < 3 || &headers[0] != "user_id" || &headers[1] != "day" {
        return Err(CorpusError::Schema(format!("{}: header must be user_id,day,f0,...", file_label(path))));
    }
    for (i, h) in headers.iter().skip(2).enumerate() {
        if h != format!("f{i}") {
            return Err(CorpusError::Schema(format!(
                "{}: feature column {i} is named {h:?}, expected f{i}",
                file_label(path)
            )));
        }
    }
    let dim = headers.len() - 2;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { .. } => {
                CorpusError::Schema(format!("{}: inconsistent feature dimensionality: {e}", file_label(path)))
            }
            _ => csv_err(path, e),
        })?;
        let (user, day) = parse_key(path, &rec)?;
        let line = record_line(&rec);
        let features = rec
            .iter()
            .skip(2)
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| parse_err(path, line, format!("bad feature value {s:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        debug_assert_eq!(features.len(), dim);
        out.push(RawDay { user, day, features });
    }
    Ok(out)
}

fn read_reports(
    path: &Path,
    ranges: &BTreeMap<String, TargetRange>,
    policy: SameDayPolicy,
) -> Result<Vec<MoodReport>, CorpusError> {
    let mut rdr = open_csv(path)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.len() < 3 || &headers[0] != "user_id" || &headers[1] != "day" {
        return Err(CorpusError::Schema(format!(
            "{}: header must be user_id,day,<target>,...",
            file_label(path)
        )));
    }
    let names: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
    for n in &names {
        if !ranges.contains_key(n) {
            return Err(CorpusError::Schema(format!("no declared range for target {n}")));
        }
    }

    // (user, day) -> per-target list of values in file order
    let mut grouped: BTreeMap<(UserId, Day), BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let (user, day) = parse_key(path, &rec)?;
        let line = record_line(&rec);
        let slot = grouped.entry((user.clone(), day)).or_default();
        for (name, cell) in names.iter().zip(rec.iter().skip(2)) {
            let cell = cell.trim();
            if cell.is_empty() {
                continue;
            }
            let v: f64 =
                cell.parse().map_err(|_| parse_err(path, line, format!("bad score {cell:?} for {name}")))?;
            let range = ranges[name];
            if !range.contains(v) {
                return Err(CorpusError::OutOfRange {
                    user,
                    day,
                    target: name.clone(),
                    value: v,
                    lo: range.lo,
                    hi: range.hi,
                });
            }
            slot.entry(name.clone()).or_default().push(v);
        }
    }

    Ok(grouped
        .into_iter()
        .map(|((user, day), per_target)| {
            let targets = per_target
                .into_iter()
                .map(|(name, vals)| {
                    let v = match policy {
                        SameDayPolicy::Average => vals.iter().sum::<f64>() / vals.len() as f64,
                        SameDayPolicy::Last => *vals.last().expect("non-empty"),
                    };
                    (name, v)
                })
                .collect();
            MoodReport { user, day, targets }
        })
        .collect())
}
