//! Split generation for the three evaluation frameworks and leakage audits.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{InstanceSet, UserId};
use crate::seed::{child_seed, rng, stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Protocol {
    /// Leave one user out: test on a user never seen in training.
    Louocv,
    /// Leave one instance out, training only on the same user's other instances.
    Loiocv,
    /// Pooled, shuffled k-fold across all users.
    Mixed,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Loiocv, Protocol::Louocv, Protocol::Mixed];

    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::Louocv => "LOUOCV",
            Protocol::Loiocv => "LOIOCV",
            Protocol::Mixed => "MIXED",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "LOUOCV" => Ok(Protocol::Louocv),
            "LOIOCV" => Ok(Protocol::Loiocv),
            "MIXED" => Ok(Protocol::Mixed),
            _ => Err(ProtocolError::UnknownProtocol(s.to_string())),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("LOUOCV needs at least 2 users, found {0}")]
    TooFewUsers(usize),
    #[error("{n} instances cannot fill {k} folds")]
    TooFewInstances { n: usize, k: usize },
    #[error("k must be at least 2, got {0}")]
    BadK(usize),
    #[error("no user has the 2 instances LOIOCV needs")]
    NoEligibleUser,
    #[error("unknown protocol {0:?}")]
    UnknownProtocol(String),
}

/// Train/test index sets into one [`InstanceSet`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub protocol: Protocol,
    pub fold: usize,
}

/// Splits of one protocol cycle, with users left out of it.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSet {
    pub splits: Vec<Split>,
    /// Users with too few instances to take part (LOIOCV only).
    pub skipped_users: Vec<UserId>,
}

/// One split per user: that user's instances are the test set.
pub fn louocv_splits(xs: &InstanceSet) -> Result<SplitSet, ProtocolError> {
    let by_user = xs.indices_by_user();
    if by_user.len() < 2 {
        return Err(ProtocolError::TooFewUsers(by_user.len()));
    }
    let splits = by_user
        .values()
        .enumerate()
        .map(|(fold, test)| {
            let held: BTreeSet<usize> = test.iter().copied().collect();
            Split {
                train: (0..xs.len()).filter(|i| !held.contains(i)).collect(),
                test: test.clone(),
                protocol: Protocol::Louocv,
                fold,
            }
        })
        .collect();
    Ok(SplitSet { splits, skipped_users: Vec::new() })
}

/// One split per instance; training data is the same user's other instances.
///
/// Users with a single instance cannot form a split and are reported in
/// `skipped_users`.
pub fn loiocv_splits(xs: &InstanceSet) -> Result<SplitSet, ProtocolError> {
    let mut splits = Vec::new();
    let mut skipped_users = Vec::new();
    for (user, idx) in xs.indices_by_user() {
        if idx.len() < 2 {
            skipped_users.push(user);
            continue;
        }
        for &t in &idx {
            splits.push(Split {
                train: idx.iter().copied().filter(|&i| i != t).collect(),
                test: vec![t],
                protocol: Protocol::Loiocv,
                fold: splits.len(),
            });
        }
    }
    if splits.is_empty() {
        return Err(ProtocolError::NoEligibleUser);
    }
    Ok(SplitSet { splits, skipped_users })
}

/// Shuffled k-fold over all instances; the first `n mod k` folds get one
/// extra instance.
pub fn mixed_kfold_splits(xs: &InstanceSet, k: usize, seed: u64) -> Result<SplitSet, ProtocolError> {
    let splits = kfold_indices(xs.len(), k, child_seed(seed, &[stage::MIXED_SPLIT]))?
        .into_iter()
        .enumerate()
        .map(|(fold, (train, test))| Split { train, test, protocol: Protocol::Mixed, fold })
        .collect();
    Ok(SplitSet { splits, skipped_users: Vec::new() })
}

/// `(train, test)` index lists of one fold.
pub type FoldIndices = (Vec<usize>, Vec<usize>);

/// Shuffled `(train, test)` partitions of `0..n`, both sorted ascending.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<FoldIndices>, ProtocolError> {
    if k < 2 {
        return Err(ProtocolError::BadK(k));
    }
    if n < k {
        return Err(ProtocolError::TooFewInstances { n, k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng(seed));
    let (base, extra) = (n / k, n % k);
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut test = order[start..start + size].to_vec();
        test.sort_unstable();
        let held: BTreeSet<usize> = test.iter().copied().collect();
        let train = (0..n).filter(|i| !held.contains(i)).collect();
        out.push((train, test));
        start += size;
    }
    Ok(out)
}

/// Splits of `protocol` over `xs`; `k` and `seed` only matter for MIXED.
pub fn generate_splits(
    protocol: Protocol,
    xs: &InstanceSet,
    k: usize,
    seed: u64,
) -> Result<SplitSet, ProtocolError> {
    match protocol {
        Protocol::Louocv => louocv_splits(xs),
        Protocol::Loiocv => loiocv_splits(xs),
        Protocol::Mixed => mixed_kfold_splits(xs, k, seed),
    }
}

/// Leakage measured on a single split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeakageReport {
    pub protocol: Protocol,
    pub fold: usize,
    /// Test instances whose user also appears in train.
    pub user_overlap: usize,
    /// Largest share of a test window covered by a same-user train window.
    pub max_window_overlap: f64,
    /// Some feature column holds a prior value of the target.
    pub target_leak: bool,
}

impl LeakageReport {
    pub const CSV_HEADER: &'static str = "protocol,fold,user_overlap,max_window_overlap,target_leak";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.protocol, self.fold, self.user_overlap, self.max_window_overlap, self.target_leak
        )
    }
}

pub fn audit_split(split: &Split, xs: &InstanceSet) -> LeakageReport {
    let mut train_by_user: BTreeMap<&UserId, Vec<usize>> = BTreeMap::new();
    for &i in &split.train {
        train_by_user.entry(&xs.get(i).user).or_default().push(i);
    }
    let mut user_overlap = 0;
    let mut max_window_overlap = 0.0f64;
    for &t in &split.test {
        let test = xs.get(t);
        let Some(same_user) = train_by_user.get(&test.user) else {
            continue;
        };
        user_overlap += 1;
        let (lo, hi) = test.window;
        for &r in same_user {
            let (rlo, rhi) = xs.get(r).window;
            let shared = (hi.min(rhi) - lo.max(rlo) + 1).max(0);
            max_window_overlap = max_window_overlap.max(shared as f64 / test.window_len() as f64);
        }
    }
    LeakageReport {
        protocol: split.protocol,
        fold: split.fold,
        user_overlap,
        max_window_overlap,
        target_leak: !xs.lag_columns().is_empty(),
    }
}

/// Fold-level reports folded into one protocol-level summary.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LeakageSummary {
    /// Summed over folds.
    pub user_overlap: usize,
    /// Maximum over folds.
    pub max_window_overlap: f64,
    pub target_leak: bool,
}

impl LeakageSummary {
    pub fn from_reports<'a>(reports: impl IntoIterator<Item = &'a LeakageReport>) -> Self {
        reports.into_iter().fold(LeakageSummary::default(), |acc, r| LeakageSummary {
            user_overlap: acc.user_overlap + r.user_overlap,
            max_window_overlap: acc.max_window_overlap.max(r.max_window_overlap),
            target_leak: acc.target_leak || r.target_leak,
        })
    }

    pub fn of_splits(splits: &[Split], xs: &InstanceSet) -> Self {
        let reports: Vec<_> = splits.iter().map(|s| audit_split(s, xs)).collect();
        Self::from_reports(&reports)
    }
}
