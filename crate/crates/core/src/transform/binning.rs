use serde::{Deserialize, Serialize};

use super::TransformError;
use crate::corpus::{InstanceSet, UserId};

/// Population over which the top/bottom fractions are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BinningMode {
    /// One pool across all users.
    Uniq,
    /// Each user binned separately.
    Pers,
}

impl std::fmt::Display for BinningMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BinningMode::Uniq => "UNIQ",
            BinningMode::Pers => "PERS",
        })
    }
}

/// Outcome of top/bottom binning.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedSet {
    /// Indices into the input set, ascending.
    pub retained: Vec<usize>,
    /// `true` = high class, aligned with `retained`.
    pub labels: Vec<bool>,
    pub mode: BinningMode,
    pub fraction: f64,
    /// Users whose pool was too small to bin (PERS only).
    pub skipped_users: Vec<UserId>,
}

impl BinnedSet {
    pub fn count_high(&self) -> usize {
        self.labels.iter().filter(|l| **l).count()
    }

    pub fn count_low(&self) -> usize {
        self.labels.len() - self.count_high()
    }
}

/// Bins `pool` (indices with scores) into `(index, is_high)` pairs.
fn bin_pool(pool: &mut [(usize, f64)], fraction: f64) -> Vec<(usize, bool)> {
    pool.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let n = pool.len();
    let m = ((fraction * n as f64) + 1e-9).floor() as usize;
    if m == 0 {
        return Vec::new();
    }
    let low = &pool[..m];
    let high = &pool[n - m..];
    let tie = (low[m - 1].1 == high[0].1).then_some(high[0].1);
    low.iter()
        .map(|p| (p, false))
        .chain(high.iter().map(|p| (p, true)))
        .filter(|(p, _)| Some(p.1) != tie)
        .map(|(p, h)| (p.0, h))
        .collect()
}

/// Labels the top `fraction` of targets high and the bottom `fraction` low,
/// discarding the middle.
///
/// When the lowest high score equals the highest low score, every selected
/// instance carrying that score is discarded.
pub fn bin_top_bottom(
    xs: &InstanceSet,
    fraction: f64,
    mode: BinningMode,
) -> Result<BinnedSet, TransformError> {
    if !(fraction > 0.0 && fraction <= 0.5) {
        return Err(TransformError::BadFraction(fraction));
    }
    let mut picked = Vec::new();
    let mut skipped_users = Vec::new();
    match mode {
        BinningMode::Uniq => {
            if xs.len() < 4 {
                return Err(TransformError::PoolTooSmall(xs.len()));
            }
            let mut pool: Vec<_> = xs.instances().iter().map(|i| i.target).enumerate().collect();
            picked = bin_pool(&mut pool, fraction);
        }
        BinningMode::Pers => {
            for (user, idx) in xs.indices_by_user() {
                if idx.len() < 4 {
                    skipped_users.push(user);
                    continue;
                }
                let mut pool: Vec<_> = idx.iter().map(|&i| (i, xs.get(i).target)).collect();
                picked.extend(bin_pool(&mut pool, fraction));
            }
        }
    }
    picked.sort_by_key(|p| p.0);
    Ok(BinnedSet {
        retained: picked.iter().map(|p| p.0).collect(),
        labels: picked.iter().map(|p| p.1).collect(),
        mode,
        fraction,
        skipped_users,
    })
}
