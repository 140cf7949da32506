//! Target-series preprocessing, feature normalisation and label binning.

mod binning;
mod normalize;
mod series;

use thiserror::Error;

use crate::corpus::UserId;

pub use binning::{bin_top_bottom, BinnedSet, BinningMode};
pub use normalize::{per_user_zscore, train_fitted_zscore, ZScaler};
pub use series::{binarize_one_std, moving_average_filter, weekday_detrend, LabeledSeries};

#[derive(Debug, Error, PartialEq)]
pub enum TransformError {
    #[error("series of user {0} is empty")]
    EmptySeries(UserId),
    #[error("series of user {user} needs ≥ {needed} points, has {len}")]
    SeriesTooShort { user: UserId, needed: usize, len: usize },
    #[error("days of user {0} are not strictly increasing")]
    NotIncreasing(UserId),
    #[error("user {0} has a single instance; per-user statistics need ≥ 2")]
    SingleInstanceUser(UserId),
    #[error("cannot fit normalisation on an empty training set")]
    EmptyTrain,
    #[error("binning pool has {0} instances, needs ≥ 4")]
    PoolTooSmall(usize),
    #[error("fraction {0} must lie in (0, 0.5]")]
    BadFraction(f64),
}
