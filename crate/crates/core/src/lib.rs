//! Leakage-aware evaluation harness for longitudinal per-user mood prediction.
//!
//! The crate is organised along the data flow of an experiment:
//!
//! - [`corpus`]: per-day feature tables, self-reports, synthetic panel
//!   generation and window aggregation into [`corpus::Instance`]s.
//! - [`transform`]: target-series preprocessing, feature normalisation and
//!   top/bottom label binning.
//! - [`protocol`]: LOUOCV / LOIOCV / MIXED split generation and leakage
//!   auditing of any split.
//! - [`learners`]: naive baselines, bias probes and from-scratch models
//!   (ridge linear regression with forward selection, RBF SVM trained by SMO,
//!   RBF kernel ridge regression, nested grid search).
//! - [`scoring`]: evaluation metrics, including per-user grouped R².
//! - [`bench`]: the P1/P2/P3 experiment pipelines, configuration and report
//!   emission.

pub mod bench;
pub mod corpus;
pub mod learners;
pub mod protocol;
pub mod scoring;
pub mod seed;
pub mod transform;

pub use corpus::{Dataset, Instance, InstanceSet, UserId};
pub use protocol::{Protocol, Split};
