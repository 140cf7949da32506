//! Experiment pipelines, their configuration and report emission.

mod config;
mod eval;
mod p1;
mod p2;
mod p3;
mod report;

use std::path::PathBuf;

use thiserror::Error;

use crate::corpus::{CorpusError, Dataset};
use crate::learners::LearnerError;
use crate::protocol::ProtocolError;
use crate::scoring::ScoringError;
use crate::transform::TransformError;

pub use config::{Experiment, ExperimentConfig, NormVariant};
pub use p1::run_p1;
pub use p2::run_p2;
pub use p3::{run_p3_classification, run_p3_regression};
pub use report::{
    emit_report, parse_report, Provenance, ReportFormat, ReportRow, ReportTable, REPORT_COLUMNS,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] CorpusError),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("harness invariant violated: {0}")]
    Harness(String),
}

/// Runs the experiment named in `cfg`.
pub fn run_experiment(ds: &Dataset, cfg: &ExperimentConfig) -> Result<ReportTable, BenchError> {
    match cfg.experiment()? {
        Experiment::P1 => run_p1(ds, cfg),
        Experiment::P2 => run_p2(ds, cfg),
        Experiment::P3R => run_p3_regression(ds, cfg),
        Experiment::P3C => run_p3_classification(ds, cfg),
    }
}
