//! Localization and place-recognition metrics over query results plus
//! ground-truth poses, and machine-readable report emission.

mod metrics;
mod plot;
mod pose;
mod report;

pub use metrics::{
    precision_buckets, recall_at_n, top1_recall_at_d, PrecisionBuckets, RankedQuery,
    BUCKET_THRESHOLDS,
};
pub use plot::render_line_plot;
pub use pose::{pose_error, PoseError};
pub use report::{
    default_top1_thresholds, emit_report, read_report, EvalReport, RecallAtD, RecallAtN,
    ReportMeta,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("quaternion norm {norm} is not unit")]
    NonUnitQuaternion { norm: f64 },
    #[error("empty query set")]
    EmptyQuerySet,
    #[error("invalid report: {0}")]
    InvalidReport(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
}

#[cfg(test)]
mod tests;
