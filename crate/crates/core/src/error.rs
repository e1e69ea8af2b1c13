use thiserror::Error;

use crate::geometry::{Configuration, Segment};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("resolution too small: {got} nodes on axis {axis}, need at least {min}")]
    ResolutionTooSmall { axis: usize, got: usize, min: usize },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("inconsistent boundary partition: {0}")]
    InconsistentPartition(String),

    #[error("ghost values are not closed (need {needed} layer(s), have {have})")]
    Unclosed { needed: u8, have: u8 },

    #[error("fields live on different meshes")]
    MeshMismatch,

    #[error("segment {0:?} is not part of this mesh")]
    SegmentNotInMesh(Segment),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("linear solve failed: zero pivot at row {row}")]
    SingularMatrix { row: usize },

    #[error("inverse iteration did not converge after {iterations} iterations (relative change {change:.3e})")]
    EigenNonConvergence { iterations: usize, change: f64 },

    #[error("Picard iteration did not converge at t = {time}: residual {residual:.3e} after {iterations} iterations")]
    PicardNonConvergence {
        time: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("non-finite state at t = {time}")]
    NonFinite { time: f64 },

    #[error("window [{start}, {end}] is not covered by the record [{first}, {last}]")]
    WindowOutsideRecord {
        start: f64,
        end: f64,
        first: f64,
        last: f64,
    },

    #[error("operation requires {expected:?}, got {got:?}")]
    WrongConfiguration {
        expected: Configuration,
        got: Configuration,
    },

    #[error("records do not share a configuration: {0}")]
    RecordMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
