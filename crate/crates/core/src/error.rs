use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("{op}: axis {axis} out of range for a rank-{rank} tensor")]
    Axis {
        op: &'static str,
        axis: usize,
        rank: usize,
    },

    #[error("{op}: row index {index} out of range for {rows} rows")]
    RowIndex {
        op: &'static str,
        index: usize,
        rows: usize,
    },

    #[error("shape {shape:?} holds {expected} values but {found} were supplied")]
    DataLength {
        shape: Vec<usize>,
        expected: usize,
        found: usize,
    },

    #[error("backward needs a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("variable does not belong to this tape")]
    ForeignVar,

    #[error("target class {target} out of range for {classes} classes")]
    TargetOutOfRange { target: usize, classes: usize },

    #[error("edge {edge} ({src}->{dst}) has an endpoint outside 0..{vertices}")]
    EdgeOutOfRange {
        edge: usize,
        src: usize,
        dst: usize,
        vertices: usize,
    },

    #[error("edge {edge} is a self-loop on vertex {vertex}")]
    SelfLoop { edge: usize, vertex: usize },

    #[error("vertex {vertex} has {found} features, expected {expected}")]
    RaggedVertexFeatures {
        vertex: usize,
        expected: usize,
        found: usize,
    },

    #[error("edge {edge} has {found} features, expected {expected}")]
    RaggedEdgeFeatures {
        edge: usize,
        expected: usize,
        found: usize,
    },

    #[error("{edges} edges but {features} edge feature vectors")]
    EdgeFeatureCount { edges: usize, features: usize },

    #[error("vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("graph has no vertices")]
    EmptyGraph,

    #[error("batch contains no graphs")]
    EmptyBatch,

    #[error("invalid GIG sample: {0}")]
    InvalidSample(String),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}:{line}: {message}", path.display())]
    Dataset {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("parameter `{name}` has shape {found:?}, the network expects {expected:?}")]
    ParamShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("parameter `{0}` is missing")]
    MissingParam(String),

    #[error("parameter `{0}` is not used by this network")]
    UnexpectedParam(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
