use thiserror::Error;

/// Errors raised across the explainer pipeline.
#[derive(Debug, Error)]
pub enum GistError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("index {index} out of range 1..={len}")]
    Index { index: usize, len: usize },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("no graph in the pool is classified differently from the input (class {class})")]
    NoCounterfactualPool { class: usize },

    #[error("malformed dataset JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid edge list in graph {graph}: {reason}")]
    EdgeList { graph: usize, reason: String },

    #[error("label {label} of graph {graph} is outside 0..{num_classes}")]
    Label {
        graph: usize,
        label: usize,
        num_classes: usize,
    },

    #[error("checkpoint rejected: {0}")]
    Checkpoint(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, GistError>;
