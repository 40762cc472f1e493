use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dictionary line {line}: {msg}")]
    Dictionary { line: usize, msg: String },

    #[error("category not found: {0}")]
    CategoryNotFound(String),

    #[error("embedding file line {line}: {msg}")]
    EmbeddingFile { line: usize, msg: String },

    #[error("missing layer {layer} for {post}")]
    MissingLayer { post: String, layer: u8 },

    #[error("empty user")]
    EmptyUser,

    #[error("user has {got} posts, limit is {limit}")]
    TooManyPosts { got: usize, limit: usize },

    #[error("node cap {cap} cannot hold {posts} posts and {cats} categories")]
    NodeCapTooSmall { cap: usize, posts: usize, cats: usize },

    #[error("shape mismatch in {context}: {detail}")]
    Shape { context: String, detail: String },

    #[error("edge ({a}, {b}) out of range for {rows_a}x{rows_b}")]
    EdgeOutOfRange {
        a: usize,
        b: usize,
        rows_a: usize,
        rows_b: usize,
    },

    #[error("loss node must be 1x1, got {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },

    #[error("non-finite loss: {0}")]
    NonFiniteLoss(f64),

    #[error("degenerate step")]
    DegenerateStep,

    #[error("unknown parameter: {0}")]
    UnknownParam(String),

    #[error("gradient shape mismatch for parameter {name}: expected {expected:?}, got {got:?}")]
    GradShape {
        name: String,
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("dataset line {line}: {msg}")]
    Dataset { line: usize, msg: String },

    #[error("checkpoint line {line}: {msg}")]
    Checkpoint { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
