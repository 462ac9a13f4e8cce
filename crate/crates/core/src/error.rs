use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid predicate-constraint: {0}")]
    Constraint(String),

    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("semantic error: {0}")]
    Semantic(String),

    #[error("predicate-constraints `{0}` and `{1}` are not disjoint")]
    NotDisjoint(String, String),

    #[error("line {line}: {message}")]
    Ingest { line: u64, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("join graph: {0}")]
    Join(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }

    pub(crate) fn constraint(msg: impl Into<String>) -> Self {
        Error::Constraint(msg.into())
    }
}
