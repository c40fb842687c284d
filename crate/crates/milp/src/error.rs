use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),
    #[error("`{0}` is not a valid LP-file identifier")]
    InvalidName(String),
    #[error("variable `{0}` has lower bound above upper bound")]
    InvertedBounds(String),
    #[error("binary variable `{0}` must have bounds inside [0, 1]")]
    BinaryBounds(String),
    #[error("term references undeclared variable #{0}")]
    UnknownVariable(usize),
    #[error("malformed model: {0}")]
    Malformed(String),
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("backend `{0}` is not available in this build")]
    BackendUnavailable(String),
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("model has {found} binaries; the reference solver accepts at most {limit}")]
    TooManyBinaries { found: usize, limit: usize },
    #[error("solution violates `{item}` by {amount:e}")]
    Verification { item: String, amount: f64 },
    #[error("invalid solve parameters: {0}")]
    Params(String),
}

#[derive(Debug, Error)]
pub enum LpParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}
