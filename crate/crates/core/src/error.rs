use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("line {line}: {message}")]
    NetFile { line: usize, message: String },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("unknown value `{value}` for variable `{variable}`")]
    UnknownValue { variable: String, value: String },

    #[error("invalid variable `{name}`: {reason}")]
    InvalidVariable { name: String, reason: String },

    #[error("invalid factor `{name}`: {reason}")]
    InvalidFactor { name: String, reason: String },

    #[error("subdomain of `{0}` is not contained in the target domain")]
    SubdomainMismatch(String),

    #[error("missing marginal for variable `{0}`")]
    MissingMarginal(String),

    #[error("incoherent model: entry {value} is negative after subtraction")]
    NegativeEntry { value: f64 },

    #[error("zero-mass evidence")]
    ZeroMass,

    #[error("model error: {0}")]
    Model(String),

    #[error("cycle through variable `{0}`")]
    Cycle(String),

    #[error("invalid partition tree: {0}")]
    Partition(String),

    #[error("invalid query: {0}")]
    Query(String),

    #[error("expression exceeds {limit} nodes during rewriting")]
    ExpressionTooLarge { limit: usize },

    #[error("missing result for child partition {0}")]
    MissingChildResult(usize),

    #[error("unsupported by the brute-force oracle: {0}")]
    Unsupported(String),
}
