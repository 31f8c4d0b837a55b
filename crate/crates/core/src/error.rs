use thiserror::Error;

/// Errors produced by the solver, the generators and instance I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Instance data violates a structural invariant.
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    /// A constant latency family reached an operation that needs a strictly
    /// increasing marginal.
    #[error("constant latency families are not supported by this operation")]
    ConstantFamily,

    /// The active set handed to a restricted solve is empty.
    #[error("active set is empty")]
    EmptySet,

    /// No resource is available to carry the demand.
    #[error("infeasible: no available resource can carry the demand")]
    Infeasible,

    /// Exhaustive enumeration was requested above its size guard.
    #[error("brute force is limited to q <= {limit}, got q = {q}")]
    TooLarge { q: usize, limit: usize },

    /// The instance generator could not satisfy its constraints.
    #[error("generator: {0}")]
    Generator(String),

    /// Malformed instance file.
    #[error("line {line}: parse error: {message}")]
    Parse { line: usize, message: String },

    /// Well-formed instance file whose data is not a valid instance.
    #[error("line {line}: invalid data: {message}")]
    Validation { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
