use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// The measure has zero (or no) total weight.
    #[error("degenerate measure: {0}")]
    DegenerateMeasure(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// The requested bound family does not apply to these parameters.
    #[error("not applicable: {0}")]
    NotApplicable(String),

    /// A closed-form denominator vanished.
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    /// The selected columns of the moment matrix are singular.
    #[error("singular index set {0:?}")]
    DegenerateIndexSet(Vec<usize>),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn is_not_applicable(&self) -> bool {
        matches!(self, Error::NotApplicable(_))
    }
}

pub(crate) fn arg(msg: impl Into<String>) -> Error {
    Error::Argument(msg.into())
}

pub(crate) fn not_applicable(msg: impl Into<String>) -> Error {
    Error::NotApplicable(msg.into())
}
