use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // --- validation ---
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {diff:e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },
    #[error("matrix has order zero")]
    EmptyMatrix,
    #[error("non-finite entry at ({i}, {j})")]
    NonFinite { i: usize, j: usize },
    #[error("negative edge weight {weight} between {i} and {j}")]
    NegativeWeight { i: usize, j: usize, weight: f64 },
    #[error("nonzero diagonal entry {value} at vertex {i}")]
    NonzeroDiagonal { i: usize, value: f64 },
    #[error("vertex importance q[{i}] = {value} is not positive")]
    NonPositiveImportance { i: usize, value: f64 },
    #[error("vertex index {index} out of range for a graph of {n} vertices")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("vertex {0} appears more than once in the sampling set")]
    DuplicateIndex(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("graph must have at least 2 vertices, got {0}")]
    BadSize(usize),
    #[error("budget k = {k} outside [1, {n}]")]
    BadBudget { k: usize, n: usize },
    #[error("inclusion probability {0} outside (0, 1]")]
    BadProbability(f64),
    #[error("correlation range r = {0} must be positive")]
    DegenerateRange(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("signal batch is empty")]
    EmptyBatch,
    #[error("sampling set is empty")]
    EmptySamplingSet,
    #[error("vertex {0} is already in the sampling set")]
    AlreadySelected(usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),

    // --- numerical ---
    #[error("matrix is not positive semi-definite (smallest eigenvalue {min_eig:e}, largest {max_eig:e})")]
    NotPSD { min_eig: f64, max_eig: f64 },
    #[error("matrix is not positive definite")]
    NotPD,
    #[error("L + (1/N) 11^T is not positive definite")]
    SingularShiftedL,
    #[error("graph operator is singular and the shift fallback is disabled")]
    SingularOperator,
    #[error("graph has no vertex importances")]
    MissingImportance,
    #[error("vertex {0} has no incident edges")]
    IsolatedVertex(usize),
    #[error("first sweep increased the objective from {before} to {after}")]
    NoProgress { before: f64, after: f64 },
    #[error("objective unbounded below: signals at vertices {i} and {j} are identical")]
    DegenerateCovariance { i: usize, j: usize },
    #[error("linear solve failed: {0}")]
    SolveFailure(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// True for failures of the numerics rather than of the inputs' shape or range.
    pub fn is_numerical(&self) -> bool {
        if let Error::Context { source, .. } = self {
            return source.is_numerical();
        }
        matches!(
            self,
            Error::NotPSD { .. }
                | Error::NotPD
                | Error::SingularShiftedL
                | Error::SingularOperator
                | Error::MissingImportance
                | Error::IsolatedVertex(_)
                | Error::NoProgress { .. }
                | Error::DegenerateCovariance { .. }
                | Error::SolveFailure(_)
        )
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
