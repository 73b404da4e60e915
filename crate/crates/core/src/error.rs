use thiserror::Error;

/// Errors produced by the simulation and analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A site or mode index is out of range.
    #[error("index {index} out of range (len {len})")]
    Index { index: usize, len: usize },

    /// Operand dimensions do not agree.
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    /// The requested object exceeds a configured size cap.
    #[error("resource limit: {0}")]
    Resource(String),

    /// The Hamiltonian has not been diagonalized yet.
    #[error("eigensystem not available; call eigendecompose first")]
    MissingEigensystem,

    /// The Liouvillian eigenvectors failed the biorthonormality check.
    #[error("defective spectrum: biorthonormality residual {residual:e} exceeds {limit:e}")]
    DefectiveSpectrum { residual: f64, limit: f64 },

    /// The zero eigenvalue has more than one eigenmode.
    #[error("steady state is not unique: {multiplicity} modes with Re(lambda) above {threshold:e}")]
    DegenerateSteadyState { multiplicity: usize, threshold: f64 },

    /// The adaptive integrator could not make progress.
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    /// A dense factorization failed to converge.
    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    /// Other numerical failures (nonpositive distances, bad fits, ...).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Invalid ordering of the two initial states passed to crossing detection.
    #[error("initial ordering violated: D_cold(0) = {cold:e} is not above D_hot(0) = {hot:e}")]
    InitialOrdering { cold: f64, hot: f64 },

    /// Configuration text could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Configuration values failed validation; every violation is listed.
    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
