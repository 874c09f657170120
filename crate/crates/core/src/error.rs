use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error(
        "matrix is not symmetric: entry ({row}, {col}) = {upper} but ({col}, {row}) = {lower}"
    )]
    NotSymmetric {
        row: usize,
        col: usize,
        upper: f64,
        lower: f64,
    },

    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("Jacobi eigensolver did not converge within {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("matrix is singular to working precision")]
    Singular,

    #[error("field magnitude {magnitude} exceeds the quadrature limit {limit}")]
    FieldTooLarge { magnitude: f64, limit: f64 },

    #[error("no default single-spin LSI constant is available for spin dimension {0}; pass gamma explicitly")]
    NoDefaultGamma(usize),

    #[error("spectral condition violated: eigenvalue #{index} = {eigenvalue} is outside (0, {c})")]
    SpectralCondition {
        index: usize,
        eigenvalue: f64,
        c: f64,
    },

    #[error("trace too short: length {len}, need at least {required} (100 x tau = {tau:.3})")]
    TraceTooShort {
        len: usize,
        required: usize,
        tau: f64,
    },

    #[error("trace has zero variance; autocorrelation time is undefined")]
    ZeroVariance,

    #[error("system too large: N = {n}, at most {max} supported here")]
    SystemTooLarge { n: usize, max: usize },

    #[error("state probability underflow at state {state}")]
    ProbabilityUnderflow { state: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
