use thiserror::Error;

/// Errors raised by the weighted-space numerics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvoqError {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("signals cannot be paired: {0}")]
    Pairing(String),
    #[error("unsupported grid: {0}")]
    UnsupportedGrid(String),
    #[error("time {t} lies outside the grid [{t_min}, {t_max}]")]
    OutOfRange { t: f64, t_min: f64, t_max: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("operator is not invertible: {0}")]
    NotInvertible(String),
    #[error("spectral symbol produced non-finite entries at xi = {xi}")]
    Symbol { xi: f64 },
    #[error("material law has a pole at z = {re} + {im}i")]
    Pole { re: f64, im: f64 },
    #[error("material law evaluated outside its declared region: Re z = {re} < nu0 = {nu0}")]
    OutsideRegion { re: f64, nu0: f64 },
    #[error("material law is not coercive: c_est = {c_est:.6e} attained at xi = {xi:.6e}")]
    NonCoercive { c_est: f64, xi: f64 },
    #[error("matrix is not skew-selfadjoint: |A + A*| = {value:.3e} at ({row}, {col})")]
    NotSkew { row: usize, col: usize, value: f64 },
    #[error("matrix is not positive definite: {0}")]
    Definiteness(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("time-stepping oracle failure: {0}")]
    Oracle(String),
    #[error("unsupported material law: {0}")]
    UnsupportedLaw(String),
    #[error(
        "dense assembly needs {entries} entries, above the limit of {limit}; \
         use the matrix-free observability estimate instead"
    )]
    SizeGuard { entries: usize, limit: usize },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, EvoqError>;

impl From<std::io::Error> for EvoqError {
    fn from(err: std::io::Error) -> Self {
        EvoqError::Io(err.to_string())
    }
}
