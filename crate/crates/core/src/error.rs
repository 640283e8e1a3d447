use thiserror::Error;

/// Errors raised by the spectral and number-theoretic routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("{name} = {value} is outside the admissible range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: String,
    },

    #[error("tolerance must be positive, got {0}")]
    NonPositiveTolerance(f64),

    #[error("pieces do not cover [{x0}, {x1}]")]
    NotCovering { x0: f64, x1: f64 },

    #[error("energy {energy} is not inside a spectral gap (k^2 - 4 = {excess})")]
    NotInGap { energy: f64, excess: f64 },

    #[error("band edge scan failed: {0}")]
    ScanExhausted(String),

    #[error("quadrature failed to converge: {0}")]
    Quadrature(String),

    #[error("root grid too coarse: roots {0} and {1} are closer than two grid cells")]
    GridTooCoarse(f64, f64),

    #[error("analytic f_E = {analytic} disagrees with central difference {numeric} (rel. error {rel})")]
    DerivativeMismatch { analytic: f64, numeric: f64, rel: f64 },

    #[error("transform ({0}, {1}, {2}, {3}) is not unimodular")]
    NotUnimodular(i64, i64, i64, i64),

    #[error("invalid quadratic form: {0}")]
    InvalidQuadratic(String),

    #[error("floating-point input only supports {available} continued fraction terms")]
    PrecisionExhausted { available: usize },

    #[error("oracle count did not stabilise: {0}")]
    OracleIndeterminate(String),

    #[error("bracket failure: {0}")]
    Bracket(String),

    #[error("Evans count {evans} outside the bounds [{lower}, {upper}] for gap {gap}")]
    CountOutsideBounds {
        gap: usize,
        evans: usize,
        lower: i64,
        upper: i64,
        /// JSON dump of the Evans scan and the defect resolvent set.
        dump: String,
    },

    #[error("json: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
