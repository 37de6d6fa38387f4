use thiserror::Error;

/// Crate-wide error type. `is_numerical` separates data/validation problems
/// (bad input, wrong dimensions, domain violations) from failures of the
/// numerical machinery itself (non-convergence, factorization breakdown).
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("metric matrix is not symmetric at sample point (max asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("metric matrix is not positive definite at sample point")]
    NotPositiveDefinite,

    #[error("wind field is not h-unit: |W|_h deviates by {deviation:.3e} (tolerance {tolerance:.1e})")]
    NotUnitWind { deviation: f64, tolerance: f64 },

    #[error("wind field fails the Killing criterion: residual {residual:.3e} exceeds {tolerance:.1e}")]
    NotKilling { residual: f64, tolerance: f64 },

    #[error("covector field beta vanishes at a sample point (|b|^2 = {b_squared:.3e})")]
    DegenerateBeta { b_squared: f64 },

    #[error("kappa is inconsistent with beta: |kappa - log(4/b^2)| = {deviation:.3e}")]
    KappaMismatch { deviation: f64 },

    #[error("tangent {what} is outside the conic admissible domain (h(y,W) = {beta:.3e})")]
    InadmissibleTangent { what: &'static str, beta: f64 },

    #[error("direction too close to the excluded direction -W (|v+W|_h = {norm:.3e})")]
    ExcludedDirection { norm: f64 },

    #[error("zero vector supplied where a direction is required")]
    ZeroDirection,

    #[error("{context}: {message}")]
    InvalidInput { context: &'static str, message: String },

    #[error("parse error at byte {offset}: {kind}")]
    Parse { kind: ParseErrorKind, offset: usize },

    #[error("evaluation domain error: {op} of {value:.6e}")]
    Domain { op: &'static str, value: f64 },

    #[error("unknown variable or constant `{name}`")]
    UnknownSymbol { name: String },

    #[error("space document invalid: {0}")]
    Document(String),

    #[error("operation requires a model space, got a generic space")]
    NotModelSpace,

    #[error("two-point geodesic shooting failed to converge (residual {residual:.3e})")]
    ShootingFailed { residual: f64 },

    #[error("numerical failure in {context}: {message}")]
    Numerical { context: &'static str, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character `{0}`")]
    UnexpectedChar(char),
    #[error("unbalanced parenthesis")]
    UnbalancedParenthesis,
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("expected `{0}`")]
    Expected(String),
    #[error("malformed number literal `{0}`")]
    BadNumber(String),
    #[error("trailing input starting at `{0}`")]
    TrailingInput(String),
}

impl Error {
    /// True for failures of numerical procedures, false for input/validation errors.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical { .. } | Error::ShootingFailed { .. } | Error::NotPositiveDefinite
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
