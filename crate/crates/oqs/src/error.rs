use thiserror::Error;

/// Errors raised by the library. Each variant names the failing condition,
/// the CLI maps `is_validation()` to exit code 2 and everything else to 3.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum OqsError {
    #[error("all polynomial coefficients vanish")]
    ZeroPolynomial,
    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },
    #[error("singular Jacobian at ({x}, {y})")]
    SingularJacobian { x: f64, y: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no pole found in the search box")]
    EmptyBox,
    #[error("pole tracking lost at alpha0 = {alpha0}")]
    TrackingLost { alpha0: f64 },
    #[error("operation requires a {expected} pole, got {found}")]
    WrongKind { expected: &'static str, found: String },
    #[error("degenerate lead coupling: {0}")]
    DegenerateCoupling(String),
    #[error("degenerate spectrum: eigenvalues {0} and {1} coincide (exceptional point?)")]
    DegenerateSpectrum(String, String),
    #[error("continued fraction denominator vanished at depth {0}")]
    SingularTruncation(usize),
    #[error("grid spacing {a} does not divide half-width {ell}")]
    BadGrid { a: f64, ell: f64 },
    #[error("lambda = {0} coincides with an eigenvalue")]
    PoleHit(String),
    #[error("light cone reaches the chain end: need more than {required} lead sites, have {available}")]
    LightConeViolation { required: usize, available: usize },
    #[error("only {found} envelope peaks, {required} required")]
    TooFewPeaks { found: usize, required: usize },
    #[error("envelope is not a power law (log-log curvature {curvature:.3e})")]
    NotPowerLaw { curvature: f64 },
}

impl OqsError {
    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            OqsError::Domain(_)
                | OqsError::InvalidInput(_)
                | OqsError::BadGrid { .. }
                | OqsError::WrongKind { .. }
                | OqsError::LightConeViolation { .. }
                | OqsError::ZeroPolynomial
        )
    }
}

pub type Result<T> = std::result::Result<T, OqsError>;
