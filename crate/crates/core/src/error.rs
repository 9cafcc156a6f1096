use thiserror::Error;

/// Errors raised while building problems, shooting, solving for the wave
/// speed, or reconstructing a profile.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("diffusion coefficient is not positive: d({at}) = {value}")]
    NonPositiveDiffusion { at: f64, value: f64 },

    #[error("reaction violates the bistable sign structure: {0}")]
    SignStructureViolation(String),

    #[error("potential G is not positive at r = {at} (G = {value})")]
    HypothesisGFails { at: f64, value: f64 },

    #[error("quadrature on [{a}, {b}] did not reach tolerance (estimated error {error:e})")]
    QuadratureFailure { a: f64, b: f64, error: f64 },

    #[error("endpoint power-law fit is unusable: {0}")]
    PoorFit(String),

    #[error("step size collapsed below h_min at r = {at} (h = {h:e})")]
    StepSizeCollapse { at: f64, h: f64 },

    #[error("trajectory does not lift off from zero at r = {at} (seed = {seed:e})")]
    NonPositiveStart { at: f64, seed: f64 },

    #[error("trajectory crossed zero at r = {at} before the sign change s0 = {s0}")]
    SpuriousCrossing { at: f64, s0: f64 },

    #[error("G(1) = {0:e} is negative; the bistable hypotheses force G(1) >= 0")]
    NegativeG1(f64),

    #[error("operation requires the travelling-wave branch (G(1) > 0)")]
    NotTravellingWave,

    #[error("no undershooting speed found down to c = {reached} (a-priori cap {cap})")]
    BracketExhausted { reached: f64, cap: f64 },

    #[error("bisection did not converge: {0}")]
    NonConvergent(String),

    #[error("phase-plane profile is not positive at r = {at} (y = {value:e})")]
    ProfileNotPositive { at: f64, value: f64 },

    #[error("endpoint integral diverges on a side classified as finite ({side})")]
    SingularQuadratureFailure { side: &'static str },

    #[error("asymptotic exponents are unavailable")]
    ExponentUnavailable,

    #[error("table error: {0}")]
    Table(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
