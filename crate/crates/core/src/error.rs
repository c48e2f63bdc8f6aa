use thiserror::Error;

/// Errors raised across the crate. Every variant maps to a stable
/// machine-readable code via [`Error::code`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("adjacency matrix is reducible: {0}")]
    Reducible(String),
    #[error("point window exhausted: flow needs {required} symbols on the {side} side, window holds {available}")]
    WindowExhausted {
        side: &'static str,
        required: usize,
        available: usize,
    },
    #[error("points belong to different models ({0} vs {1})")]
    ModelMismatch(String, String),
    #[error("integrator failed at t = {t}: achieved error estimate {error:e}")]
    Integrator { t: f64, error: f64 },
    #[error("geodesic left the profile domain at r = {0}")]
    OutOfDomain(f64),
    #[error("conjugate point: Jacobi field vanishes at t = {0}")]
    ConjugatePoint(f64),
    #[error("cycle count exceeded cap {cap}; raise the cap to enumerate longer cycles")]
    CycleCap { cap: usize },
    #[error("no periodic orbits with period in ({lo}, {hi}]; widen delta_T")]
    EmptyWindow { lo: f64, hi: f64 },
    #[error("bisection bracket failure on [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },
    #[error("model has no flat loop")]
    NoFlatLoop,
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("shadowing gap too large at junction {junction}: {gap:e} >= delta {delta:e}")]
    GapTooLarge { junction: usize, gap: f64, delta: f64 },
    #[error("nonconvex pressure curve: {0}")]
    NonConvex(String),
    #[error("coding construction failed: {0}")]
    Coding(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable short code used by the command line for single-line error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidModel(_) => "E_MODEL",
            Error::Reducible(_) => "E_REDUCIBLE",
            Error::WindowExhausted { .. } => "E_WINDOW",
            Error::ModelMismatch(..) => "E_MISMATCH",
            Error::Integrator { .. } => "E_INTEGRATOR",
            Error::OutOfDomain(_) => "E_DOMAIN",
            Error::ConjugatePoint(_) => "E_CONJUGATE",
            Error::CycleCap { .. } => "E_CYCLE_CAP",
            Error::EmptyWindow { .. } => "E_EMPTY_WINDOW",
            Error::Bracket { .. } => "E_BRACKET",
            Error::NoFlatLoop => "E_NO_FLAT",
            Error::Precondition(_) => "E_PRECONDITION",
            Error::GapTooLarge { .. } => "E_GAP",
            Error::NonConvex(_) => "E_NONCONVEX",
            Error::Coding(_) => "E_CODING",
            Error::Config(_) => "E_CONFIG",
            Error::UnknownModel(_) => "E_UNKNOWN_MODEL",
            Error::Io(_) => "E_IO",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
