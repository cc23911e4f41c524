use thiserror::Error;

/// Errors raised across the reserving pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("ragged input: {0}")]
    RaggedInput(String),

    #[error("cumulative amounts decrease (negative increments) at {cells:?}")]
    NonMonotone { cells: Vec<(usize, usize)> },

    #[error("non-finite value at cell ({0}, {1})")]
    NonFinite(usize, usize),

    #[error("invalid eta {0}: must lie in [0, 1]")]
    InvalidEta(f64),

    #[error("zero exposure at cells {cells:?}")]
    ZeroExposure { cells: Vec<(usize, usize)> },

    #[error("development column {0} has no observed cells")]
    EmptyColumn(usize),

    #[error("zero denominator for development period {0}")]
    ZeroDenominator(usize),

    #[error("structure {structure} needs m >= {required}, triangle has m = {m}")]
    TooSmall {
        structure: String,
        required: usize,
        m: usize,
    },

    #[error("model is not identifiable: {0}")]
    NotIdentifiable(String),

    #[error("IRLS did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error(
        "degenerate hazard {mu} (cell {cell:?}) with eta {eta}: development factor has a pole"
    )]
    DegenerateHazard {
        cell: Option<(usize, usize)>,
        mu: f64,
        eta: f64,
    },

    #[error("invalid development factor {0}: must be positive")]
    InvalidFactor(f64),

    #[error("missing forecast: {0}")]
    MissingForecast(String),

    #[error("series too short: need at least {required} values, got {got}")]
    SeriesTooShort { required: usize, got: usize },

    #[error("series contains non-finite values")]
    NonFiniteSeries,

    #[error("saturated model: K = {k} observations, nu = {nu} parameters")]
    SaturatedModel { k: usize, nu: usize },

    #[error("non-positive fitted value at cell ({0}, {1})")]
    NonPositiveFitted(usize, usize),

    #[error("cannot hold out {requested} diagonals from a triangle with m = {m}")]
    TooFewDiagonals { requested: usize, m: usize },

    #[error("error incidence denominator is zero")]
    ZeroIncidenceDenominator,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Stable machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::RaggedInput(_) => "ragged_input",
            Error::NonMonotone { .. } => "non_monotone",
            Error::NonFinite(..) => "non_finite",
            Error::InvalidEta(_) => "invalid_eta",
            Error::ZeroExposure { .. } => "zero_exposure",
            Error::EmptyColumn(_) => "empty_column",
            Error::ZeroDenominator(_) => "zero_denominator",
            Error::TooSmall { .. } => "too_small",
            Error::NotIdentifiable(_) => "not_identifiable",
            Error::NoConvergence { .. } => "no_convergence",
            Error::DegenerateHazard { .. } => "degenerate_hazard",
            Error::InvalidFactor(_) => "invalid_factor",
            Error::MissingForecast(_) => "missing_forecast",
            Error::SeriesTooShort { .. } => "series_too_short",
            Error::NonFiniteSeries => "non_finite_series",
            Error::SaturatedModel { .. } => "saturated_model",
            Error::NonPositiveFitted(..) => "non_positive_fitted",
            Error::TooFewDiagonals { .. } => "too_few_diagonals",
            Error::ZeroIncidenceDenominator => "zero_incidence_denominator",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
