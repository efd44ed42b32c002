use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid value for `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),

    #[error("unknown direction `{0}` (expected DL or UL)")]
    UnknownDirection(String),

    #[error(
        "{available} uplink subcarriers cannot carry orthogonal pilots for {users} users \
         with {taps} taps (need at least {required})"
    )]
    InsufficientPilotSubcarriers {
        available: usize,
        required: usize,
        users: usize,
        taps: usize,
    },

    #[error("pilot sequences are not orthogonal (worst deviation {0:e})")]
    PilotsNotOrthogonal(f64),

    #[error("{taps} taps cannot be recovered from {available} subcarriers")]
    Underdetermined { taps: usize, available: usize },

    #[error("{what} is singular")]
    Singular { what: &'static str },

    #[error("{what} is ill-conditioned (condition number {condition:e})")]
    IllConditioned { what: &'static str, condition: f64 },

    #[error("Monte Carlo rate needs at least {min} trials, got {trials}")]
    TooFewTrials { trials: usize, min: usize },

    #[error("no rate supplied for symbol {symbol} ({direction})")]
    MissingRate { symbol: usize, direction: &'static str },

    #[error("scheme {scheme}: {reason}")]
    Incompatible { scheme: String, reason: String },

    #[error("config parse error: {0}")]
    Config(#[from] toml::de::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("plot rendering failed: {0}")]
    Plot(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field: field.to_string(),
        reason: reason.into(),
    }
}
