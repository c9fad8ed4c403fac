use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid needs an even node count of at least 8, got {0}")]
    InvalidGrid(usize),

    #[error("field has {got} samples but the grid has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("alpha = {0} lies outside [0, 2]; set the override flag to allow it")]
    AlphaOutOfRange(f64),

    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    #[error("wavenumber 0 has no dispersion relation (evolved fields are zero-mean)")]
    ZeroWavenumber,

    #[error("model `{model}` cannot evaluate {what}")]
    WrongModel { model: &'static str, what: &'static str },

    #[error("the general form is not defined at alpha = 0; use the alpha0 model")]
    GeneralAtAlphaZero,

    #[error("invariant violated at t = {time}: {detail}")]
    InvariantViolation { time: f64, detail: String },

    #[error("unknown preset `{0}` (expected fig_alpha0, fig_alpha1 or fig_alpha2)")]
    UnknownPreset(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
