use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration document is missing a key or holds an unusable value.
    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// An argument to an operation violates its precondition.
    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: &'static str, reason: String },

    /// The probe is too close to an optical resonance for the dispersive model.
    #[error(
        "detuning {detuning_hz:.6e} Hz is within {distance_hz:.3e} Hz of the F'={level} resonance (guard {guard_hz:.3e} Hz)"
    )]
    NearResonance {
        detuning_hz: f64,
        level: u8,
        distance_hz: f64,
        guard_hz: f64,
    },

    #[error("not enough usable data points: need {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate fit: {0}")]
    Degenerate(String),

    #[error("unphysical fit result: {0}")]
    Unphysical(String),

    #[error("fit result has no parameter `{0}`")]
    MissingParameter(String),

    #[error("malformed CSV at row {row}: {reason}")]
    Csv { row: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            field,
            reason: reason.into(),
        }
    }
}
