use thiserror::Error;

/// Errors produced by the estimation library.
#[derive(Debug, Error)]
pub enum Error {
    /// A multi-index touches an axis outside the admissible range.
    #[error("axis {axis} out of range (limit {limit})")]
    AxisOutOfRange { axis: usize, limit: usize },

    /// An enumeration would produce more elements than the configured cap.
    #[error("enumeration of {what} exceeds cap of {cap} elements")]
    EnumerationCap { what: &'static str, cap: usize },

    /// The inverse smoothness index is infinite where a finite one is required.
    #[error("smoothness map has infinite inverse smoothness index")]
    InfiniteAlpha,

    /// Invalid parameters for a smoothness map or weight rule.
    #[error("invalid smoothness map: {0}")]
    InvalidMap(String),

    /// Shapes of two inputs do not agree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An input set was empty where at least one element is required.
    #[error("empty input: {0}")]
    Empty(&'static str),

    /// A potential or objective evaluated to a non-finite value.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Training objective blew up beyond the divergence threshold.
    #[error("training diverged at step {step}: objective {objective} vs initial {initial}")]
    Diverged {
        step: usize,
        objective: f64,
        initial: f64,
    },

    /// Random code generation could not satisfy the Hamming constraint.
    #[error("could not draw {wanted} codes with min Hamming distance {min_distance} in {tries} tries")]
    CodeGeneration {
        wanted: usize,
        min_distance: usize,
        tries: usize,
    },

    /// A coefficient left [0, 1] after the affine calibration map.
    #[error("coefficient ({row}, {col}) = {value} outside [0, 1]; recalibrate c1/c2")]
    Calibration { row: usize, col: usize, value: f64 },

    /// Invalid argument not covered by a more specific variant.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A serialized model could not be used.
    #[error("model format: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_) | Error::Diverged { .. } | Error::CodeGeneration { .. }
        )
    }
}
