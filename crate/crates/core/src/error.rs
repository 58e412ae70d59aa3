use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("density undefined: {0}")]
    DensityUndefined(String),

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("delta not in space: alpha = {alpha} <= d/q = {threshold}")]
    DeltaNotInSpace { alpha: f64, threshold: f64 },

    #[error("mu not in H^-alpha: {0}")]
    NotInSpace(String),

    #[error("quadrature overflow at t = {t:e}")]
    QuadratureOverflow { t: f64 },

    #[error("insufficient sample: {got} draws, need at least {need}")]
    InsufficientSample { got: usize, need: usize },

    #[error("degenerate zero values")]
    DegenerateZero,

    #[error("degenerate abscissae: {0}")]
    DegenerateAbscissae(String),

    #[error("log of nonpositive value {value} at index {index}")]
    LogOfNonpositive { index: usize, value: f64 },

    #[error("replica with seed {seed} failed: {source}")]
    Replica {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
