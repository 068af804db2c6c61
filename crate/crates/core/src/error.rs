use thiserror::Error;

/// Errors raised across the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("operator is not hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("action spectrum is not integer (max deviation {deviation:.3e})")]
    InvalidAction { deviation: f64 },

    #[error("band crossing at point {point} between bands {k} and {}: gap {gap:.3e}", k + 1)]
    BandCrossing { point: usize, k: usize, gap: f64 },

    #[error("term function not monotone at point {point}, band {k}: {value:.3e}")]
    Monotonicity { point: usize, k: usize, value: f64 },

    #[error("hermiticity check failed in {what}: imaginary part {value:.3e}")]
    Hermiticity { what: &'static str, value: f64 },

    #[error("numerical consistency: {0}")]
    NumericalConsistency(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("ray from the homotopy center leaves the grid at point {point}")]
    Domain { point: usize },

    #[error("resolution: {0}")]
    Resolution(String),

    #[error("unsupported form: {0}")]
    UnsupportedForm(String),

    #[error("edge contamination: {0}")]
    EdgeContamination(String),

    #[error("band isolation: {0}")]
    BandIsolation(String),

    #[error("unitarity drift {0:.3e}")]
    Unitarity(f64),

    #[error("model schema: {0}")]
    Schema(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn context(self, ctx: impl Into<String>) -> Self {
        Error::Context {
            context: ctx.into(),
            source: Box::new(self),
        }
    }
}
