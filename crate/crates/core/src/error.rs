use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// An exponent or parameter set outside the range a bound is stated for.
    #[error("range violation ({bound}): {detail}")]
    Range { bound: String, detail: String },

    #[error("solver failure after {iterations} iterations (relative residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("CFL violation: cfl = {cfl:.3} exceeds {limit}; suggested dt = {suggested_dt:e}")]
    Cfl {
        cfl: f64,
        limit: f64,
        suggested_dt: f64,
    },

    #[error("constraint residual {residual:e} exceeds tolerance {tolerance:e}")]
    Constraint { residual: f64, tolerance: f64 },

    #[error("configuration error:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("checkpoint format: {0}")]
    Checkpoint(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
