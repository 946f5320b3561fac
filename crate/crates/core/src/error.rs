use thiserror::Error;

pub type Result<T> = std::result::Result<T, FracError>;

#[derive(Debug, Error)]
pub enum FracError {
    /// Shapes or grids that do not line up.
    #[error("structural error: {0}")]
    Structural(String),
    /// An invalid or incompatible configuration choice.
    #[error("configuration error: {0}")]
    Config(String),
    /// Argument outside the mathematical domain of a function (e.g. a Gamma pole).
    #[error("domain error: {0}")]
    Domain(String),
    /// Argument inside the domain but outside what this implementation evaluates accurately.
    #[error("range error: {0}")]
    Range(String),
    #[error("density evaluation failed at x = {coords:?}: {message}")]
    Evaluation { coords: Vec<f64>, message: String },
    /// Linear solve or recurrence broke down.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
