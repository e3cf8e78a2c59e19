use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    #[error("pole at {0}")]
    Pole(String),

    #[error("contour cannot separate pole families: {0}")]
    ContourSeparation(String),

    #[error("{what} did not converge (achieved error {achieved:.3e})")]
    NonConvergence { what: String, achieved: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn non_convergence(what: impl Into<String>, achieved: f64) -> Self {
        Error::NonConvergence { what: what.into(), achieved }
    }
}
