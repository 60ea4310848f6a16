use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid map parameters: {0}")]
    InvalidParams(String),

    #[error("domain escape: x = {x} left I = [{lo}, {hi}] after {steps} steps")]
    DomainEscape {
        x: f64,
        lo: f64,
        hi: f64,
        steps: usize,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("iteration did not converge within {max_iter} steps (last residual {residual:.3e})")]
    NoConvergence { max_iter: usize, residual: f64 },

    #[error("degenerate least-squares fit: {0}")]
    DegenerateFit(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
