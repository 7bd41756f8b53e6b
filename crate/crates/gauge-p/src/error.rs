use thiserror::Error;

/// Errors surfaced by ensemble construction, gauge plumbing, integration and
/// the Fock-basis oracles.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(
        "run aborted: {diverged} of {total} trajectories diverged (threshold {threshold}) at step {step}"
    )]
    DivergenceAbort {
        diverged: usize,
        total: usize,
        threshold: f64,
        step: u64,
    },

    #[error("truncated basis too small: {0}")]
    Truncation(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
