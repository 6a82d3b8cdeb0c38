use thiserror::Error;

/// Errors raised by the learning, control and simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate demonstration: {0}")]
    DegenerateDemo(String),

    #[error("inverse of the diffeomorphism did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("apparent inertia could not be stabilized: {0}")]
    Singularity(String),

    #[error("simulation unstable at t = {time:.4} s: joint {joint} velocity {velocity:.3} rad/s exceeds bound {bound:.3}")]
    InstabilityAbort {
        time: f64,
        joint: usize,
        velocity: f64,
        bound: f64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
