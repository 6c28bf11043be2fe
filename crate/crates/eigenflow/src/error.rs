//! Error taxonomy shared by all modules.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by mesh construction, solvers, and the flow driver.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The mesh violates a structural invariant (open edge, degenerate face,
    /// inconsistent orientation, disconnected component).
    #[error("structural mesh error: {0}")]
    Structural(String),

    /// An operation requiring strict convexity met a non-positive curvature.
    #[error("convexity violation: {0}")]
    Convexity(String),

    /// An iterative solver or time step failed to produce a usable result.
    #[error("numerical failure in {context}: residual {residual:.3e} after {iterations} iterations")]
    Numerical {
        context: String,
        residual: f64,
        iterations: usize,
    },

    /// Caller-supplied data is outside an operation's domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A time argument lies outside the interval where a closed form exists.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A file (mesh, table, trace, config) could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Process exit code for the CLI: 2 for input problems, 3 for numerics.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical { .. } => 3,
            _ => 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(Error::Structural("x".into()).exit_code(), 2);
        assert_eq!(Error::InvalidInput("x".into()).exit_code(), 2);
        assert_eq!(
            Error::Numerical {
                context: "solver".into(),
                residual: 1.0,
                iterations: 5
            }
            .exit_code(),
            3
        );
    }
}
