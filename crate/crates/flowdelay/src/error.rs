use std::path::PathBuf;

/// Errors surfaced by the library.
///
/// The CLI maps these onto process exit codes: invalid input is 1, numeric
/// failures (non-convergence, loss of significance) are 2, I/O failures are 4.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A series or iteration hit its term budget before meeting its tolerance.
    #[error("{context}: no convergence within {budget} terms")]
    NonConvergence { context: String, budget: usize },

    /// The closed-form bracket lost nearly all significant digits. Callers
    /// should fall back to the direct tail series, which has no cancellation.
    #[error(
        "closed form loses significance at b = {b}, capacity = {capacity}; \
         evaluate the direct tail series instead"
    )]
    CancellationLoss { b: f64, capacity: u64 },

    /// A parameter or sweep specification failed validation. `field` names
    /// the offending input.
    #[error("invalid `{field}`: {reason}")]
    InvalidInput { field: &'static str, reason: String },

    /// A file could not be written or read.
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
