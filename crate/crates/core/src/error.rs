use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A shape, size or argument violates a structural precondition.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("unsupported derivative order {order} (maximum {max})")]
    UnsupportedOrder { order: usize, max: usize },

    #[error("catalog error: {0}")]
    Catalog(String),

    /// A non-finite value showed up where a finite one is required.
    #[error("non-finite {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("frequency {frequency} aliases on a grid of {grid} samples (must be < {limit})", limit = grid / 2)]
    Aliasing { frequency: u32, grid: usize },

    #[error("degenerate problem: closed-form solution has zero amplitude on the evaluation grid")]
    DegenerateProblem,

    #[error("training failed at iteration {iteration}: {source}")]
    Training {
        iteration: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
