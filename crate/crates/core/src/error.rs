use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("non-finite numeric input: {0}")]
    NumericInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("invalid decision set: {0}")]
    DecisionSet(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("system is not sufficiently controllable: {0}")]
    Controllability(String),

    #[error("trajectory diverged at t={t}: |x| = {norm:e}")]
    Divergence { t: usize, norm: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("disturbance provenance mismatch: {0}")]
    Provenance(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{algorithm} (seed {seed}, t={t}): {source}")]
    Run {
        algorithm: String,
        seed: u64,
        t: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by user configuration rather than numerics.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Input(_) | Error::DecisionSet(_) => true,
            Error::Run { source, .. } => source.is_config(),
            _ => false,
        }
    }

    pub(crate) fn in_run(self, algorithm: &str, seed: u64, t: usize) -> Self {
        match self {
            e @ Error::Run { .. } => e,
            e => Error::Run {
                algorithm: algorithm.to_string(),
                seed,
                t,
                source: Box::new(e),
            },
        }
    }
}
