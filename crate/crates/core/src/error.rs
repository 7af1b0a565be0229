use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: `{key}` {constraint}")]
    Config { key: String, constraint: String },

    #[error("input error: {0}")]
    Input(String),

    #[error("{solver} did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    Solver {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("at step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("path {index} (seed {seed:#018x}) failed: {source}")]
    Path {
        index: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, constraint: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            constraint: constraint.into(),
        }
    }

    pub fn at_step(self, step: usize) -> Self {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping step/path context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } | Error::Path { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config { .. } | Error::Input(_) => 2,
            Error::Solver { .. } => 3,
            Error::Invariant(_) => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
