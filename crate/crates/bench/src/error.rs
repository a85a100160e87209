use thiserror::Error;

/// Failures of the experiment runner, split by how the CLI reports them.
#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl BenchError {
    /// Process exit code: 2 for configuration problems, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Runtime(_) | BenchError::Io(_) => 3,
        }
    }

    /// Wraps a core error raised while handling the named spec.
    pub fn from_core(context: &str, err: mixest_core::Error) -> Self {
        match err {
            mixest_core::Error::InvalidConfig(msg) => BenchError::Config(format!("{context}: {msg}")),
            other => BenchError::Runtime(format!("{context}: {other}")),
        }
    }
}

impl From<std::io::Error> for BenchError {
    fn from(err: std::io::Error) -> Self {
        BenchError::Io(err.to_string())
    }
}

pub type BenchResult<T> = std::result::Result<T, BenchError>;
