use std::path::PathBuf;

use xpikesim_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("malformed {what}: {detail}")]
    Malformed { what: String, detail: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0} self-test check(s) failed")]
    SelfTest(usize),
}

impl CliError {
    pub fn malformed(what: impl Into<String>, detail: impl ToString) -> Self {
        Self::Malformed { what: what.into(), detail: detail.to_string() }
    }

    /// 2: bad input or usage, 3: shapes disagree, 1: a self-test failed.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Dimension(_) | Self::Core(CoreError::Shape(_) | CoreError::LengthMismatch { .. }) => 3,
            Self::SelfTest(_) => 1,
            _ => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
