use qbe_core::{Error, FormatError};

/// Process exit statuses.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config line {line}: {reason}")]
    ConfigSyntax { line: usize, reason: String },
    #[error("{path}: {source}")]
    File { path: String, source: Error },
    #[error(transparent)]
    Core(#[from] Error),
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        Self::Core(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::ConfigSyntax { .. } => EXIT_USAGE,
            Self::File { source, .. } | Self::Core(source) => match source {
                Error::InvalidConfig(_) => EXIT_USAGE,
                Error::NonFinite(_) | Error::NumericDomain(_) | Error::NumericOverflow(_) => EXIT_NUMERIC,
                _ => EXIT_IO,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
