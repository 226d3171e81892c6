use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: u64, column: usize, message: String },

    #[error("curves with fewer than 3 points: {}", .0.join(", "))]
    TooFewPoints(Vec<String>),

    #[error("duplicate curve id `{0}`")]
    DuplicateId(String),

    #[error("{0}")]
    Data(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Estimation(#[from] shapemean::Error),
}

impl CliError {
    /// 1 usage, 2 data, 3 numerics.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Estimation(shapemean::Error::InvalidConfig(_)) => 1,
            CliError::Estimation(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
