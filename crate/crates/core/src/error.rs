use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("singular KKT system: {0} (retry with ridge > 0)")]
    SingularKkt(String),

    #[error("non-finite state at step {step}")]
    BlowUp { step: usize },

    #[error("requested {requested} modes but the snapshot matrix has numerical rank {rank}")]
    RankDeficient { requested: usize, rank: usize },

    #[error("constant series: autocorrelation is undefined (c_0 = 0)")]
    ConstantSeries,

    #[error("zero-norm reference: {0}")]
    ZeroNorm(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),

    #[error("malformed matrix file: {0}")]
    Format(String),

    #[error("{label}: {source}")]
    Trajectory { label: String, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            Error::MissingInput(_) => 4,
            Error::Io(e) if e.kind() == std::io::ErrorKind::NotFound => 4,
            Error::Io(_) | Error::Format(_) => 4,
            Error::Trajectory { source, .. } => source.exit_code(),
            _ => 3,
        }
    }
}
