use thiserror::Error;

/// Crate-wide error type.
///
/// Variants are grouped by how the command-line tool reports them:
/// configuration problems exit with code 2, data problems with code 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate residual variance: training residuals are identically zero")]
    DegenerateVariance,

    #[error("monitor is not running: {0}")]
    NotRunning(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit code used by the CLI: 2 for configuration errors, 3 for data errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) | Error::Config(_) | Error::NotRunning(_) => 2,
            Error::Dimension(_)
            | Error::SingularDesign(_)
            | Error::DegenerateVariance
            | Error::Data(_)
            | Error::Csv(_)
            | Error::Io(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
