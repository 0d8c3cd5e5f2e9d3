use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. Variants map onto the distinct failure classes the
/// CLI must report with distinct exit codes (config, numerical/domain,
/// resume integrity).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A fictitious radius collided with a physical interface.
    #[error("degenerate geometry: {0}")]
    GeometryDegenerate(String),

    /// Kernel evaluated at (or too close to) its own center.
    #[error("singular kernel evaluation: point coincides with a source center")]
    Singularity,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("series did not converge within {max_degree} harmonic degrees")]
    Convergence { max_degree: usize },

    /// The collocation matrix is numerically rank deficient; the offending
    /// parameter vector is treated as an invalid configuration.
    #[error("rank failure: numerical rank {rank} < {cols} columns")]
    RankFailure { rank: usize, cols: usize },

    #[error("quality metric undefined: reference field has zero norm")]
    UndefinedMetric,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("region infeasible: no admissible position found in {attempts} attempts")]
    RegionInfeasible { attempts: usize },

    #[error("ledger holds no recorded quality values")]
    EmptyLedger,

    #[error("no usable result: {0}")]
    NoResult(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("resume integrity: {0}")]
    ResumeIntegrity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 numerical/domain,
    /// 4 resume integrity, 1 everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            Error::GeometryDegenerate(_)
            | Error::Singularity
            | Error::Domain(_)
            | Error::Convergence { .. }
            | Error::RankFailure { .. }
            | Error::UndefinedMetric
            | Error::InsufficientData(_)
            | Error::Numerical(_)
            | Error::RegionInfeasible { .. }
            | Error::EmptyLedger
            | Error::NoResult(_) => 3,
            Error::ResumeIntegrity(_) => 4,
            Error::Io(_) => 1,
        }
    }
}
