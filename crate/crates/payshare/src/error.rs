use crate::lasso::LassoFit;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("CSV error in {path}: {source}")]
    Csv { path: String, source: csv::Error },

    /// Malformed cell or header problem; message carries column and line.
    #[error("{0}")]
    Parse(String),

    #[error("missing mandatory column {column}")]
    MissingColumn { column: String },

    #[error("no payroll row for team {team}")]
    MissingPayroll { team: String },

    #[error("duplicate salary rows for player {player}")]
    DuplicateSalary { player: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Precondition violation on otherwise well-formed input.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("solver did not converge after {sweeps} sweeps (KKT residual {residual:.3e})")]
    NonConvergence { sweeps: usize, residual: f64 },

    /// Logistic fit diverged (separable data). Carries the fit at the
    /// coefficient cap so callers can still inspect signs.
    #[error("logistic fit diverged: coefficient magnitude exceeded {cap}")]
    Separation { cap: f64, fit: Box<LassoFit> },

    #[error("response contains a single class")]
    SingleClass,

    #[error("{0}")]
    Config(String),
}

impl Error {
    /// True for errors caused by bad inputs or configuration (CLI exit
    /// code 2) as opposed to runtime/solver failures (exit code 1).
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Csv { .. }
                | Error::Parse(_)
                | Error::MissingColumn { .. }
                | Error::MissingPayroll { .. }
                | Error::DuplicateSalary { .. }
                | Error::DimensionMismatch(_)
                | Error::InvalidInput(_)
                | Error::SingleClass
                | Error::Config(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
