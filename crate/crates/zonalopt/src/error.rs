use std::io;
use std::path::{Path, PathBuf};

use zonalopt_core::cvx::SolveStatus;
use zonalopt_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("scenario parse error at `{path}` (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid scenario: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },

    #[error("ADMM did not converge within the iteration limit at hour(s) {hours:?}")]
    NotConverged { hours: Vec<usize> },
}

impl AppError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        AppError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn csv(path: &Path, source: csv::Error) -> Self {
        AppError::Csv {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit status: 2 invalid input, 3 infeasible, 4 non-convergence,
    /// 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Parse { .. } | AppError::Validation(_) | AppError::Usage(_) => 2,
            AppError::NotConverged { .. } => 4,
            AppError::Core(e) if e.is_infeasible() => 3,
            AppError::Core(e) => match e.root() {
                CoreError::InvalidNetwork(_) | CoreError::InvalidArgument(_) => 2,
                CoreError::PowerFlowDiverged { .. } => 4,
                CoreError::Solver {
                    status: SolveStatus::IterationLimit,
                    ..
                } => 4,
                _ => 1,
            },
            AppError::Io { .. } | AppError::Csv { .. } => 1,
        }
    }
}
