use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::cvx::SolveStatus;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid network: {}", .0.join("; "))]
    InvalidNetwork(Vec<String>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("power flow did not converge after {iterations} iterations (mismatch {mismatch:.3e} p.u.)")]
    PowerFlowDiverged { iterations: usize, mismatch: f64 },

    #[error("singular Jacobian at Newton iteration {iteration}")]
    SingularJacobian { iteration: usize },

    #[error("degenerate objective bounds for zone {zone}, objective {objective}: f_max {f_max} <= f_min {f_min}")]
    DegenerateBounds {
        zone: usize,
        objective: usize,
        f_min: f64,
        f_max: f64,
    },

    #[error("solver returned {status:?} (residual {residual:.3e}): {context}")]
    Solver {
        status: SolveStatus,
        residual: f64,
        context: String,
    },

    #[error("tie-line schedule of microgrid {mg} cannot be followed from hour {hour} on")]
    DispatchInfeasible { mg: usize, hour: usize },

    /// `hour` is the 1-based hour label.
    #[error("{stage} failed at hour {hour}: {source}")]
    Stage {
        stage: &'static str,
        hour: usize,
        source: Box<Error>,
    },
}

impl Error {
    pub fn at(self, stage: &'static str, hour: usize) -> Error {
        Error::Stage {
            stage,
            hour,
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(
            self.root(),
            Error::Solver {
                status: SolveStatus::Infeasible,
                ..
            } | Error::DispatchInfeasible { .. }
        )
    }
}
