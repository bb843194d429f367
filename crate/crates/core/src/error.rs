use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected} nodes, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("grid with {nodes} nodes exceeds the dense assembly cap of {cap}")]
    GridTooLarge { nodes: usize, cap: usize },

    #[error("invalid kernel parameter: {0}")]
    InvalidKernelParameter(String),

    #[error("observation region is empty")]
    EmptyRegion,

    #[error("invalid bounds: {0}")]
    InvalidBounds(String),

    #[error("admissible set is empty (no feasible point found)")]
    InfeasibleSet,

    #[error(
        "problem is infeasible (state infeasibility {infeasibility:.3e} at penalty {penalty:.3e})"
    )]
    InfeasibleProblem { infeasibility: f64, penalty: f64 },

    #[error("no convergence after {iterations} iterations (KKT residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("Tikhonov parameter must be positive, got {0}")]
    AlphaNonPositive(f64),

    #[error(
        "point is not a Slater point (state slack {tau:.3e}, box violation {box_violation:.3e})"
    )]
    NotASlaterPoint { tau: f64, box_violation: f64 },

    #[error("enumeration oracle supports at most {cap} nodes, got {nodes}")]
    OracleTooLarge { nodes: usize, cap: usize },

    #[error("no activity pattern satisfies the KKT conditions")]
    NoFeasiblePattern,

    #[error("source element has zero norm")]
    ZeroSourceNorm,

    #[error("regularization path is empty")]
    EmptyPath,

    #[error("constraints remain active at the smallest alpha {alpha:.3e}")]
    NoTransition { alpha: f64 },

    #[error("invalid parameter choice rule: {0}")]
    InvalidRule(String),

    #[error("Lavrentiev parameter {lambda:.3e} exceeds the Slater cap {cap:.3e}")]
    LambdaExceedsSlaterCap { lambda: f64, cap: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("failed to write output: {0}")]
    Output(String),
}

impl Error {
    /// True for the error classes that signal an empty feasible set.
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            Error::InfeasibleSet
                | Error::InfeasibleProblem { .. }
                | Error::NoFeasiblePattern
                | Error::LambdaExceedsSlaterCap { .. }
                | Error::NotASlaterPoint { .. }
        )
    }
}
