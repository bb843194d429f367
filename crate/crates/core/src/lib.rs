//! Joint Tikhonov and Lavrentiev regularization of linear inverse problems
//! with pointwise control and state constraints.

pub mod admissible;
mod banded;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod manufacture;
pub mod operators;
pub mod solver;

pub use admissible::{
    classify_activity, feasibility, project_admissible, project_box, slater, ActiveSets,
    AdmissibleSet, BoxBounds, FeasibilityReport, LavrentievSign, SlaterInfo, StateConstraint,
    EPS_ACT, FEASIBILITY_TOL,
};
pub use error::{Error, Result};
pub use experiments::{
    activity_transition, alpha_continuity_check, lavrentiev_sweep, noise_points, noise_study,
    sweep_alpha, total_error_study, write_csv, ExperimentOptions, NoiseRule, RateFit, Scenario,
    SweepRecord,
};
pub use grid::{restrict, DomainGrid, GridFunction, ObservationRegion};
pub use manufacture::{
    add_noise, manufacture, optimal_alpha, recover_source, DataModel, ManufacturedInstance,
    NoisyData, OptimalAlpha, SourceRecovery,
};
pub use operators::{
    assemble_fredholm, assemble_poisson, assemble_poisson_with, AssembledOperator, KernelSpec,
    OperatorKind, Storage, DENSE_CAP,
};
pub use solver::{
    oracle_solve, projection_formula_residual, pseudo_inverse, solve, solve_from,
    solve_unconstrained, KktResiduals, Multipliers, PseudoInverseResult, RegularizedProblem,
    Solution, ORACLE_CAP,
};
