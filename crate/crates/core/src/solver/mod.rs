//! The regularized problem `min ‖Su − y_d‖² + α‖u‖²` over `U_ad^λ`.

pub(crate) mod dense_qp;
pub(crate) mod engine;
mod oracle;
mod pseudo_inverse;

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

pub use oracle::{oracle_solve, ORACLE_CAP};
pub use pseudo_inverse::{pseudo_inverse, PseudoInverseResult};

use crate::admissible::{project_admissible, project_box, ActiveSets, AdmissibleSet, EPS_ACT};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::operators::AssembledOperator;

/// Multipliers at or below this size do not make a constraint active in reports.
pub const MULTIPLIER_EPS: f64 = 1e-12;

/// One instance of the regularized problem.
#[derive(Debug, Clone)]
pub struct RegularizedProblem {
    set: AdmissibleSet,
    y_d: GridFunction,
    alpha: f64,
}

impl RegularizedProblem {
    pub fn new(set: AdmissibleSet, y_d: GridFunction, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::AlphaNonPositive(alpha));
        }
        y_d.same_grid(&set.grid().zeros())?;
        Ok(Self { set, y_d, alpha })
    }

    pub fn set(&self) -> &AdmissibleSet {
        &self.set
    }

    pub fn data(&self) -> &GridFunction {
        &self.y_d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn operator(&self) -> &Arc<AssembledOperator> {
        self.set.operator()
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.set.clone(), self.y_d.clone(), alpha)
    }

    pub fn with_set(&self, set: AdmissibleSet) -> Result<Self> {
        Self::new(set, self.y_d.clone(), self.alpha)
    }

    pub fn with_data(&self, y_d: GridFunction) -> Result<Self> {
        Self::new(self.set.clone(), y_d, self.alpha)
    }

    /// `‖Su − y_d‖² + α‖u‖²`
    pub fn objective(&self, u: &GridFunction) -> Result<f64> {
        let su = self.operator().apply(u)?;
        Ok(su.distance(&self.y_d).powi(2) + self.alpha * u.norm().powi(2))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `‖2S*(Su − y_d) + 2αu − μ⁻ + μ⁺ + (λI + S)*η‖`
    pub stationarity: f64,
    /// largest constraint violation
    pub primal: f64,
    /// largest negative part of a multiplier
    pub dual: f64,
    /// largest `|multiplier · margin|`
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.dual)
            .max(self.complementarity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    /// `μ⁻ >= 0` for `u >= 0`
    pub lower: GridFunction,
    /// `μ⁺ >= 0` for `u <= b`
    pub upper: GridFunction,
    /// `η >= 0`, one entry per region node
    pub state: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub u: GridFunction,
    pub y: GridFunction,
    pub objective: f64,
    pub multipliers: Multipliers,
    /// constraints with margin at most `EPS_ACT` and a positive multiplier
    pub active: ActiveSets,
    pub iterations: usize,
    pub kkt: KktResiduals,
}

impl Solution {
    pub(crate) fn assemble(
        problem: &RegularizedProblem,
        u: Vec<f64>,
        su: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        state: Vec<f64>,
        kkt: KktResiduals,
        iterations: usize,
    ) -> Result<Self> {
        let grid = *problem.set.grid();
        let set = &problem.set;
        let b = set.bounds().upper().values();
        let active = ActiveSets {
            lower: (0..u.len())
                .filter(|&i| u[i] <= EPS_ACT && lower[i] > MULTIPLIER_EPS)
                .collect(),
            upper: (0..u.len())
                .filter(|&i| b[i] - u[i] <= EPS_ACT && upper[i] > MULTIPLIER_EPS)
                .collect(),
            state: {
                let residual = set.state_residual(&u, &su);
                set.state()
                    .region()
                    .indices()
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| -residual[k] <= EPS_ACT && state[k] > MULTIPLIER_EPS)
                    .map(|(_, &i)| i)
                    .collect()
            },
        };
        let u = GridFunction::new(grid, u)?;
        let y = GridFunction::new(grid, su)?;
        let objective = y.distance(&problem.y_d).powi(2) + problem.alpha * u.norm().powi(2);
        Ok(Self {
            u,
            y,
            objective,
            multipliers: Multipliers {
                lower: GridFunction::new(grid, lower)?,
                upper: GridFunction::new(grid, upper)?,
                state,
            },
            active,
            iterations,
            kkt,
        })
    }
}

/// Solves the problem with all KKT residuals at most `tol`.
///
/// Starts from the box projection of the unconstrained minimizer when dense
/// matrices are available and from zero otherwise.
pub fn solve(problem: &RegularizedProblem, tol: f64) -> Result<Solution> {
    let start = if problem.operator().has_dense() {
        let free = solve_unconstrained(problem.operator(), &problem.y_d, problem.alpha)?;
        project_box(&free, problem.set.bounds())?
    } else {
        problem.set.grid().zeros()
    };
    solve_from(problem, &start, tol)
}

/// Like [`solve`] with an explicit starting point.
pub fn solve_from(
    problem: &RegularizedProblem,
    start: &GridFunction,
    tol: f64,
) -> Result<Solution> {
    start.same_grid(&problem.y_d)?;
    let objective = engine::Objective::tikhonov(problem.y_d.values(), problem.alpha);
    let mut opts = engine::EngineOptions::new(tol);
    opts.start = Some(start.values().to_vec());
    let r = engine::minimize(&problem.set, &objective, &opts)?;
    Solution::assemble(
        problem,
        r.u,
        r.su,
        r.lower,
        r.upper,
        r.state,
        r.kkt,
        r.iterations,
    )
}

/// Solves `(S*S + αI)u = S*y_d` densely.
pub fn solve_unconstrained(
    op: &AssembledOperator,
    y_d: &GridFunction,
    alpha: f64,
) -> Result<GridFunction> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::AlphaNonPositive(alpha));
    }
    let m = op.dense_matrix()?;
    let sty = op.apply_adjoint(y_d)?;
    let n = op.len();
    // W⁻¹MᵀW M = MᵀM under uniform weights
    let mut a: DMatrix<f64> = m.transpose() * m;
    for i in 0..n {
        a[(i, i)] += alpha;
    }
    let rhs = DVector::from_column_slice(sty.values());
    let chol = Cholesky::<f64, Dyn>::new(a.clone()).ok_or(Error::NonConvergence {
        iterations: 0,
        residual: f64::INFINITY,
    })?;
    let mut u = chol.solve(&rhs);
    // one step of iterative refinement
    let r = &rhs - &a * &u;
    u += chol.solve(&r);
    GridFunction::new(*op.grid(), u.as_slice().to_vec())
}

/// `‖u − P_{U_ad^λ}(−S*(Su − y_d)/α)‖` at the solution's control.
pub fn projection_formula_residual(
    solution: &Solution,
    problem: &RegularizedProblem,
    tol: f64,
) -> Result<f64> {
    let op = problem.operator();
    let su = op.apply(&solution.u)?;
    let v = op
        .apply_adjoint(&su.sub(&problem.y_d))?
        .scaled(-1.0 / problem.alpha);
    let p = project_admissible(&v, &problem.set, tol)?;
    Ok(solution.u.distance(&p))
}
