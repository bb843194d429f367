//! Admissible sets `{0 <= u <= b, λu + Su <= ψ on D'}` and projections onto them.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DomainGrid, GridFunction, ObservationRegion};
use crate::operators::AssembledOperator;
use crate::solver::engine::{self, Objective};

/// Absolute tolerance on margins when deciding feasibility.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Margin threshold below which a constraint counts as active.
pub const EPS_ACT: f64 = 1e-6;

/// Control bounds `0 <= u <= b`. An infinite entry of `b` drops the upper bound there.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    upper: GridFunction,
}

impl BoxBounds {
    pub fn new(upper: GridFunction) -> Result<Self> {
        if let Some(bad) = upper.values().iter().find(|b| b.is_nan() || **b < 0.0) {
            return Err(Error::InvalidBounds(format!(
                "upper bound must be >= 0, got {bad}"
            )));
        }
        Ok(Self { upper })
    }

    pub fn constant(grid: &DomainGrid, b: f64) -> Result<Self> {
        Self::new(grid.constant(b))
    }

    pub fn unbounded(grid: &DomainGrid) -> Self {
        Self {
            upper: grid.constant(f64::INFINITY),
        }
    }

    pub fn upper(&self) -> &GridFunction {
        &self.upper
    }

    pub fn grid(&self) -> &DomainGrid {
        self.upper.grid()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LavrentievSign {
    /// `λu + Su <= ψ`
    #[default]
    Plus,
    /// `Su - λu <= ψ`
    Minus,
}

impl LavrentievSign {
    pub fn factor(self) -> f64 {
        match self {
            LavrentievSign::Plus => 1.0,
            LavrentievSign::Minus => -1.0,
        }
    }
}

/// Pointwise state constraint on the observation region.
#[derive(Debug, Clone, PartialEq)]
pub struct StateConstraint {
    psi: Vec<f64>,
    region: ObservationRegion,
    lambda: f64,
    sign: LavrentievSign,
}

impl StateConstraint {
    /// `psi` holds one value per region node; `+inf` switches the constraint off there.
    pub fn new(
        region: ObservationRegion,
        psi: Vec<f64>,
        lambda: f64,
        sign: LavrentievSign,
    ) -> Result<Self> {
        if psi.len() != region.len() {
            return Err(Error::DimensionMismatch {
                expected: region.len(),
                found: psi.len(),
            });
        }
        if psi.iter().any(|p| p.is_nan() || *p == f64::NEG_INFINITY) {
            return Err(Error::InvalidBounds("psi must be a number or +inf".into()));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be >= 0, got {lambda}"
            )));
        }
        Ok(Self {
            psi,
            region,
            lambda,
            sign,
        })
    }

    pub fn constant(
        region: ObservationRegion,
        psi: f64,
        lambda: f64,
        sign: LavrentievSign,
    ) -> Result<Self> {
        let psi = vec![psi; region.len()];
        Self::new(region, psi, lambda, sign)
    }

    /// A constraint that never binds.
    pub fn inactive(grid: &DomainGrid) -> Self {
        let region = ObservationRegion::all(grid);
        let psi = vec![f64::INFINITY; region.len()];
        Self {
            psi,
            region,
            lambda: 0.0,
            sign: LavrentievSign::Plus,
        }
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn region(&self) -> &ObservationRegion {
        &self.region
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn sign(&self) -> LavrentievSign {
        self.sign
    }

    /// Signed Lavrentiev coefficient multiplying `u` in the constraint.
    pub fn shift(&self) -> f64 {
        self.sign.factor() * self.lambda
    }
}

/// `U_ad` (λ = 0) or `U_ad^λ` (λ > 0) for a fixed operator.
#[derive(Debug, Clone)]
pub struct AdmissibleSet {
    bounds: BoxBounds,
    state: StateConstraint,
    operator: Arc<AssembledOperator>,
}

impl AdmissibleSet {
    pub fn new(
        operator: Arc<AssembledOperator>,
        bounds: BoxBounds,
        state: StateConstraint,
    ) -> Result<Self> {
        let grid = operator.grid();
        if bounds.grid() != grid {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: bounds.grid().len(),
            });
        }
        if state.region.grid() != grid {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: state.region.grid().len(),
            });
        }
        Ok(Self {
            bounds,
            state,
            operator,
        })
    }

    pub fn bounds(&self) -> &BoxBounds {
        &self.bounds
    }

    pub fn state(&self) -> &StateConstraint {
        &self.state
    }

    pub fn operator(&self) -> &Arc<AssembledOperator> {
        &self.operator
    }

    pub fn grid(&self) -> &DomainGrid {
        self.operator.grid()
    }

    pub fn lambda(&self) -> f64 {
        self.state.lambda
    }

    /// Same bounds and `ψ` with another Lavrentiev parameter.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        self.with_lavrentiev(lambda, self.state.sign)
    }

    pub fn with_lavrentiev(&self, lambda: f64, sign: LavrentievSign) -> Result<Self> {
        let state = StateConstraint::new(
            self.state.region.clone(),
            self.state.psi.clone(),
            lambda,
            sign,
        )?;
        Ok(Self {
            bounds: self.bounds.clone(),
            state,
            operator: self.operator.clone(),
        })
    }

    /// The unregularized set `U_ad`.
    pub fn unregularized(&self) -> Self {
        Self {
            bounds: self.bounds.clone(),
            state: StateConstraint {
                lambda: 0.0,
                ..self.state.clone()
            },
            operator: self.operator.clone(),
        }
    }

    /// Region rows whose `ψ` is finite.
    pub(crate) fn state_rows(&self) -> Vec<StateRow> {
        self.state
            .region
            .indices()
            .iter()
            .zip(&self.state.psi)
            .enumerate()
            .filter(|(_, (_, p))| p.is_finite())
            .map(|(pos, (&node, &psi))| StateRow { pos, node, psi })
            .collect()
    }

    /// `shift * u + Su - ψ` on the region, given `Su`.
    pub(crate) fn state_residual(&self, u: &[f64], su: &[f64]) -> Vec<f64> {
        let shift = self.state.shift();
        self.state
            .region
            .indices()
            .iter()
            .zip(&self.state.psi)
            .map(|(&i, &p)| shift * u[i] + su[i] - p)
            .collect()
    }
}

/// One finite state constraint: region position, grid node and `ψ` there.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StateRow {
    pub pos: usize,
    pub node: usize,
    pub psi: f64,
}

/// Realized constraint margins of a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// `min_i u_i`
    pub lower: f64,
    /// `min_i (b_i - u_i)`, `+inf` without finite upper bounds
    pub upper: f64,
    /// `min_j (ψ_j - (λu + Su)_j)` over `D'`, `+inf` without finite `ψ`
    pub state: f64,
    pub feasible: bool,
}

impl FeasibilityReport {
    /// Smallest of the three margins.
    pub fn tau(&self) -> f64 {
        self.lower.min(self.upper).min(self.state)
    }
}

pub fn feasibility(u: &GridFunction, set: &AdmissibleSet) -> Result<FeasibilityReport> {
    u.same_grid(&set.grid().zeros())?;
    let su = set.operator.apply(u)?;
    Ok(feasibility_with_state(u.values(), su.values(), set))
}

pub(crate) fn feasibility_with_state(
    u: &[f64],
    su: &[f64],
    set: &AdmissibleSet,
) -> FeasibilityReport {
    let lower = u.iter().copied().fold(f64::INFINITY, f64::min);
    let upper = u
        .iter()
        .zip(set.bounds.upper.values())
        .map(|(u, b)| b - u)
        .fold(f64::INFINITY, f64::min);
    let state = set
        .state_residual(u, su)
        .into_iter()
        .map(|c| -c)
        .filter(|m| !m.is_nan())
        .fold(f64::INFINITY, f64::min);
    let feasible =
        lower >= -FEASIBILITY_TOL && upper >= -FEASIBILITY_TOL && state >= -FEASIBILITY_TOL;
    FeasibilityReport {
        lower,
        upper,
        state,
        feasible,
    }
}

/// Node indices whose margin is at most `eps`, per constraint family.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveSets {
    pub lower: Vec<usize>,
    pub upper: Vec<usize>,
    /// grid node indices of active state constraints
    pub state: Vec<usize>,
}

impl ActiveSets {
    pub fn is_empty(&self) -> bool {
        self.lower.is_empty() && self.upper.is_empty() && self.state.is_empty()
    }

    pub fn sizes(&self) -> [usize; 3] {
        [self.lower.len(), self.upper.len(), self.state.len()]
    }
}

/// Margin-based activity classification.
pub fn classify_activity(u: &GridFunction, set: &AdmissibleSet, eps: f64) -> Result<ActiveSets> {
    let su = set.operator.apply(u)?;
    Ok(classify_with_state(u.values(), su.values(), set, eps))
}

pub(crate) fn classify_with_state(
    u: &[f64],
    su: &[f64],
    set: &AdmissibleSet,
    eps: f64,
) -> ActiveSets {
    let b = set.bounds.upper.values();
    let lower = (0..u.len()).filter(|&i| u[i] <= eps).collect();
    let upper = (0..u.len()).filter(|&i| b[i] - u[i] <= eps).collect();
    let state = set
        .state
        .region
        .indices()
        .iter()
        .zip(set.state_residual(u, su))
        .filter(|(_, c)| -c <= eps)
        .map(|(&i, _)| i)
        .collect();
    ActiveSets {
        lower,
        upper,
        state,
    }
}

/// Componentwise `median(0, v_i, b_i)`: the L²-nearest point of the box.
pub fn project_box(v: &GridFunction, bounds: &BoxBounds) -> Result<GridFunction> {
    v.same_grid(bounds.upper())?;
    let mut out = v.clone();
    clamp_in_place(out.values_mut(), bounds.upper.values());
    Ok(out)
}

pub(crate) fn clamp_in_place(u: &mut [f64], upper: &[f64]) {
    for (x, &b) in u.iter_mut().zip(upper) {
        *x = x.max(0.0).min(b);
    }
}

/// L² projection of `v` onto the admissible set, certified to `tol` in the KKT residuals.
pub fn project_admissible(v: &GridFunction, set: &AdmissibleSet, tol: f64) -> Result<GridFunction> {
    v.same_grid(&set.grid().zeros())?;
    let objective = Objective::distance(v.values());
    let result = engine::minimize(set, &objective, &engine::EngineOptions::new(tol)).map_err(
        |e| match e {
            Error::InfeasibleProblem { .. } => Error::InfeasibleSet,
            other => other,
        },
    )?;
    GridFunction::new(*set.grid(), result.u)
}

/// Slack of a Slater point and the resulting Lavrentiev cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlaterInfo {
    /// `min_{D'} (ψ - S û)`
    pub tau: f64,
    /// `τ / ‖û‖_∞(D')`; infinite when `û` vanishes on `D'`
    pub lambda_max: f64,
}

/// Checks `û` as a Slater point for the state constraint and returns `(τ, λ_max)`.
pub fn slater(set: &AdmissibleSet, u_hat: &GridFunction) -> Result<SlaterInfo> {
    let su = set.operator.apply(u_hat)?;
    let b = set.bounds.upper.values();
    let box_violation = u_hat
        .values()
        .iter()
        .zip(b)
        .map(|(&u, &b)| (-u).max(u - b))
        .fold(0.0f64, f64::max);
    let tau = set
        .state_rows()
        .iter()
        .map(|r| r.psi - su.values()[r.node])
        .fold(f64::INFINITY, f64::min);
    if box_violation > FEASIBILITY_TOL || !(tau > 0.0) {
        return Err(Error::NotASlaterPoint { tau, box_violation });
    }
    let sup = set
        .state
        .region
        .indices()
        .iter()
        .map(|&i| u_hat.values()[i].abs())
        .fold(0.0, f64::max);
    let lambda_max = if sup == 0.0 { f64::INFINITY } else { tau / sup };
    Ok(SlaterInfo { tau, lambda_max })
}
