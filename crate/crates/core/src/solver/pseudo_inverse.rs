//! Minimal-norm minimizer of the residual over an admissible set.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::admissible::{project_admissible, AdmissibleSet};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::solver::dense_qp::DenseQp;

/// Singular values below this fraction of the largest count as zero.
const RANK_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoInverseResult {
    pub u: GridFunction,
    /// `‖Su⁺ − y_d‖`
    pub residual: f64,
    /// `‖u⁺‖`
    pub norm: f64,
    /// numerical rank of `S` on the grid
    pub rank: usize,
}

/// Two stages: minimize the residual over the set, then pick the element of
/// least norm among the minimizers.
///
/// When `S` has full numerical rank the first stage has a unique solution and
/// is returned directly. Otherwise the first stage is regularized by a
/// vanishing multiple of `‖u‖²` and the second stage minimizes `‖u‖²` over the
/// set intersected with `{u : V_rᵀu = V_rᵀu_ε}`, the affine set of controls
/// sharing the retained singular components of the first-stage point.
pub fn pseudo_inverse(
    y_d: &GridFunction,
    set: &AdmissibleSet,
    tol: f64,
) -> Result<PseudoInverseResult> {
    let op = set.operator();
    y_d.same_grid(&set.grid().zeros())?;
    let n = op.len();
    let m = op.dense_matrix()?.clone();
    let svd = m.clone().svd(false, true);
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > RANK_CUTOFF * smax)
        .collect();
    let rank = keep.len();

    let (ineq, ineq_rhs) = constraint_rows(set, &m);
    let start = project_admissible(&set.grid().zeros(), set, tol).map_err(|e| match e {
        Error::InfeasibleSet => Error::InfeasibleProblem {
            infeasibility: f64::INFINITY,
            penalty: f64::INFINITY,
        },
        other => other,
    })?;
    let y = DVector::from_column_slice(y_d.values());
    let eps = if rank == n { 0.0 } else { 1e-12 * smax * smax };
    let stage1 = DenseQp {
        h: (m.transpose() * &m) * 2.0 + DMatrix::identity(n, n) * (2.0 * eps),
        q: -(m.transpose() * &y) * 2.0,
        eq: DMatrix::zeros(0, n),
        ineq: ineq.clone(),
        ineq_rhs: ineq_rhs.clone(),
    };
    let (u1, it1) = stage1
        .solve(DVector::from_column_slice(start.values()))
        .ok_or(Error::NonConvergence {
            iterations: 0,
            residual: f64::INFINITY,
        })?;

    let u = if rank == n {
        u1
    } else {
        let v_t = svd.v_t.as_ref().expect("requested right singular vectors");
        let eq = DMatrix::from_fn(rank, n, |r, j| v_t[(keep[r], j)]);
        let stage2 = DenseQp {
            h: DMatrix::identity(n, n) * 2.0,
            q: DVector::zeros(n),
            eq,
            ineq,
            ineq_rhs,
        };
        stage2
            .solve(u1)
            .map(|(u, _)| u)
            .ok_or(Error::NonConvergence {
                iterations: it1,
                residual: f64::INFINITY,
            })?
    };
    let u = GridFunction::new(*set.grid(), u.as_slice().to_vec())?;
    let residual = op.apply(&u)?.distance(y_d);
    let norm = u.norm();
    Ok(PseudoInverseResult {
        u,
        residual,
        norm,
        rank,
    })
}

/// Rows `Cu <= d` for the box and the finite state constraints.
fn constraint_rows(set: &AdmissibleSet, m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = m.nrows();
    let b = set.bounds().upper().values();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..n {
        let mut r = vec![0.0; n];
        r[i] = -1.0;
        rows.push(r);
        rhs.push(0.0);
        if b[i].is_finite() {
            let mut r = vec![0.0; n];
            r[i] = 1.0;
            rows.push(r);
            rhs.push(b[i]);
        }
    }
    let shift = set.state().shift();
    for row in set.state_rows() {
        let mut r: Vec<f64> = m.row(row.node).iter().copied().collect();
        r[row.node] += shift;
        rows.push(r);
        rhs.push(row.psi);
    }
    let c = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    (c, DVector::from_vec(rhs))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::admissible::{BoxBounds, LavrentievSign, StateConstraint};
    use crate::grid::{DomainGrid, ObservationRegion};
    use crate::operators::{assemble_fredholm, assemble_poisson, KernelSpec};

    #[test]
    fn injective_operator_recovers_attainable_control() {
        let g = DomainGrid::new(1, 16).unwrap();
        let op = Arc::new(assemble_poisson(&g).unwrap());
        let region = ObservationRegion::from_box(&g, &[0.25], &[0.75]).unwrap();
        let state = StateConstraint::constant(region, 1.0, 0.0, LavrentievSign::Plus).unwrap();
        let set =
            AdmissibleSet::new(op.clone(), BoxBounds::constant(&g, 1.0).unwrap(), state).unwrap();
        let u_bar = g.sample(|x| if x[0] < 0.4 { 1.0 } else { 0.3 * x[0] });
        let y = op.apply(&u_bar).unwrap();
        let r = pseudo_inverse(&y, &set, 1e-8).unwrap();
        assert_eq!(r.rank, 16);
        assert!(r.u.distance(&u_bar) <= 1e-8, "{}", r.u.distance(&u_bar));
        assert!(r.residual <= 1e-10);
    }

    #[test]
    fn rank_one_kernel_selects_minimal_norm() {
        // argmin is the box intersected with {⟨x, u⟩ = t}; minimal norm is
        // u = clamp(θx, 0, b) with θ fixed by the constraint
        let g = DomainGrid::new(1, 9).unwrap();
        let op = Arc::new(assemble_fredholm(&g, KernelSpec::Separable { scale: 1.0 }).unwrap());
        let region = ObservationRegion::all(&g);
        let state =
            StateConstraint::constant(region, f64::INFINITY, 0.0, LavrentievSign::Plus).unwrap();
        let b = 0.6;
        let set =
            AdmissibleSet::new(op.clone(), BoxBounds::constant(&g, b).unwrap(), state).unwrap();
        let x = g.sample(|p| p[0]);
        let t = 0.2;
        let y = x.scaled(t);
        // S u = ⟨x, u⟩ x, so y = S u for any u with ⟨x, u⟩ = t
        let moment = |theta: f64| x.map(|v| (theta * v).clamp(0.0, b)).inner(&x);
        let (mut lo, mut hi) = (0.0, 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if moment(mid) < t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let expected = x.map(|v| (lo * v).clamp(0.0, b));
        let r = pseudo_inverse(&y, &set, 1e-8).unwrap();
        assert_eq!(r.rank, 1);
        assert!(
            r.u.distance(&expected) <= 1e-8,
            "{}",
            r.u.distance(&expected)
        );
        assert!(r.residual <= 1e-8);
    }
}
