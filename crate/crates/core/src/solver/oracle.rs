//! Ground truth for tiny grids by enumerating activity patterns.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::solver::{KktResiduals, RegularizedProblem, Solution};

/// Largest node count accepted by [`oracle_solve`].
pub const ORACLE_CAP: usize = 10;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Lower,
    Upper,
    State,
}

struct Constraint {
    kind: Kind,
    /// grid node for box rows, region position for state rows
    index: usize,
    node: usize,
    a: DVector<f64>,
    rhs: f64,
}

/// Enumerates lower/upper/free per node and active/inactive per region node,
/// in order of increasing active count, and returns the first pattern whose
/// KKT point is primal and dual feasible.
pub fn oracle_solve(problem: &RegularizedProblem, tol: f64) -> Result<Solution> {
    let set = problem.set();
    let op = problem.operator();
    let n = op.len();
    if n > ORACLE_CAP {
        return Err(Error::OracleTooLarge {
            nodes: n,
            cap: ORACLE_CAP,
        });
    }
    let m = op.dense_matrix()?.clone();
    let y = DVector::from_column_slice(problem.data().values());
    let alpha = problem.alpha();
    // Euclidean objective divided by the quadrature weight: ½uᵀHu + qᵀu
    let h = (m.transpose() * &m) * 2.0 + DMatrix::identity(n, n) * (2.0 * alpha);
    let q = -(m.transpose() * &y) * 2.0;

    let b = set.bounds().upper().values();
    let shift = set.state().shift();
    let mut cons = Vec::new();
    for i in 0..n {
        let mut a = DVector::zeros(n);
        a[i] = -1.0;
        cons.push(Constraint {
            kind: Kind::Lower,
            index: i,
            node: i,
            a,
            rhs: 0.0,
        });
        if b[i].is_finite() {
            let mut a = DVector::zeros(n);
            a[i] = 1.0;
            cons.push(Constraint {
                kind: Kind::Upper,
                index: i,
                node: i,
                a,
                rhs: b[i],
            });
        }
    }
    for (pos, (&node, &psi)) in set
        .state()
        .region()
        .indices()
        .iter()
        .zip(set.state().psi())
        .enumerate()
    {
        if psi.is_finite() {
            let mut a: DVector<f64> = m.row(node).transpose();
            a[node] += shift;
            cons.push(Constraint {
                kind: Kind::State,
                index: pos,
                node,
                a,
                rhs: psi,
            });
        }
    }

    let scale = 1.0
        + q.amax()
        + h.amax()
        + b.iter()
            .filter(|v| v.is_finite())
            .fold(0.0f64, |a, v| a.max(v.abs()));
    let eps = 1e-11 * scale;
    for k in 0..=n.min(cons.len()) {
        let mut pick: Vec<usize> = (0..k).collect();
        loop {
            if consistent(&cons, &pick) {
                if let Some((u, nu)) = kkt_point(&h, &q, &cons, &pick) {
                    if feasible(&cons, &pick, &u, &nu, eps) {
                        return finish(problem, &cons, &pick, u, &nu, tol);
                    }
                }
            }
            if !next_combination(&mut pick, cons.len()) {
                break;
            }
        }
    }
    Err(Error::NoFeasiblePattern)
}

/// A node cannot sit on both of its bounds in one pattern.
fn consistent(cons: &[Constraint], pick: &[usize]) -> bool {
    let mut lower = Vec::new();
    for &c in pick {
        if cons[c].kind == Kind::Lower {
            lower.push(cons[c].node);
        }
    }
    pick.iter()
        .all(|&c| cons[c].kind != Kind::Upper || !lower.contains(&cons[c].node))
}

fn next_combination(pick: &mut [usize], total: usize) -> bool {
    let k = pick.len();
    for i in (0..k).rev() {
        if pick[i] < total - k + i {
            pick[i] += 1;
            for j in i + 1..k {
                pick[j] = pick[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Solves `[H Bᵀ; B 0][u; ν] = [−q; d]` for the picked rows.
fn kkt_point(
    h: &DMatrix<f64>,
    q: &DVector<f64>,
    cons: &[Constraint],
    pick: &[usize],
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = h.nrows();
    let k = pick.len();
    let mut kkt = DMatrix::zeros(n + k, n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(h);
    let mut rhs = DVector::zeros(n + k);
    rhs.rows_mut(0, n).copy_from(&(-q));
    for (r, &c) in pick.iter().enumerate() {
        for j in 0..n {
            kkt[(n + r, j)] = cons[c].a[j];
            kkt[(j, n + r)] = cons[c].a[j];
        }
        rhs[n + r] = cons[c].rhs;
    }
    let sol = match kkt.clone().lu().solve(&rhs) {
        Some(s) if s.iter().all(|v| v.is_finite()) => s,
        _ => {
            let svd = kkt.clone().svd(true, true);
            let cut = 1e-13 * svd.singular_values.max();
            let s = svd.solve(&rhs, cut).ok()?;
            // dependent rows: accept only a consistent system
            if (&kkt * &s - &rhs).amax() > 1e-9 * (1.0 + rhs.amax()) {
                return None;
            }
            s
        }
    };
    Some((sol.rows(0, n).into_owned(), sol.rows(n, k).into_owned()))
}

fn feasible(
    cons: &[Constraint],
    pick: &[usize],
    u: &DVector<f64>,
    nu: &DVector<f64>,
    eps: f64,
) -> bool {
    if nu.iter().any(|&v| v < -eps) {
        return false;
    }
    cons.iter()
        .enumerate()
        .all(|(c, con)| pick.contains(&c) || con.a.dot(u) <= con.rhs + eps)
}

fn finish(
    problem: &RegularizedProblem,
    cons: &[Constraint],
    pick: &[usize],
    u: DVector<f64>,
    nu: &DVector<f64>,
    tol: f64,
) -> Result<Solution> {
    let n = u.len();
    let set = problem.set();
    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut state = vec![0.0; set.state().region().len()];
    let mut uvals: Vec<f64> = u.iter().copied().collect();
    for (r, &c) in pick.iter().enumerate() {
        let v = nu[r].max(0.0);
        match cons[c].kind {
            Kind::Lower => {
                lower[cons[c].index] = v;
                uvals[cons[c].node] = 0.0;
            }
            Kind::Upper => {
                upper[cons[c].index] = v;
                uvals[cons[c].node] = cons[c].rhs;
            }
            Kind::State => state[cons[c].index] = v,
        }
    }
    let op = problem.operator();
    let su = op.apply_slice(&uvals);
    let kkt = residuals(problem, &uvals, &su, &lower, &upper, &state);
    if kkt.max() > tol {
        return Err(Error::NonConvergence {
            iterations: 0,
            residual: kkt.max(),
        });
    }
    Solution::assemble(problem, uvals, su, lower, upper, state, kkt, 0)
}

fn residuals(
    problem: &RegularizedProblem,
    u: &[f64],
    su: &[f64],
    lower: &[f64],
    upper: &[f64],
    state: &[f64],
) -> KktResiduals {
    let set = problem.set();
    let op = problem.operator();
    let grid = set.grid();
    let region = set.state().region();
    let shift = set.state().shift();
    let b = set.bounds().upper().values();
    let mut ext = vec![0.0; u.len()];
    for (k, &i) in region.indices().iter().enumerate() {
        ext[i] = state[k];
    }
    let inner: Vec<f64> = su
        .iter()
        .zip(problem.data().values())
        .zip(&ext)
        .map(|((s, y), e)| 2.0 * (s - y) + e)
        .collect();
    let adj = op.apply_adjoint_slice(&inner);
    let stat: Vec<f64> = (0..u.len())
        .map(|i| adj[i] + 2.0 * problem.alpha() * u[i] - lower[i] + upper[i] + shift * ext[i])
        .collect();
    let c = set.state_residual(u, su);
    let mut primal = 0.0f64;
    let mut comp = 0.0f64;
    for i in 0..u.len() {
        primal = primal.max(-u[i]).max(u[i] - b[i]);
        comp = comp.max((lower[i] * u[i]).abs());
        if b[i].is_finite() {
            comp = comp.max((upper[i] * (b[i] - u[i])).abs());
        }
    }
    for (k, &ck) in c.iter().enumerate() {
        if set.state().psi()[k].is_finite() {
            primal = primal.max(ck);
            comp = comp.max((state[k] * ck).abs());
        }
    }
    KktResiduals {
        stationarity: crate::grid::weighted_norm(grid, &stat),
        primal,
        dual: 0.0,
        complementarity: comp,
    }
}
