//! Convex quadratic programs `min γ‖Su − y‖² + β‖u − c‖²` over an admissible set.
//!
//! The state rows are handled by an augmented Lagrangian whose subproblems
//! only see the box, solved by accelerated projected gradient with restart.
//! When the required matrices can be formed, the iterate is refined by a
//! primal-dual active-set iteration on the exact KKT system.
//!
//! Internally all vectors are node values; multipliers are densities, so the
//! Euclidean KKT system is divided through by the uniform quadrature weight.

use std::collections::HashSet;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::admissible::{clamp_in_place, AdmissibleSet, StateRow};
use crate::error::{Error, Result};
use crate::grid::weighted_norm;
use crate::operators::{AssembledOperator, DENSE_CAP};
use crate::solver::KktResiduals;

/// Safety factor on the power-iteration estimate of `‖S‖²`.
const NORM_SAFETY: f64 = 1.05;
/// Largest conditioning `ρ‖A‖² / (2γ‖S‖² + 2β)` before declaring infeasibility.
const PENALTY_RANGE: f64 = 1e10;
const MAX_POLISH: usize = 100;

#[derive(Debug, Clone)]
pub(crate) struct Objective {
    gamma: f64,
    beta: f64,
    data: Vec<f64>,
    center: Vec<f64>,
}

impl Objective {
    /// `‖u − v‖²`
    pub(crate) fn distance(v: &[f64]) -> Self {
        Self {
            gamma: 0.0,
            beta: 1.0,
            data: Vec::new(),
            center: v.to_vec(),
        }
    }

    /// `‖Su − y‖² + α‖u‖²`
    pub(crate) fn tikhonov(y: &[f64], alpha: f64) -> Self {
        Self {
            gamma: 1.0,
            beta: alpha,
            data: y.to_vec(),
            center: vec![0.0; y.len()],
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct EngineOptions {
    pub tol: f64,
    pub start: Option<Vec<f64>>,
    pub max_outer: usize,
    pub max_inner: usize,
    pub polish: bool,
}

impl EngineOptions {
    pub(crate) fn new(tol: f64) -> Self {
        Self {
            tol,
            start: None,
            max_outer: 80,
            max_inner: 50_000,
            polish: true,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct EngineResult {
    pub u: Vec<f64>,
    pub su: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// one entry per region node; zero where `ψ` is infinite
    pub state: Vec<f64>,
    pub kkt: KktResiduals,
    pub iterations: usize,
}

pub(crate) fn minimize(
    set: &AdmissibleSet,
    objective: &Objective,
    opts: &EngineOptions,
) -> Result<EngineResult> {
    if !(opts.tol > 0.0) || !opts.tol.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let qp = Qp::new(set, objective)?;
    let mut start = match &opts.start {
        Some(s) => {
            set.grid().check_len(s.len())?;
            s.clone()
        }
        None => objective.center.clone(),
    };
    clamp_in_place(&mut start, qp.upper);

    let al = qp.augmented_lagrangian(start, opts)?;
    let mut best = qp.finish(al.u, al.eta, al.iterations);
    if opts.polish && qp.can_polish() && best.kkt.max() > 0.0 {
        let pol = qp.polish(&best.u, &best.row_eta);
        if let Some((u, eta, iters)) = pol {
            let candidate = qp.finish(u, eta, best.iterations + iters);
            if candidate.kkt.max() < best.kkt.max() {
                best = candidate;
            }
        }
    }
    let residual = best.kkt.max();
    if !(residual <= opts.tol) {
        return Err(Error::NonConvergence {
            iterations: best.iterations,
            residual,
        });
    }
    Ok(best.into_result(set))
}

struct AlOutcome {
    u: Vec<f64>,
    eta: Vec<f64>,
    iterations: usize,
}

struct Finished {
    u: Vec<f64>,
    su: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    row_eta: Vec<f64>,
    rows: Vec<StateRow>,
    kkt: KktResiduals,
    iterations: usize,
}

impl Finished {
    fn into_result(self, set: &AdmissibleSet) -> EngineResult {
        let mut state = vec![0.0; set.state().region().len()];
        for (r, e) in self.rows.iter().zip(&self.row_eta) {
            state[r.pos] = *e;
        }
        EngineResult {
            u: self.u,
            su: self.su,
            lower: self.lower,
            upper: self.upper,
            state,
            kkt: self.kkt,
            iterations: self.iterations,
        }
    }
}

struct Qp<'a> {
    op: &'a AssembledOperator,
    obj: &'a Objective,
    upper: &'a [f64],
    rows: Vec<StateRow>,
    shift: f64,
    len: usize,
}

impl<'a> Qp<'a> {
    fn new(set: &'a AdmissibleSet, obj: &'a Objective) -> Result<Self> {
        let len = set.grid().len();
        set.grid().check_len(obj.center.len())?;
        if obj.gamma != 0.0 {
            set.grid().check_len(obj.data.len())?;
        }
        if !(obj.beta > 0.0) {
            return Err(Error::AlphaNonPositive(obj.beta));
        }
        Ok(Self {
            op: set.operator(),
            obj,
            upper: set.bounds().upper().values(),
            rows: set.state_rows(),
            shift: set.state().shift(),
            len,
        })
    }

    fn needs_state(&self) -> bool {
        self.obj.gamma != 0.0 || !self.rows.is_empty()
    }

    fn apply(&self, u: &[f64]) -> Vec<f64> {
        if self.needs_state() {
            self.op.apply_slice(u)
        } else {
            vec![0.0; self.len]
        }
    }

    fn norm(&self, v: &[f64]) -> f64 {
        weighted_norm(self.op.grid(), v)
    }

    /// `c_j = shift·u + Su − ψ` on the finite rows.
    fn constraint(&self, u: &[f64], su: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| self.shift * u[r.node] + su[r.node] - r.psi)
            .collect()
    }

    /// `2γS*(Su − y) + 2β(u − c) + (shift + S*) E m`
    fn gradient(&self, u: &[f64], su: &[f64], m: &[f64]) -> Vec<f64> {
        let mut inner = vec![0.0; self.len];
        let mut any = false;
        if self.obj.gamma != 0.0 {
            for ((v, s), y) in inner.iter_mut().zip(su).zip(&self.obj.data) {
                *v = 2.0 * self.obj.gamma * (s - y);
            }
            any = true;
        }
        for (r, &mj) in self.rows.iter().zip(m) {
            if mj != 0.0 {
                inner[r.node] += mj;
                any = true;
            }
        }
        let mut g = if any {
            self.op.apply_adjoint_slice(&inner)
        } else {
            vec![0.0; self.len]
        };
        for ((gi, ui), ci) in g.iter_mut().zip(u).zip(&self.obj.center) {
            *gi += 2.0 * self.obj.beta * (ui - ci);
        }
        for (r, &mj) in self.rows.iter().zip(m) {
            g[r.node] += self.shift * mj;
        }
        g
    }

    fn operator_norm(&self) -> f64 {
        if self.needs_state() {
            (self.op.norm_squared() * NORM_SAFETY).sqrt()
        } else {
            0.0
        }
    }

    /// Accelerated projected gradient on the box for the augmented Lagrangian.
    fn inner(
        &self,
        x0: Vec<f64>,
        eta: &[f64],
        rho: f64,
        lip: f64,
        tol: f64,
        max_iter: usize,
    ) -> (Vec<f64>, usize) {
        let mut x = x0;
        let mut y = x.clone();
        let mut t = 1.0f64;
        for k in 1..=max_iter {
            let sy = self.apply(&y);
            let c = self.constraint(&y, &sy);
            let m: Vec<f64> = c
                .iter()
                .zip(eta)
                .map(|(c, e)| (e + rho * c).max(0.0))
                .collect();
            let g = self.gradient(&y, &sy, &m);
            let mut x_new: Vec<f64> = y.iter().zip(&g).map(|(yi, gi)| yi - gi / lip).collect();
            clamp_in_place(&mut x_new, self.upper);
            let step: Vec<f64> = x_new.iter().zip(&y).map(|(a, b)| a - b).collect();
            if lip * self.norm(&step) <= tol {
                return (x_new, k);
            }
            let dir: f64 = g
                .iter()
                .zip(x_new.iter().zip(&x))
                .map(|(g, (a, b))| g * (a - b))
                .sum();
            if dir > 0.0 {
                t = 1.0;
                y = x_new.clone();
            } else {
                let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                let beta = (t - 1.0) / t_new;
                y = x_new
                    .iter()
                    .zip(&x)
                    .map(|(a, b)| a + beta * (a - b))
                    .collect();
                t = t_new;
            }
            x = x_new;
        }
        (x, max_iter)
    }

    fn augmented_lagrangian(&self, start: Vec<f64>, opts: &EngineOptions) -> Result<AlOutcome> {
        let snorm = self.operator_norm();
        let base = 2.0 * self.obj.gamma * snorm * snorm + 2.0 * self.obj.beta;
        let row_norm = self.shift.abs() + snorm;
        let row_sq = row_norm * row_norm;
        let rho_max = if row_sq > 0.0 {
            PENALTY_RANGE * base / row_sq
        } else {
            f64::INFINITY
        };
        // gradient-mapping size g bounds the distance to the subproblem minimizer by g/(2β)
        let inner_tol = opts.tol / 10.0 * (2.0 * self.obj.beta).min(1.0);

        let mut x = start;
        let mut eta = vec![0.0; self.rows.len()];
        let mut rho = self.obj.beta;
        let mut prev_inf = f64::INFINITY;
        let mut iterations = 0;
        for _ in 0..opts.max_outer {
            let lip = base + rho * row_sq;
            let (xn, it) = self.inner(x, &eta, rho, lip, inner_tol, opts.max_inner);
            x = xn;
            iterations += it;
            if self.rows.is_empty() {
                break;
            }
            let sx = self.apply(&x);
            let c = self.constraint(&x, &sx);
            let inf = c.iter().fold(0.0f64, |a, &c| a.max(c));
            for (e, ci) in eta.iter_mut().zip(&c) {
                *e = (*e + rho * ci).max(0.0);
            }
            let (kkt, ..) = self.kkt(&x, &sx, &eta);
            if kkt.max() <= opts.tol {
                break;
            }
            if inf > 0.1 * opts.tol && inf > 0.25 * prev_inf {
                rho *= 10.0;
                if rho > rho_max {
                    return Err(Error::InfeasibleProblem {
                        infeasibility: inf,
                        penalty: rho,
                    });
                }
            }
            prev_inf = inf;
        }
        Ok(AlOutcome {
            u: x,
            eta,
            iterations,
        })
    }

    /// Residuals and box multipliers at `u` for given state multipliers.
    fn kkt(&self, u: &[f64], su: &[f64], eta: &[f64]) -> (KktResiduals, Vec<f64>, Vec<f64>) {
        let s = self.gradient(u, su, eta);
        let mut lower = vec![0.0; self.len];
        let mut upper = vec![0.0; self.len];
        let mut res = s.clone();
        let mut primal = 0.0f64;
        let mut comp = 0.0f64;
        for i in 0..self.len {
            let b = self.upper[i];
            primal = primal.max(-u[i]).max(u[i] - b);
            if u[i] <= b - u[i] {
                lower[i] = s[i].max(0.0);
                comp = comp.max((lower[i] * u[i]).abs());
            } else {
                upper[i] = (-s[i]).max(0.0);
                comp = comp.max((upper[i] * (b - u[i])).abs());
            }
            res[i] = s[i] - lower[i] + upper[i];
        }
        let c = self.constraint(u, su);
        let mut dual = 0.0f64;
        for (cj, ej) in c.iter().zip(eta) {
            primal = primal.max(*cj);
            dual = dual.max(-ej);
            comp = comp.max((cj * ej).abs());
        }
        let kkt = KktResiduals {
            stationarity: self.norm(&res),
            primal,
            dual,
            complementarity: comp,
        };
        (kkt, lower, upper)
    }

    fn finish(&self, u: Vec<f64>, eta: Vec<f64>, iterations: usize) -> Finished {
        let su = self.op.apply_slice(&u);
        let (kkt, lower, upper) = self.kkt(&u, &su, &eta);
        Finished {
            u,
            su,
            lower,
            upper,
            row_eta: eta,
            rows: self.rows.clone(),
            kkt,
            iterations,
        }
    }

    fn can_polish(&self) -> bool {
        if self.obj.gamma == 0.0 {
            self.rows.len() <= DENSE_CAP
        } else {
            self.op.has_dense()
        }
    }

    /// Primal-dual active-set refinement started from the sets suggested by `(u, eta)`.
    fn polish(&self, u: &[f64], eta: &[f64]) -> Option<(Vec<f64>, Vec<f64>, usize)> {
        let kkt = ExactKkt::new(self)?;
        let n = self.len;
        // 0 free, 1 lower, 2 upper
        let mut boxes: Vec<u8> = (0..n)
            .map(|i| {
                if u[i] <= 0.0 {
                    1
                } else if u[i] >= self.upper[i] {
                    2
                } else {
                    0
                }
            })
            .collect();
        let mut active: Vec<bool> = eta.iter().map(|&e| e > 0.0).collect();
        let mut seen = HashSet::new();
        let mut single = false;
        for it in 1..=MAX_POLISH {
            let (x, nu) = kkt.solve(&boxes, &active)?;
            let s = kkt.residual_gradient(&x, &nu, &active);
            let c = kkt.constraint(&x);
            let scale_u = 1.0 + x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let scale_d = 1.0 + kkt.q.amax();
            let eps_p = 1e-13 * scale_u;
            let eps_d = 1e-12 * scale_d;

            // (violation relative to its threshold, kind, index)
            let mut changes: Vec<(f64, u8, usize)> = Vec::new();
            for i in 0..n {
                match boxes[i] {
                    0 if x[i] < -eps_p => changes.push((-x[i] / eps_p, 1, i)),
                    0 if x[i] > self.upper[i] + eps_p => {
                        changes.push(((x[i] - self.upper[i]) / eps_p, 2, i))
                    }
                    1 if s[i] < -eps_d => changes.push((-s[i] / eps_d, 0, i)),
                    2 if s[i] > eps_d => changes.push((s[i] / eps_d, 0, i)),
                    _ => {}
                }
            }
            for j in 0..active.len() {
                if active[j] && nu[j] < -eps_d {
                    changes.push((-nu[j] / eps_d, 4, j));
                } else if !active[j] && c[j] > eps_p {
                    changes.push((c[j] / eps_p, 3, j));
                }
            }
            if changes.is_empty() {
                let eta: Vec<f64> = nu
                    .iter()
                    .zip(&active)
                    .map(|(v, &a)| if a { v.max(0.0) } else { 0.0 })
                    .collect();
                return Some((x, eta, it));
            }
            if !single && !seen.insert((boxes.clone(), active.clone())) {
                single = true;
            }
            if single {
                let pick = *changes.iter().max_by(|a, b| a.0.total_cmp(&b.0)).unwrap();
                changes = vec![pick];
            }
            for (_, kind, idx) in changes {
                match kind {
                    0..=2 => boxes[idx] = kind,
                    3 => active[idx] = true,
                    _ => active[idx] = false,
                }
            }
        }
        None
    }
}

/// Dense KKT data scaled to densities: `H = 2γMᵀM + 2βI`, `q = −2γMᵀy − 2βc`.
struct ExactKkt<'q, 'a> {
    qp: &'q Qp<'a>,
    /// `None` when `H = 2βI`
    h: Option<DMatrix<f64>>,
    q: DVector<f64>,
    /// constraint gradients `shift·e_j + M_jᵀ`, one row each
    rows: DMatrix<f64>,
}

impl<'q, 'a> ExactKkt<'q, 'a> {
    fn new(qp: &'q Qp<'a>) -> Option<Self> {
        let n = qp.len;
        let obj = qp.obj;
        let mut q = DVector::from_fn(n, |i, _| -2.0 * obj.beta * obj.center[i]);
        let h = if obj.gamma != 0.0 {
            let w = qp.op.grid().weight(0);
            let gram = qp.op.gram().ok()?;
            let mut h = gram * (2.0 * obj.gamma / w);
            for i in 0..n {
                h[(i, i)] += 2.0 * obj.beta;
            }
            let sty = qp.op.apply_adjoint_slice(&obj.data);
            for i in 0..n {
                q[i] -= 2.0 * obj.gamma * sty[i];
            }
            Some(h)
        } else {
            None
        };
        let mut rows = DMatrix::zeros(qp.rows.len(), n);
        for (j, r) in qp.rows.iter().enumerate() {
            let m = qp.op.row(r.node);
            for (k, v) in m.iter().enumerate() {
                rows[(j, k)] = *v;
            }
            rows[(j, r.node)] += qp.shift;
        }
        Some(Self { qp, h, q, rows })
    }

    fn hess_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.h {
            Some(h) => h * x,
            None => x * (2.0 * self.qp.obj.beta),
        }
    }

    fn constraint(&self, x: &[f64]) -> Vec<f64> {
        let xv = DVector::from_column_slice(x);
        let ax = &self.rows * xv;
        self.qp
            .rows
            .iter()
            .enumerate()
            .map(|(j, r)| ax[j] - r.psi)
            .collect()
    }

    /// `Hx + q + Σ_active ν_j a_j`
    fn residual_gradient(&self, x: &[f64], nu: &[f64], active: &[bool]) -> Vec<f64> {
        let xv = DVector::from_column_slice(x);
        let mut s = self.hess_vec(&xv) + &self.q;
        for (j, &a) in active.iter().enumerate() {
            if a && nu[j] != 0.0 {
                s += self.rows.row(j).transpose() * nu[j];
            }
        }
        s.iter().copied().collect()
    }

    /// Solves the equality-constrained system for the given working sets.
    fn solve(&self, boxes: &[u8], active: &[bool]) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = self.qp.len;
        let free: Vec<usize> = (0..n).filter(|&i| boxes[i] == 0).collect();
        let act: Vec<usize> = (0..active.len()).filter(|&j| active[j]).collect();
        let mut x = vec![0.0; n];
        for i in 0..n {
            if boxes[i] == 2 {
                x[i] = self.qp.upper[i];
            }
        }
        let xv = DVector::from_column_slice(&x);
        // gradient of the fixed part restricted to the free nodes
        let hx = self.hess_vec(&xv);
        let nf = free.len();
        let q_f = DVector::from_fn(nf, |k, _| self.q[free[k]] + hx[free[k]]);
        let g = DMatrix::from_fn(act.len(), nf, |a, k| self.rows[(act[a], free[k])]);
        let ax = &self.rows * &xv;
        let r = DVector::from_fn(act.len(), |a, _| self.qp.rows[act[a]].psi - ax[act[a]]);

        let (z0, z) = match &self.h {
            Some(h) => {
                let h_ff = DMatrix::from_fn(nf, nf, |a, b| h[(free[a], free[b])]);
                let chol = Cholesky::<f64, Dyn>::new(h_ff)?;
                (chol.solve(&(-&q_f)), chol.solve(&g.transpose()))
            }
            None => {
                let inv = 1.0 / (2.0 * self.qp.obj.beta);
                (-&q_f * inv, g.transpose() * inv)
            }
        };
        let mut nu_act = DVector::zeros(act.len());
        let mut u_f = z0.clone();
        if !act.is_empty() {
            let k = &g * &z;
            let rhs = &g * &z0 - &r;
            let svd = k.svd(true, true);
            let cut = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
            nu_act = svd.solve(&rhs, cut).ok()?;
            u_f -= &z * &nu_act;
        }
        for (k, &i) in free.iter().enumerate() {
            x[i] = u_f[k];
        }
        let mut nu = vec![0.0; active.len()];
        for (a, &j) in act.iter().enumerate() {
            nu[j] = nu_act[a];
        }
        Some((x, nu))
    }
}
