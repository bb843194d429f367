//! Dense primal active-set method for `min ½xᵀHx + qᵀx` s.t. `Ex = e`, `Cx <= d`,
//! with `H` positive definite on the null space of the working constraints.

use nalgebra::{DMatrix, DVector};

pub(crate) struct DenseQp {
    pub h: DMatrix<f64>,
    pub q: DVector<f64>,
    /// equality rows `E`; the right-hand side is implied by the start point
    pub eq: DMatrix<f64>,
    pub ineq: DMatrix<f64>,
    pub ineq_rhs: DVector<f64>,
}

impl DenseQp {
    /// Runs from a feasible `x0`. Returns `None` if the iteration budget runs out.
    pub(crate) fn solve(&self, x0: DVector<f64>) -> Option<(DVector<f64>, usize)> {
        let n = self.h.nrows();
        let m = self.ineq.nrows();
        let scale = 1.0 + self.q.amax() + self.h.amax();
        let eps_d = 1e-12 * scale;
        let mut x = x0;
        let mut working: Vec<usize> = Vec::new();
        let max_iter = 20 * (n + m) + 100;
        for it in 1..=max_iter {
            let g = &self.h * &x + &self.q;
            let (p, nu) = self.step(&g, &working)?;
            let xs = 1.0 + x.amax();
            if p.amax() <= 1e-13 * xs {
                let worst = nu
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v < -eps_d)
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(k, _)| k);
                match worst {
                    None => return Some((x, it)),
                    Some(k) => {
                        working.remove(k);
                        continue;
                    }
                }
            }
            let ap = &self.ineq * &p;
            let ax = &self.ineq * &x;
            let mut t = 1.0;
            let mut blocking = None;
            for i in 0..m {
                if working.contains(&i) || ap[i] <= 1e-14 * p.amax() * self.ineq.row(i).amax() {
                    continue;
                }
                let ti = ((self.ineq_rhs[i] - ax[i]).max(0.0)) / ap[i];
                if ti < t {
                    t = ti;
                    blocking = Some(i);
                }
            }
            x += &p * t;
            if let Some(i) = blocking {
                working.push(i);
            }
        }
        None
    }

    /// Equality-constrained step from the current point; multipliers of the working rows.
    fn step(&self, g: &DVector<f64>, working: &[usize]) -> Option<(DVector<f64>, Vec<f64>)> {
        let n = self.h.nrows();
        let ne = self.eq.nrows();
        let k = ne + working.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&self.h);
        for r in 0..k {
            let row = if r < ne {
                self.eq.row(r)
            } else {
                self.ineq.row(working[r - ne])
            };
            for j in 0..n {
                kkt[(n + r, j)] = row[j];
                kkt[(j, n + r)] = row[j];
            }
        }
        let mut rhs = DVector::zeros(n + k);
        rhs.rows_mut(0, n).copy_from(&(-g));
        let sol = match kkt.clone().lu().solve(&rhs) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => {
                let svd = kkt.svd(true, true);
                let cut = 1e-13 * svd.singular_values.max();
                svd.solve(&rhs, cut).ok()?
            }
        };
        let p = sol.rows(0, n).into_owned();
        let nu = (0..working.len()).map(|r| sol[n + ne + r]).collect();
        Some((p, nu))
    }
}
