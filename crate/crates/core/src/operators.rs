//! Discrete forward operators `S : L²(D) -> L²(D)`.
//!
//! Two families are provided:
//!
//! * the solution operator of `-Δy = u` with homogeneous Dirichlet data,
//!   discretized by the standard second order central difference stencil;
//! * Fredholm integral operators `Su(x) = ∫ k(x,x') u(x') dx'` with a smooth
//!   kernel, discretized with the grid quadrature, `S_ij = w_j k(x_i, x_j)`.
//!
//! Adjoints are taken in the weighted inner product of [`GridFunction`], so the
//! discrete adjoint of a matrix `M` is `W⁻¹ Mᵀ W`.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::banded::BandedCholesky;
use crate::error::{Error, Result};
use crate::grid::{weighted_dot, weighted_norm, DomainGrid, GridFunction};

/// Largest node count for which dense matrices are formed.
pub const DENSE_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Poisson,
    Fredholm,
}

/// Built-in Lipschitz kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `k(x, x') = value`
    Constant { value: f64 },
    /// `k(x, x') = scale * (x · x')`
    Separable { scale: f64 },
    /// `k(x, x') = scale * exp(-|x - x'|² / width²)`
    Gaussian { scale: f64, width: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = match *self {
            KernelSpec::Constant { value } => value.is_finite(),
            KernelSpec::Separable { scale } => scale.is_finite(),
            KernelSpec::Gaussian { scale, width } => {
                if !(width > 0.0) {
                    return Err(Error::InvalidKernelParameter(format!(
                        "gaussian width must be positive, got {width}"
                    )));
                }
                scale.is_finite() && width.is_finite()
            }
        };
        if finite {
            Ok(())
        } else {
            Err(Error::InvalidKernelParameter(
                "kernel parameters must be finite".into(),
            ))
        }
    }

    pub fn eval(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        match *self {
            KernelSpec::Constant { value } => value,
            KernelSpec::Separable { scale } => scale * (x[0] * y[0] + x[1] * y[1]),
            KernelSpec::Gaussian { scale, width } => {
                let d2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
                scale * (-d2 / (width * width)).exp()
            }
        }
    }

    pub fn is_symmetric(&self) -> bool {
        true
    }
}

/// How the operator should be stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Storage {
    /// Dense matrices are formed on first use when the grid is small enough.
    #[default]
    Auto,
    /// Form the dense matrix eagerly; fails beyond [`DENSE_CAP`].
    Dense,
}

#[derive(Debug)]
enum Repr {
    /// `S = A⁻¹`, `A` the five/three point Laplacian, kept as a band factor.
    Poisson {
        factor: BandedCholesky,
    },
    Dense {
        matrix: DMatrix<f64>,
    },
}

/// A discrete forward operator together with cached derived data.
///
/// Immutable after construction; the lazily computed caches are behind
/// `OnceLock`, so shared references can be used from several threads.
#[derive(Debug)]
pub struct AssembledOperator {
    kind: OperatorKind,
    kernel: Option<KernelSpec>,
    grid: DomainGrid,
    repr: Repr,
    dense: OnceLock<DMatrix<f64>>,
    adjoint: OnceLock<DMatrix<f64>>,
    gram: OnceLock<DMatrix<f64>>,
    norm_sq: OnceLock<f64>,
}

pub fn assemble_poisson(grid: &DomainGrid) -> Result<AssembledOperator> {
    assemble_poisson_with(grid, Storage::Auto)
}

pub fn assemble_poisson_with(grid: &DomainGrid, storage: Storage) -> Result<AssembledOperator> {
    let n = grid.nodes_per_axis();
    let len = grid.len();
    if storage == Storage::Dense && len > DENSE_CAP {
        return Err(Error::GridTooLarge {
            nodes: len,
            cap: DENSE_CAP,
        });
    }
    let h2 = grid.spacing().powi(2);
    let dim = grid.dim();
    let bandwidth = if dim == 1 { 1 } else { n };
    let entry = |i: usize, j: usize| -> f64 {
        if i == j {
            return 2.0 * dim as f64 / h2;
        }
        let [xi, yi] = grid.axis_indices(i);
        let [xj, yj] = grid.axis_indices(j);
        let adjacent = (yi == yj && xi.abs_diff(xj) == 1) || (xi == xj && yi.abs_diff(yj) == 1);
        if adjacent {
            -1.0 / h2
        } else {
            0.0
        }
    };
    let factor = BandedCholesky::factor(len, bandwidth, entry)
        .ok_or_else(|| Error::InvalidGrid("discrete Laplacian is not positive definite".into()))?;
    let op = AssembledOperator::new(OperatorKind::Poisson, None, *grid, Repr::Poisson { factor });
    if storage == Storage::Dense {
        op.dense_matrix()?;
    }
    Ok(op)
}

pub fn assemble_fredholm(grid: &DomainGrid, kernel: KernelSpec) -> Result<AssembledOperator> {
    kernel.validate()?;
    let len = grid.len();
    if len > DENSE_CAP {
        return Err(Error::GridTooLarge {
            nodes: len,
            cap: DENSE_CAP,
        });
    }
    let coords: Vec<[f64; 2]> = (0..len).map(|i| grid.coords(i)).collect();
    let matrix = DMatrix::from_fn(len, len, |i, j| {
        grid.weight(j) * kernel.eval(coords[i], coords[j])
    });
    Ok(AssembledOperator::new(
        OperatorKind::Fredholm,
        Some(kernel),
        *grid,
        Repr::Dense { matrix },
    ))
}

impl AssembledOperator {
    fn new(kind: OperatorKind, kernel: Option<KernelSpec>, grid: DomainGrid, repr: Repr) -> Self {
        Self {
            kind,
            kernel,
            grid,
            repr,
            dense: OnceLock::new(),
            adjoint: OnceLock::new(),
            gram: OnceLock::new(),
            norm_sq: OnceLock::new(),
        }
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn kernel(&self) -> Option<KernelSpec> {
        self.kernel
    }

    pub fn grid(&self) -> &DomainGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_self_adjoint(&self) -> bool {
        match self.kind {
            OperatorKind::Poisson => true,
            OperatorKind::Fredholm => self.kernel.is_some_and(|k| k.is_symmetric()),
        }
    }

    /// Whether dense matrices can be formed for this grid.
    pub fn has_dense(&self) -> bool {
        matches!(self.repr, Repr::Dense { .. }) || self.len() <= DENSE_CAP
    }

    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        self.grid.check_len(u.len())?;
        if u.grid() != &self.grid {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: u.len(),
            });
        }
        GridFunction::new(self.grid, self.apply_slice(u.values()))
    }

    pub fn apply_adjoint(&self, y: &GridFunction) -> Result<GridFunction> {
        self.grid.check_len(y.len())?;
        if y.grid() != &self.grid {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: y.len(),
            });
        }
        GridFunction::new(self.grid, self.apply_adjoint_slice(y.values()))
    }

    pub(crate) fn apply_slice(&self, u: &[f64]) -> Vec<f64> {
        match &self.repr {
            Repr::Poisson { factor } => {
                let mut y = u.to_vec();
                factor.solve_in_place(&mut y);
                y
            }
            Repr::Dense { matrix } => mat_vec(matrix, u),
        }
    }

    pub(crate) fn apply_adjoint_slice(&self, y: &[f64]) -> Vec<f64> {
        match &self.repr {
            // symmetric matrix, uniform weights
            Repr::Poisson { .. } => self.apply_slice(y),
            Repr::Dense { matrix } => {
                // W⁻¹ Mᵀ W y; the weights are uniform so they cancel
                mat_t_vec(matrix, y)
            }
        }
    }

    /// Dense matrix of `S` acting on node values.
    pub fn dense_matrix(&self) -> Result<&DMatrix<f64>> {
        match &self.repr {
            Repr::Dense { matrix } => Ok(matrix),
            Repr::Poisson { factor } => {
                let len = self.len();
                if len > DENSE_CAP {
                    return Err(Error::GridTooLarge {
                        nodes: len,
                        cap: DENSE_CAP,
                    });
                }
                Ok(self.dense.get_or_init(|| {
                    let mut m = DMatrix::zeros(len, len);
                    let mut col = vec![0.0; len];
                    for j in 0..len {
                        col.iter_mut().for_each(|c| *c = 0.0);
                        col[j] = 1.0;
                        factor.solve_in_place(&mut col);
                        m.column_mut(j).copy_from_slice(&col);
                    }
                    // exact symmetry; the solves agree to round-off
                    let t = m.transpose();
                    (m + t) * 0.5
                }))
            }
        }
    }

    /// Dense matrix of `S*` in the weighted inner product, `W⁻¹ Mᵀ W`.
    pub fn adjoint_matrix(&self) -> Result<&DMatrix<f64>> {
        let m = self.dense_matrix()?;
        Ok(self.adjoint.get_or_init(|| {
            let w = self.grid.weights();
            DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(j, i)] * w[j] / w[i])
        }))
    }

    /// `Mᵀ W M`, the Euclidean Hessian block of `‖Su - y‖²` up to a factor 2.
    pub(crate) fn gram(&self) -> Result<&DMatrix<f64>> {
        let m = self.dense_matrix()?;
        Ok(self.gram.get_or_init(|| {
            let w = self.grid.weight(0);
            let g = m.transpose() * m * w;
            let t = g.transpose();
            (g + t) * 0.5
        }))
    }

    /// Row `r` of the node matrix of `S`.
    pub(crate) fn row(&self, r: usize) -> Vec<f64> {
        if let Ok(m) = self.dense_matrix() {
            return m.row(r).iter().copied().collect();
        }
        // row r of M is W S* W⁻¹ e_r; uniform weights cancel
        let mut e = vec![0.0; self.len()];
        e[r] = 1.0;
        self.apply_adjoint_slice(&e)
    }

    /// Largest eigenvalue of `S*S`, estimated by power iteration.
    pub fn norm_squared(&self) -> f64 {
        *self.norm_sq.get_or_init(|| {
            power_iteration(&self.grid, |v| {
                self.apply_adjoint_slice(&self.apply_slice(v))
            })
        })
    }
}

/// Largest eigenvalue of a self-adjoint positive semidefinite map.
pub(crate) fn power_iteration(grid: &DomainGrid, op: impl Fn(&[f64]) -> Vec<f64>) -> f64 {
    let len = grid.len();
    let mut v: Vec<f64> = (0..len)
        .map(|i| 1.0 + 0.3 * ((i as f64) * 0.7).sin())
        .collect();
    let mut estimate = 0.0;
    for _ in 0..500 {
        let nv = weighted_norm(grid, &v);
        if nv == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let av = op(&v);
        let rayleigh = weighted_dot(grid, &v, &av);
        v = av;
        if (rayleigh - estimate).abs() <= 1e-12 * rayleigh.abs() {
            return rayleigh;
        }
        estimate = rayleigh;
    }
    estimate
}

pub(crate) fn mat_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; m.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj != 0.0 {
            for (yi, mij) in y.iter_mut().zip(m.column(j).iter()) {
                *yi += mij * xj;
            }
        }
    }
    y
}

pub(crate) fn mat_t_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..m.ncols())
        .map(|j| m.column(j).iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid1(n: usize) -> DomainGrid {
        DomainGrid::new(1, n).unwrap()
    }

    #[test]
    fn zero_maps_to_zero() {
        let g = grid1(10);
        let s = assemble_poisson(&g).unwrap();
        assert_eq!(s.apply(&g.zeros()).unwrap().sup_norm(), 0.0);
        let k = assemble_fredholm(&g, KernelSpec::Constant { value: 0.0 }).unwrap();
        assert_eq!(k.apply(&g.sample(|x| x[0].exp())).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn poisson_reproduces_quadratic() {
        // the central difference stencil is exact on quadratics
        for n in [8, 33, 100] {
            let g = grid1(n);
            let s = assemble_poisson(&g).unwrap();
            let y = s.apply(&g.constant(1.0)).unwrap();
            let exact = g.sample(|x| x[0] * (1.0 - x[0]) / 2.0);
            assert!(y.sub(&exact).sup_norm() <= 1e-12, "n = {n}");
        }
    }

    #[test]
    fn poisson_dense_and_band_agree() {
        let g = DomainGrid::new(2, 6).unwrap();
        let s = assemble_poisson_with(&g, Storage::Dense).unwrap();
        let u = g.sample(|x| (3.0 * x[0]).sin() + x[1]);
        let by_band = s.apply(&u).unwrap();
        let by_dense = mat_vec(s.dense_matrix().unwrap(), u.values());
        for (a, b) in by_band.values().iter().zip(&by_dense) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn dense_cap_enforced() {
        let g = DomainGrid::new(2, 65).unwrap();
        assert!(matches!(
            assemble_poisson_with(&g, Storage::Dense),
            Err(Error::GridTooLarge { nodes: 4225, .. })
        ));
        assert!(matches!(
            assemble_fredholm(&g, KernelSpec::Constant { value: 1.0 }),
            Err(Error::GridTooLarge { .. })
        ));
        // the band factorization still works
        let s = assemble_poisson(&g).unwrap();
        let y = s.apply(&g.constant(1.0)).unwrap();
        assert!(y.max() > 0.07 && y.max() < 0.08);
        assert!(s.dense_matrix().is_err());
    }

    #[test]
    fn fredholm_quadrature_oracles() {
        let g = grid1(40);
        let one = g.constant(1.0);
        let k1 = assemble_fredholm(&g, KernelSpec::Constant { value: 1.0 }).unwrap();
        let y = k1.apply(&one).unwrap();
        assert!(y
            .values()
            .iter()
            .all(|v| (v - 1.0).abs() <= 2.0 * g.spacing()));

        let kx = assemble_fredholm(&g, KernelSpec::Separable { scale: 1.0 }).unwrap();
        let y = kx.apply(&one).unwrap();
        // sum_j h x_j = h^2 n(n+1)/2 = n/(2(n+1)) -> 1/2
        let exact = g.sample(|x| x[0] / 2.0);
        assert!(y.sub(&exact).sup_norm() <= 2.0 * g.spacing());
    }

    #[test]
    fn gaussian_width_must_be_positive() {
        let g = grid1(5);
        for width in [0.0, -1.0] {
            assert!(matches!(
                assemble_fredholm(&g, KernelSpec::Gaussian { scale: 1.0, width }),
                Err(Error::InvalidKernelParameter(_))
            ));
        }
    }

    #[test]
    fn mismatched_grids_rejected() {
        let s = assemble_poisson(&grid1(5)).unwrap();
        let u = grid1(6).constant(1.0);
        assert!(matches!(s.apply(&u), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(
            s.apply_adjoint(&u),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn norm_estimate_matches_smallest_laplacian_eigenvalue() {
        let g = grid1(31);
        let s = assemble_poisson(&g).unwrap();
        let h = g.spacing();
        let lambda_min = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
        assert!((s.norm_squared() - lambda_min.powi(-2)).abs() < 1e-9 * lambda_min.powi(-2));
    }
}
