//! Uniform interior-node grids on the unit cube and the discrete L² space
//! living on them.
//!
//! Boundary nodes are eliminated: a grid with `n` nodes per axis stores the
//! `n^d` interior nodes `x_k = k h`, `k = 1..=n`, `h = 1/(n+1)`. Every node
//! carries the quadrature weight `h^d`, and the inner product of two grid
//! functions is `<u, v> = sum_i w_i u_i v_i`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interior-node grid on `(0,1)^d`, `d` in `{1, 2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainGrid {
    dim: usize,
    n: usize,
}

impl DomainGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if n < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 nodes per axis, got {n}"
            )));
        }
        Ok(Self { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nodes per axis.
    pub fn nodes_per_axis(&self) -> usize {
        self.n
    }

    /// Total node count `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.n as f64 + 1.0)
    }

    /// Quadrature weight of node `i` (uniform, `h^d`).
    pub fn weight(&self, _i: usize) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn weights(&self) -> Vec<f64> {
        vec![self.weight(0); self.len()]
    }

    /// Per-axis integer position of node `i` (x index first).
    pub fn axis_indices(&self, i: usize) -> [usize; 2] {
        match self.dim {
            1 => [i, 0],
            _ => [i % self.n, i / self.n],
        }
    }

    pub fn index_of(&self, ix: usize, iy: usize) -> usize {
        match self.dim {
            1 => ix,
            _ => ix + self.n * iy,
        }
    }

    /// Coordinates of node `i`; the second entry is unused in 1D.
    pub fn coords(&self, i: usize) -> [f64; 2] {
        let h = self.spacing();
        let [ix, iy] = self.axis_indices(i);
        match self.dim {
            1 => [(ix + 1) as f64 * h, 0.0],
            _ => [(ix + 1) as f64 * h, (iy + 1) as f64 * h],
        }
    }

    /// True when node `i` is adjacent to the boundary along some axis.
    pub fn touches_boundary(&self, i: usize) -> bool {
        let [ix, iy] = self.axis_indices(i);
        let edge = |k: usize| k == 0 || k + 1 == self.n;
        edge(ix) || (self.dim == 2 && edge(iy))
    }

    pub fn zeros(&self) -> GridFunction {
        GridFunction {
            grid: *self,
            values: vec![0.0; self.len()],
        }
    }

    pub fn constant(&self, c: f64) -> GridFunction {
        GridFunction {
            grid: *self,
            values: vec![c; self.len()],
        }
    }

    /// Samples `f` at the node coordinates.
    pub fn sample(&self, f: impl Fn([f64; 2]) -> f64) -> GridFunction {
        let values = (0..self.len()).map(|i| f(self.coords(i))).collect();
        GridFunction {
            grid: *self,
            values,
        }
    }

    pub fn function(&self, values: Vec<f64>) -> Result<GridFunction> {
        GridFunction::new(*self, values)
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: len,
            });
        }
        Ok(())
    }
}

/// A discretized element of `L²(D)`: one value per interior node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    grid: DomainGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: DomainGrid, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &DomainGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(())
    }

    /// Weighted inner product `sum_i w_i u_i v_i`.
    pub fn inner(&self, other: &GridFunction) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        weighted_dot(&self.grid, &self.values, &other.values)
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, a: f64) -> GridFunction {
        self.map(|v| a * v)
    }

    /// `self + a * other`.
    pub fn add_scaled(&self, a: f64, other: &GridFunction) -> GridFunction {
        debug_assert_eq!(self.grid, other.grid);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| x + a * y)
            .collect();
        GridFunction {
            grid: self.grid,
            values,
        }
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        self.add_scaled(-1.0, other)
    }

    pub fn distance(&self, other: &GridFunction) -> f64 {
        self.sub(other).norm()
    }
}

pub(crate) fn weighted_dot(grid: &DomainGrid, a: &[f64], b: &[f64]) -> f64 {
    let w = grid.weight(0);
    w * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

pub(crate) fn weighted_norm(grid: &DomainGrid, a: &[f64]) -> f64 {
    weighted_dot(grid, a, a).sqrt()
}

/// Node subset standing in for the observation region `D'`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationRegion {
    grid: DomainGrid,
    indices: Vec<usize>,
}

impl ObservationRegion {
    pub fn all(grid: &DomainGrid) -> Self {
        Self {
            grid: *grid,
            indices: (0..grid.len()).collect(),
        }
    }

    /// Nodes whose coordinates lie in the closed box `[lower, upper]`, per axis.
    pub fn from_box(grid: &DomainGrid, lower: &[f64], upper: &[f64]) -> Result<Self> {
        if lower.len() != grid.dim() || upper.len() != grid.dim() {
            return Err(Error::InvalidParameter(format!(
                "region box needs {} coordinates per corner",
                grid.dim()
            )));
        }
        // Slack so that nodes sitting exactly on a face are not lost to rounding.
        let eps = 1e-12;
        let indices: Vec<usize> = (0..grid.len())
            .filter(|&i| {
                let x = grid.coords(i);
                (0..grid.dim()).all(|a| x[a] >= lower[a] - eps && x[a] <= upper[a] + eps)
            })
            .collect();
        Self::from_indices(grid, indices)
    }

    pub fn from_indices(grid: &DomainGrid, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(Error::EmptyRegion);
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= grid.len()) {
            return Err(Error::InvalidParameter(format!(
                "region index {bad} out of range"
            )));
        }
        Ok(Self {
            grid: *grid,
            indices,
        })
    }

    pub fn grid(&self) -> &DomainGrid {
        &self.grid
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// An inner subdomain keeps away from boundary-adjacent nodes.
    pub fn is_inner(&self) -> bool {
        self.indices.iter().all(|&i| !self.grid.touches_boundary(i))
    }
}

/// Values of `y` on the nodes of `region`, in region order.
pub fn restrict(y: &GridFunction, region: &ObservationRegion) -> Vec<f64> {
    region.indices.iter().map(|&i| y.values[i]).collect()
}
