//! Test instances with known exact solutions, noisy data, and recovery of
//! source elements from regularization paths.

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use rand_pcg::rand_core::SeedableRng;
use rand_pcg::Pcg32;
use serde::{Deserialize, Serialize};

use crate::admissible::{feasibility, project_admissible, AdmissibleSet, FeasibilityReport};
use crate::error::{Error, Result};
use crate::grid::{DomainGrid, GridFunction};
use crate::solver::Solution;

/// Singular values below this fraction of the largest count as zero when
/// splitting off the orthogonal complement of the range.
const RANGE_CUTOFF: f64 = 1e-10;

/// How `y_d` relates to `Sū`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DataModel {
    /// `y_d = Sū`
    Attainable,
    /// `y_d = Sū + r`, `r` a seeded random direction scaled to `norm`
    Random { norm: f64, seed: u64 },
    /// as `Random`, with `r` projected onto the orthogonal complement of the
    /// range of `S`; keeps `ū` a minimizer of the residual over `U_ad`
    RangeOrthogonal { norm: f64, seed: u64 },
    /// `y_d = Sū + r` for the given node values of `r`
    Given { residual: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManufacturedInstance {
    pub grid: DomainGrid,
    pub w: GridFunction,
    /// `P_{U_ad}(S*w)`
    pub u_bar: GridFunction,
    pub y_d: GridFunction,
    pub attainable: bool,
    pub data_model: DataModel,
    /// margins of `ū` in `U_ad`
    pub margins: FeasibilityReport,
    /// smallest margin, `min(lower, upper, state)`
    pub tau: f64,
    pub w_norm: f64,
    /// `‖Sū − y_d‖`
    pub residual: f64,
    /// `‖ū − S*w‖`; zero when the projection acts as the identity
    pub source_gap: f64,
    /// `‖ū − P_{U_ad}(ū − t S*(Sū − y_d))‖` with `t = 1/‖S‖²`; zero iff `ū`
    /// minimizes the residual over `U_ad`
    pub optimality_gap: f64,
}

impl ManufacturedInstance {
    /// All margins at least `tau` and `ū = S*w` up to `tol`.
    pub fn is_interior(&self, tau: f64, tol: f64) -> bool {
        self.tau >= tau && self.source_gap <= tol
    }
}

/// Builds `ū = P_{U_ad}(S*w)` and data according to `model`.
pub fn manufacture(
    w: &GridFunction,
    set: &AdmissibleSet,
    model: DataModel,
    tol: f64,
) -> Result<ManufacturedInstance> {
    if set.lambda() != 0.0 {
        return Err(Error::InvalidParameter(
            "instances are built for the unregularized set (lambda = 0)".into(),
        ));
    }
    let op = set.operator();
    let s_star_w = op.apply_adjoint(w)?;
    let u_bar = project_admissible(&s_star_w, set, tol)?;
    let su = op.apply(&u_bar)?;
    let y_d = match &model {
        DataModel::Attainable => su.clone(),
        DataModel::Random { norm, seed } => {
            let r = random_direction(set.grid(), *seed)?;
            su.add_scaled(*norm, &r)
        }
        DataModel::RangeOrthogonal { norm, seed } => {
            let r = random_direction(set.grid(), *seed)?;
            let r = range_complement(set, &r)?;
            let rn = r.norm();
            if rn == 0.0 {
                return Err(Error::InvalidParameter(
                    "the range of S is the whole space".into(),
                ));
            }
            su.add_scaled(*norm / rn, &r)
        }
        DataModel::Given { residual } => {
            su.add_scaled(1.0, &GridFunction::new(*set.grid(), residual.clone())?)
        }
    };
    let margins = feasibility(&u_bar, set)?;
    let residual = su.distance(&y_d);
    let source_gap = u_bar.distance(&s_star_w);
    let t = 1.0 / op.norm_squared().max(f64::MIN_POSITIVE);
    let grad = op.apply_adjoint(&su.sub(&y_d))?;
    let optimality_gap =
        u_bar.distance(&project_admissible(&u_bar.add_scaled(-t, &grad), set, tol)?);
    Ok(ManufacturedInstance {
        grid: *set.grid(),
        w_norm: w.norm(),
        w: w.clone(),
        u_bar,
        y_d,
        attainable: matches!(model, DataModel::Attainable),
        data_model: model,
        tau: margins.tau(),
        margins,
        residual,
        source_gap,
        optimality_gap,
    })
}

/// Unit-norm direction from a seeded standard normal sample.
fn random_direction(grid: &DomainGrid, seed: u64) -> Result<GridFunction> {
    let mut rng = Pcg32::seed_from_u64(seed);
    let values: Vec<f64> = (0..grid.len())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let e = GridFunction::new(*grid, values)?;
    let n = e.norm();
    Ok(e.scaled(1.0 / n))
}

fn range_complement(set: &AdmissibleSet, r: &GridFunction) -> Result<GridFunction> {
    let m = set.operator().dense_matrix()?.clone();
    let svd = m.svd(true, false);
    let u = svd.u.as_ref().expect("requested left singular vectors");
    let smax = svd.singular_values.max();
    let mut out = DVector::from_column_slice(r.values());
    for k in 0..svd.singular_values.len() {
        if svd.singular_values[k] > RANGE_CUTOFF * smax {
            let col = u.column(k);
            let c = col.dot(&out);
            out -= col * c;
        }
    }
    GridFunction::new(*set.grid(), out.as_slice().to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyData {
    pub y_delta: GridFunction,
    pub delta: f64,
    pub seed: u64,
}

/// `y^δ = y_d + δ e/‖e‖` with `e` drawn from a PCG32 stream seeded by `seed`.
pub fn add_noise(y_d: &GridFunction, delta: f64, seed: u64) -> Result<NoisyData> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise level must be >= 0, got {delta}"
        )));
    }
    let y_delta = if delta == 0.0 {
        y_d.clone()
    } else {
        y_d.add_scaled(delta, &random_direction(y_d.grid(), seed)?)
    };
    Ok(NoisyData {
        y_delta,
        delta,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRecovery {
    /// `−(Su_α − y_d)/α` at the smallest `α` of the path
    pub w_est: GridFunction,
    pub alpha: f64,
    /// `‖P_{U_ad}(S*w_est) − u_α‖`
    pub certificate: f64,
    /// `‖Su_α − y_d‖/α` along the path
    pub scaled_residuals: Vec<f64>,
}

/// Source estimate from the last point of a path sorted by decreasing `α`.
pub fn recover_source(
    path: &[(f64, Solution)],
    y_d: &GridFunction,
    set: &AdmissibleSet,
    tol: f64,
) -> Result<SourceRecovery> {
    let (alpha, last) = path.last().ok_or(Error::EmptyPath)?;
    if path.windows(2).any(|p| p[1].0 > p[0].0) {
        return Err(Error::InvalidParameter(
            "path must be sorted by decreasing alpha".into(),
        ));
    }
    let set = set.unregularized();
    let op = set.operator();
    let scaled_residuals = path.iter().map(|(a, s)| s.y.distance(y_d) / a).collect();
    let w_est = last.y.sub(y_d).scaled(-1.0 / alpha);
    let p = project_admissible(&op.apply_adjoint(&w_est)?, &set, tol)?;
    let certificate = p.distance(&last.u);
    Ok(SourceRecovery {
        w_est,
        alpha: *alpha,
        certificate,
        scaled_residuals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalAlpha {
    /// `‖Sū − y_d‖ / ‖w‖`
    pub alpha: f64,
    pub attainable: bool,
}

/// Minimizer of `√α‖w‖ + ‖Sū − y_d‖/√α`.
pub fn optimal_alpha(residual_norm: f64, w_norm: f64) -> Result<OptimalAlpha> {
    if !(w_norm > 0.0) {
        return Err(Error::ZeroSourceNorm);
    }
    if !(residual_norm >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "residual norm must be >= 0, got {residual_norm}"
        )));
    }
    Ok(OptimalAlpha {
        alpha: residual_norm / w_norm,
        attainable: residual_norm == 0.0,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::admissible::{BoxBounds, LavrentievSign, StateConstraint};
    use crate::grid::ObservationRegion;
    use crate::operators::assemble_poisson;

    fn set(n: usize, b: f64, psi: f64) -> AdmissibleSet {
        let g = DomainGrid::new(1, n).unwrap();
        let op = Arc::new(assemble_poisson(&g).unwrap());
        let region = ObservationRegion::from_box(&g, &[0.25], &[0.75]).unwrap();
        let state = StateConstraint::constant(region, psi, 0.0, LavrentievSign::Plus).unwrap();
        AdmissibleSet::new(op, BoxBounds::constant(&g, b).unwrap(), state).unwrap()
    }

    #[test]
    fn zero_source() {
        let s = set(16, 1.0, 0.1);
        let m = manufacture(&s.grid().zeros(), &s, DataModel::Attainable, 1e-10).unwrap();
        assert_eq!(m.u_bar.sup_norm(), 0.0);
        assert_eq!(m.y_d.sup_norm(), 0.0);
        assert!(m.attainable);
    }

    #[test]
    fn interior_source_is_reproduced() {
        let s = set(32, 1.0, 0.1);
        let w = s.grid().sample(|x| if x[0] < 0.5 { 5.0 } else { 0.0 });
        let m = manufacture(&w, &s, DataModel::Attainable, 1e-10).unwrap();
        assert!(m.tau > 0.0);
        assert!(m.source_gap <= 1e-10);
        assert!(m.residual <= 1e-10);
        assert!(m.optimality_gap <= 1e-10);
        assert!(m.is_interior(0.01, 1e-10));
    }

    #[test]
    fn large_source_is_clipped() {
        let s = set(32, 1.0, 10.0);
        let w = s.grid().constant(500.0);
        let m = manufacture(&w, &s, DataModel::Attainable, 1e-10).unwrap();
        let at_upper = m
            .u_bar
            .values()
            .iter()
            .filter(|&&v| v >= 1.0 - 1e-12)
            .count();
        assert!(at_upper > 0);
        assert!(m.source_gap > 0.1);
    }

    #[test]
    fn random_residual_has_requested_norm() {
        let s = set(16, 1.0, 0.1);
        let w = s.grid().constant(1.0);
        let m = manufacture(
            &w,
            &s,
            DataModel::Random {
                norm: 0.01,
                seed: 3,
            },
            1e-10,
        )
        .unwrap();
        assert!((m.residual - 0.01).abs() < 1e-14);
        assert!(!m.attainable);
    }

    #[test]
    fn noise_is_exact_and_deterministic() {
        let g = DomainGrid::new(1, 20).unwrap();
        let y = g.sample(|x| x[0].sin());
        let a = add_noise(&y, 1e-3, 7).unwrap();
        let b = add_noise(&y, 1e-3, 7).unwrap();
        let c = add_noise(&y, 1e-3, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.y_delta, c.y_delta);
        assert!((a.y_delta.distance(&y) - 1e-3).abs() <= 1e-12);
        assert_eq!(add_noise(&y, 0.0, 7).unwrap().y_delta, y);
        assert!(add_noise(&y, -1.0, 7).is_err());
    }

    #[test]
    fn optimal_alpha_arithmetic() {
        assert_eq!(optimal_alpha(0.01, 2.0).unwrap().alpha, 0.005);
        let a = optimal_alpha(0.0, 2.0).unwrap();
        assert_eq!(a.alpha, 0.0);
        assert!(a.attainable);
        assert_eq!(optimal_alpha(0.1, 0.0).unwrap_err(), Error::ZeroSourceNorm);
    }

    #[test]
    fn optimal_alpha_minimizes_bound_on_grid() {
        let (res, wn) = (0.01, 2.0);
        let star = optimal_alpha(res, wn).unwrap().alpha;
        let grid: Vec<f64> = (0..41).map(|k| 10f64.powf(-5.0 + 0.1 * k as f64)).collect();
        let bound = |a: f64| a.sqrt() * wn + res / a.sqrt();
        let best = grid
            .iter()
            .copied()
            .min_by(|a, b| bound(*a).total_cmp(&bound(*b)))
            .unwrap();
        let nearest = grid
            .iter()
            .copied()
            .min_by(|a, b| {
                (a.ln() - star.ln())
                    .abs()
                    .total_cmp(&(b.ln() - star.ln()).abs())
            })
            .unwrap();
        assert_eq!(best, nearest);
    }

    #[test]
    fn empty_path_rejected() {
        let s = set(8, 1.0, 0.1);
        let y = s.grid().zeros();
        assert_eq!(
            recover_source(&[], &y, &s, 1e-8).unwrap_err(),
            Error::EmptyPath
        );
    }
}
