#![allow(dead_code)]

use std::sync::Arc;

use proptest::prelude::*;
use tikhlav::{
    assemble_fredholm, assemble_poisson, AdmissibleSet, BoxBounds, DomainGrid, GridFunction,
    KernelSpec, LavrentievSign, ObservationRegion, RegularizedProblem, StateConstraint,
};

/// Parameters of a small random regularized problem.
#[derive(Debug, Clone)]
pub struct Params {
    pub n: usize,
    pub width: Option<f64>,
    pub upper: Vec<Option<f64>>,
    pub psi: Vec<Option<f64>>,
    pub region_start: usize,
    pub lambda: f64,
    pub minus: bool,
    pub y: Vec<f64>,
    pub alpha: f64,
}

pub fn params(max_n: usize) -> impl Strategy<Value = Params> {
    (3..=max_n).prop_flat_map(|n| {
        (
            Just(n),
            prop::option::weighted(0.5, 0.1..1.0f64),
            prop::collection::vec(prop::option::weighted(0.7, 0.05..2.0f64), n),
            prop::collection::vec(prop::option::weighted(0.7, 0.002..0.2f64), n),
            0..n,
            prop_oneof![Just(0.0), 1e-3..0.1f64],
            any::<bool>(),
            prop::collection::vec(-1.0..1.0f64, n),
            -3.0..0.0f64,
        )
            .prop_map(
                |(n, width, upper, psi, region_start, lambda, minus, y, la)| Params {
                    n,
                    width,
                    upper,
                    psi,
                    region_start,
                    lambda,
                    minus,
                    y,
                    alpha: 10f64.powf(la),
                },
            )
    })
}

impl Params {
    pub fn set(&self) -> AdmissibleSet {
        let g = DomainGrid::new(1, self.n).unwrap();
        let op = match self.width {
            None => assemble_poisson(&g).unwrap(),
            Some(width) => {
                assemble_fredholm(&g, KernelSpec::Gaussian { scale: 1.0, width }).unwrap()
            }
        };
        let b = self
            .upper
            .iter()
            .map(|b| b.unwrap_or(f64::INFINITY))
            .collect();
        let bounds = BoxBounds::new(GridFunction::new(g, b).unwrap()).unwrap();
        let region =
            ObservationRegion::from_indices(&g, (self.region_start..self.n).collect()).unwrap();
        let psi = self.psi[self.region_start..]
            .iter()
            .map(|p| p.unwrap_or(f64::INFINITY))
            .collect();
        let sign = if self.minus {
            LavrentievSign::Minus
        } else {
            LavrentievSign::Plus
        };
        let state = StateConstraint::new(region, psi, self.lambda, sign).unwrap();
        AdmissibleSet::new(Arc::new(op), bounds, state).unwrap()
    }

    /// Data scaled so that the constraints are reached for moderate `α`.
    pub fn problem(&self) -> RegularizedProblem {
        let set = self.set();
        let g = *set.grid();
        let scale = if self.width.is_some() { 0.5 } else { 0.2 };
        let y = GridFunction::new(g, self.y.iter().map(|v| scale * v).collect()).unwrap();
        RegularizedProblem::new(set, y, self.alpha).unwrap()
    }
}

/// A feasible point obtained by clamping `v` to the box and shrinking it
/// towards zero until the state constraint holds.
pub fn feasible_point(v: &[f64], set: &AdmissibleSet) -> GridFunction {
    let g = *set.grid();
    let b = set.bounds().upper().values();
    let u: Vec<f64> = v
        .iter()
        .zip(b)
        .map(|(x, b)| x.abs().min(*b).min(5.0))
        .collect();
    let u = GridFunction::new(g, u).unwrap();
    let su = set.operator().apply(&u).unwrap();
    let shift = set.state().shift();
    let mut t = 1.0f64;
    for (k, &i) in set.state().region().indices().iter().enumerate() {
        let psi = set.state().psi()[k];
        let row = shift * u.values()[i] + su.values()[i];
        if psi.is_finite() && row > 0.0 {
            t = t.min(0.999 * psi / row);
        }
    }
    u.scaled(t.max(0.0))
}
