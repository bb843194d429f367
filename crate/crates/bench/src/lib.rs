//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use tikhlav::{
    assemble_poisson, manufacture, AdmissibleSet, BoxBounds, DataModel, DomainGrid, LavrentievSign,
    ObservationRegion, Scenario, StateConstraint,
};

/// Attainable 1D Poisson instance with an inactive state constraint on `[0.25, 0.75]`.
pub fn interior_scenario(n: usize) -> Scenario {
    let g = DomainGrid::new(1, n).expect("valid grid");
    let op = Arc::new(assemble_poisson(&g).expect("poisson assembles"));
    let region = ObservationRegion::from_box(&g, &[0.25], &[0.75]).expect("nonempty region");
    let state = StateConstraint::constant(region, 0.1, 0.0, LavrentievSign::Plus)
        .expect("valid state bound");
    let set = AdmissibleSet::new(
        op,
        BoxBounds::constant(&g, 1.0).expect("valid bound"),
        state,
    )
    .expect("same grid");
    let w = g.sample(|x| if x[0] < 0.5 { 5.0 } else { 0.0 });
    let inst = manufacture(&w, &set, DataModel::Attainable, 1e-10).expect("feasible instance");
    Scenario::new(set, inst).expect("same grid")
}

/// 2D Poisson instance whose state constraint binds for moderate `α`.
pub fn binding_scenario(n: usize) -> Scenario {
    let g = DomainGrid::new(2, n).expect("valid grid");
    let op = Arc::new(assemble_poisson(&g).expect("poisson assembles"));
    let region =
        ObservationRegion::from_box(&g, &[0.25, 0.25], &[0.75, 0.75]).expect("nonempty region");
    let state = StateConstraint::constant(region, 0.03, 0.0, LavrentievSign::Plus)
        .expect("valid state bound");
    let set = AdmissibleSet::new(
        op,
        BoxBounds::constant(&g, 100.0).expect("valid bound"),
        state,
    )
    .expect("same grid");
    let model = DataModel::Given {
        residual: vec![1.0; g.len()],
    };
    let inst = manufacture(&g.zeros(), &set, model, 1e-10).expect("feasible instance");
    Scenario::new(set, inst).expect("same grid")
}
