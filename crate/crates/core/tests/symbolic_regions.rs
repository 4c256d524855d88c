//! Neighbourhood label statistics inside a lobe and at the lobe boundary.

use isl::dynamics::FlowSystem;
use isl::symbolic::{self, Partition, Symbol};

#[test]
fn interior_point_is_nearly_deterministic() {
    let sys = FlowSystem::lorenz_canonical();
    let p = Partition::lorenz_lobes();
    let profile = symbolic::intertwining_profile(&sys, &p, &[-8.0, -8.0, 27.0], &[1e-1, 1e-2, 1e-3], 1000, 0.5, 4).unwrap();
    let last = profile.last().unwrap();
    assert!(last.minority_fraction < 0.01, "{profile:?}");
    assert!(1.0 - last.minority_fraction >= 0.99);
}

#[test]
fn zero_radius_is_unanimous() {
    let sys = FlowSystem::lorenz_canonical();
    let p = Partition::lorenz_lobes();
    let space = symbolic::neighborhood_sample_space(&sys, &p, &[0.0, 0.0, 20.0], 0.0, 200, 2.0, 1).unwrap();
    let first = space.labels[0];
    assert!(space.labels.iter().all(|&l| l == first));
    let probs = symbolic::outcome_probabilities(&space).unwrap();
    assert_eq!(probs.minority(), 0.0);
}

#[test]
fn boundary_point_stays_mixed_as_radius_shrinks() {
    let sys = FlowSystem::lorenz_canonical();
    let p = Partition::lorenz_lobes();
    let profile = symbolic::intertwining_profile(&sys, &p, &[0.0, 0.0, 20.0], &[1e-1, 1e-3, 1e-4], 1000, 2.0, 8).unwrap();
    assert!(profile.iter().all(|pt| pt.minority_fraction >= 0.05), "{profile:?}");
}

#[test]
fn lobes_split_on_first_coordinate() {
    let p = Partition::lorenz_lobes();
    assert_eq!(symbolic::label_state(&p, &[5.0, 0.0, 0.0]).unwrap(), symbolic::label_state(&p, &[8.0, -3.0, 30.0]).unwrap());
    assert_ne!(symbolic::label_state(&p, &[5.0, 0.0, 0.0]).unwrap(), symbolic::label_state(&p, &[-5.0, 0.0, 0.0]).unwrap());
    let _ = Symbol::A;
}

#[test]
fn profile_rejects_small_ensembles() {
    let sys = FlowSystem::lorenz_canonical();
    let p = Partition::lorenz_lobes();
    assert!(symbolic::intertwining_profile(&sys, &p, &[0.0, 0.0, 20.0], &[1e-1], 999, 1.0, 0).is_err());
}
