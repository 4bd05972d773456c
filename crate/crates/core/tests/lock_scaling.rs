use exoharness::harness::{HarnessConfig, LockSettings};
use exoharness::model::{build_exoskeleton, Anthropometrics, InterfaceId, ModelLayout, Percentile};
use exoharness::simulation::locked_excursion;
use exoharness::spatial::{SpatialForce, Vec3};

#[test]
fn doubling_lock_stiffness_halves_excursion() {
    let exo = build_exoskeleton(&Anthropometrics::percentile(Percentile::P50), 19.0, &ModelLayout::default()).unwrap();
    let harness = HarnessConfig::from_code("[0 1 0]").unwrap();
    let loads = [
        (InterfaceId::ThighL, SpatialForce::new(Vec3::new(0.0, 2.0, 0.0), Vec3::new(80.0, -30.0, 50.0))),
        (InterfaceId::FootL, SpatialForce::new(Vec3::new(1.0, 0.0, 3.0), Vec3::new(0.0, 40.0, -20.0))),
        (InterfaceId::ShankR, SpatialForce::new(Vec3::zeros(), Vec3::new(-60.0, 0.0, 10.0))),
    ];
    for (id, load) in loads {
        for k in [1e5, 1e6, 1e7] {
            let run = |k: f64| locked_excursion(&exo, &harness, &LockSettings { stiffness: k, damping: None }, id, load, 0.3, 1e-3).unwrap();
            let (e1, e2) = (run(k), run(2.0 * k));
            assert!(e1 > 0.0);
            let ratio = e1 / e2;
            assert!((ratio - 2.0).abs() <= 0.1, "{id:?} K = {k}: ratio {ratio}");
        }
    }
}

#[test]
fn free_only_chain_is_rejected() {
    let exo = build_exoskeleton(&Anthropometrics::percentile(Percentile::P50), 19.0, &ModelLayout::default()).unwrap();
    let harness = HarnessConfig::from_code("[2 6 1]").unwrap();
    let r = locked_excursion(&exo, &harness, &LockSettings::default(), InterfaceId::ShankL, SpatialForce::zero(), 0.1, 1e-3);
    assert!(r.is_err());
}
