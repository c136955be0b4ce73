use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shockflow_core::admissible::{active_set, admissible_velocity};
use shockflow_core::bench::random_momenta;
use shockflow_core::fixtures::fixture;
use shockflow_core::initial::InitialCondition;
use shockflow_core::legendre::HamiltonianModel;
use shockflow_core::stochastic::{compare_regularizations, self_consistent_velocity, simulate_sde, SdeConfig, Verdict};
use shockflow_core::superdiff::LimitMomentumSet;
use shockflow_core::vector::Vector;

fn v2(a: f64, b: f64) -> Vector<f64> {
    Vector::from_slice(&[a, b])
}

fn config(seed_point: Vector<f64>, n_paths: usize, rng_seed: u64) -> SdeConfig<f64> {
    SdeConfig { epsilon: 0.05, seed_point, horizon: 1.0, dt: 1e-3, n_paths, rng_seed }
}

#[test]
fn same_seed_same_paths() {
    let ic = InitialCondition::NegAbs { dim: 1, tilt: 0.0 };
    let m = HamiltonianModel::quadratic(1).unwrap();
    let a = simulate_sde(&ic, &m, &config(Vector::scalar(0.0), 40, 9)).unwrap();
    let b = simulate_sde(&ic, &m, &config(Vector::scalar(0.0), 40, 9)).unwrap();
    let c = simulate_sde(&ic, &m, &config(Vector::scalar(0.0), 40, 10)).unwrap();
    assert_eq!(a.paths, b.paths);
    assert_eq!(a.occupancy, b.occupancy);
    assert_ne!(a.paths, c.paths);
    assert!((a.occupancy.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn tilted_shock_speed_from_occupancy() {
    let ic = InitialCondition::NegAbs { dim: 1, tilt: 0.2 };
    let m = HamiltonianModel::quadratic(1).unwrap();
    let e = simulate_sde(&ic, &m, &config(Vector::scalar(0.0), 400, 7)).unwrap();
    assert!(
        (e.mean_velocity[0] - 0.2).abs() <= 3.0 * e.mean_velocity_se[0],
        "{:?} +- {:?}",
        e.mean_velocity,
        e.mean_velocity_se
    );
    // shares solve 1.2 pi + (-0.8)(1 - pi) = 0.2
    let lms = LimitMomentumSet::from_momenta(&m, &[Vector::scalar(1.2), Vector::scalar(-0.8)]).unwrap();
    let report = compare_regularizations(&lms, &m, &e).unwrap();
    assert_eq!(report.verdicts, vec![Verdict::Coincide]);
    assert_eq!(report.sde_verdict, Verdict::Coincide);
    for (p, se) in report.occupancy.iter().zip(&report.occupancy_se) {
        assert!((p - 0.5).abs() <= 3.0 * se + 1e-12, "{:?} +- {:?}", report.occupancy, report.occupancy_se);
    }
}

#[test]
fn triple_point_coincides_under_quadratic_h() {
    let fx = fixture::<f64>("min-affine-3").unwrap();
    let m = HamiltonianModel::quadratic(2).unwrap();
    let lms = LimitMomentumSet::from_momenta(&m, &[v2(1.0, 0.0), v2(-1.0, 0.0), v2(0.0, 1.5)]).unwrap();
    let e = simulate_sde(&fx.ic, &m, &config(v2(0.0, 0.0), 200, 3)).unwrap();
    let report = compare_regularizations(&lms, &m, &e).unwrap();
    // circumcentre of the three momenta: 1 + c^2 = (1.5 - c)^2
    let c = 1.25 / 3.0;
    assert!(report.admissible.v_star.distance(&v2(0.0, c)) < 1e-12);
    assert_eq!(report.candidates.len(), 1);
    assert_eq!(report.verdicts, vec![Verdict::Coincide]);
    assert_eq!(report.sde_verdict, Verdict::Coincide, "{:?} +- {:?}", report.sde_velocity, report.sde_velocity_se);
}

#[test]
fn one_dimensional_pairs_coincide_for_every_family() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for m in [
        HamiltonianModel::<f64>::power_law(1, 4.0).unwrap(),
        HamiltonianModel::power_law(1, 1.7).unwrap(),
        HamiltonianModel::cosh_sum(1).unwrap(),
    ] {
        for _ in 0..20 {
            let (p1, p2): (f64, f64) = (rng.random_range(0.1..2.0), rng.random_range(-2.0..-0.1));
            let lms = LimitMomentumSet::from_momenta(&m, &[Vector::scalar(p1), Vector::scalar(p2)]).unwrap();
            let s = admissible_velocity(&lms, &m, 1e-9).unwrap();
            let sols = self_consistent_velocity(&lms, &m, 1e-9).unwrap();
            assert_eq!(sols.len(), 1);
            assert!((sols[0].v_dagger[0] - s.v_star[0]).abs() <= 1e-8);
        }
    }
}

#[test]
fn power_law_triangle_is_reported() {
    let m = HamiltonianModel::power_law(2, 4.0).unwrap();
    let lms = LimitMomentumSet::from_momenta(&m, &[v2(1.0, 0.0), v2(-1.0, 0.0), v2(0.0, 1.5)]).unwrap();
    let sols = self_consistent_velocity(&lms, &m, 1e-9).unwrap();
    assert!(!sols.is_empty());
    let v_star = admissible_velocity(&lms, &m, 1e-9).unwrap().v_star;
    for s in &sols {
        let mut mix = Vector::zeros(2);
        for (&j, &w) in s.active_set.iter().zip(&s.shares) {
            mix += lms.entries[j].v * w;
        }
        assert!(mix.distance(&s.v_dagger) < 1e-9);
        assert_eq!(active_set(&lms, &s.v_dagger, 1e-6), s.active_set);
        assert!(s.v_dagger.distance(&v_star).is_finite());
    }
}

#[test]
fn noiseless_ensemble_follows_the_characteristic() {
    let ic = InitialCondition::Affine { slope: Vector::scalar(0.3), offset: 0.0 };
    let m = HamiltonianModel::cosh_sum(1).unwrap();
    let cfg = SdeConfig { epsilon: 0.0, ..config(Vector::scalar(0.4), 4, 1) };
    let e = simulate_sde(&ic, &m, &cfg).unwrap();
    let v = 0.3f64.sinh();
    for p in &e.paths {
        assert!((p.positions.last().unwrap()[0] - (0.4 + v)).abs() < 1e-9);
    }
    assert_eq!(e.occupancy, vec![1.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn quadratic_self_consistent_velocity_is_admissible(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.random_range(2..=4);
        let m = HamiltonianModel::quadratic(2).unwrap();
        let lms = LimitMomentumSet::from_momenta(&m, &random_momenta(&mut rng, 2, k, 2.0)).unwrap();
        let sols = self_consistent_velocity(&lms, &m, 1e-9).unwrap();
        let s = admissible_velocity(&lms, &m, 1e-9).unwrap();
        prop_assert_eq!(sols.len(), 1);
        prop_assert!(sols[0].v_dagger.distance(&s.v_star) <= 1e-8);
        let total: f64 = sols[0].shares.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}
