use shockflow_core::hopf_lax::solve_value;
use shockflow_core::initial::InitialCondition;
use shockflow_core::legendre::HamiltonianModel;
use shockflow_core::superdiff::{is_shock, limit_data, superdifferential_vertices, LimitDataOptions};
use shockflow_core::vector::Vector;

fn quad1() -> HamiltonianModel<f64> {
    HamiltonianModel::quadratic(1).unwrap()
}

#[test]
fn neg_abs_branches_from_straight_lines() {
    let ic = InitialCondition::NegAbs { dim: 1, tilt: 0.0 };
    let t = 0.5;
    let lms = limit_data(&ic, &quad1(), t, &Vector::scalar(0.0)).unwrap();
    assert_eq!(lms.k(), 2);
    for e in &lms.entries {
        // p = (x - y) / t with y the preimage
        let y = e.preimage.unwrap()[0];
        assert!((e.p[0] - (0.0 - y) / t).abs() < 1e-6);
        assert!((e.p[0].abs() - 1.0).abs() < 1e-6 && (e.h - 0.5).abs() < 1e-6);
    }
    let verts = superdifferential_vertices(&lms);
    assert!(verts.iter().all(|(h, _)| (h + 0.5).abs() < 1e-6));
    assert!(is_shock(&lms));
}

#[test]
fn preshock_vertices() {
    let ic = InitialCondition::NegPower { dim: 1 };
    let lms = limit_data(&ic, &quad1(), 0.1, &Vector::scalar(0.0)).unwrap();
    let verts = superdifferential_vertices(&lms);
    assert_eq!(verts.len(), 2);
    assert!((verts[0].0 + 0.08).abs() < 1e-4 && (verts[0].1[0] + 0.4).abs() < 1e-3);
    assert!((verts[1].0 + 0.08).abs() < 1e-4 && (verts[1].1[0] - 0.4).abs() < 1e-3);
}

#[test]
fn preshock_collapses_under_coarse_clustering() {
    let ic = InitialCondition::NegPower { dim: 1 };
    let opts = LimitDataOptions { cluster_tol: Some(1e-2), ..Default::default() };
    let lms = opts.limit_data(&ic, &quad1(), 1e-4, &Vector::scalar(0.0)).unwrap();
    assert!(!is_shock(&lms));
    assert_eq!(superdifferential_vertices(&lms).len(), 1);
}

#[test]
fn smooth_side_momenta_converge_to_a_shock_branch() {
    let ic = InitialCondition::Cosine { dim: 1, amplitude: 1.0 };
    let m = quad1();
    let t = 1.5;
    let shock = limit_data(&ic, &m, t, &Vector::scalar(0.0)).unwrap();
    assert_eq!(shock.k(), 2);
    let h = 1e-3;
    for side in [-1.0, 1.0] {
        for n in 1..=5 {
            let x = side * 0.05 / (1 << n) as f64;
            let lms = limit_data(&ic, &m, t, &Vector::scalar(x)).unwrap();
            assert_eq!(lms.k(), 1, "x = {x}");
            let d = shock.entries.iter().map(|e| e.p.distance(&lms.entries[0].p)).fold(f64::INFINITY, f64::min);
            // the momentum field is Lipschitz on each side
            assert!(d <= 10.0 * h + 2.0 * x.abs(), "x = {x}: {d}");
        }
    }
}

#[test]
fn vertices_are_supergradients() {
    let m = quad1();
    for (ic, t, x) in [
        (InitialCondition::NegAbs { dim: 1, tilt: 0.2 }, 0.5, 0.1),
        (InitialCondition::Cosine { dim: 1, amplitude: 1.0 }, 1.5, 0.0),
    ] {
        let lms = limit_data(&ic, &m, t, &Vector::scalar(x)).unwrap();
        assert_eq!(lms.k(), 2);
        let phi = |s: f64, y: f64| solve_value(&ic, &m, s, &Vector::scalar(y)).unwrap().value;
        let base = phi(t, x);
        let mut ratios = Vec::new();
        for r in [1e-1, 1e-2, 1e-3] {
            let mut worst: f64 = 0.0;
            for i in 0..16 {
                let a = std::f64::consts::TAU * i as f64 / 16.0;
                let (tau, xi) = (r * a.cos() * 0.5, r * a.sin());
                for e in &lms.entries {
                    let excess = phi(t + tau, x + xi) - base - (-e.h * tau + e.p[0] * xi);
                    worst = worst.max(excess / (tau.abs() + xi.abs()));
                }
            }
            ratios.push(worst);
        }
        assert!(ratios[2] <= 0.2 * ratios[0].max(1e-9) + 1e-4, "{ratios:?}");
    }
}

#[test]
fn linear_data_is_smooth_everywhere() {
    let ic = InitialCondition::Affine { slope: Vector::scalar(0.5), offset: 0.0 };
    for x in [-1.0, 0.0, 0.7] {
        let lms = limit_data(&ic, &quad1(), 0.4, &Vector::scalar(x)).unwrap();
        assert!(!is_shock(&lms));
        assert!((lms.entries[0].p[0] - 0.5).abs() < 1e-9);
    }
}
