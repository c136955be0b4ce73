use shockflow_core::initial::InitialCondition;
use shockflow_core::legendre::HamiltonianModel;
use shockflow_core::superdiff::LimitMomentumSet;
use shockflow_core::vector::Vector;
use shockflow_core::viscous::{gradient_limit_check, integrate_regularized_flow, solve_viscous, ViscousSolver};

fn quad1() -> HamiltonianModel<f64> {
    HamiltonianModel::quadratic(1).unwrap()
}

/// Complementary error function, rational approximation with relative error below 1.2e-7.
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let poly = -z * z - 1.26551223
        + t * (1.00002368
            + t * (0.37409196
                + t * (0.09678418
                    + t * (-0.18628806
                        + t * (0.27886807
                            + t * (-1.13520398 + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277))))))));
    let r = t * poly.exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

/// `phi_x` of the Cole-Hopf solution for `phi_0 = -|x|` and `H = p^2 / 2`:
/// `phi = -2 mu log w`, `w` the heat flow of `exp(|x| / 2 mu)`.
fn cole_hopf_gradient(mu: f64, t: f64, x: f64) -> f64 {
    let a = 1.0 / (2.0 * mu);
    let s = (2.0 * mu * t).sqrt();
    let cdf = |z: f64| 0.5 * erfc(-z / std::f64::consts::SQRT_2);
    let pdf = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let (z1, z2) = ((x + t) / s, (-x + t) / s);
    // common factor exp(-a |x|) dropped
    let (e1, e2) = ((a * x - a * x.abs()).exp(), (-a * x - a * x.abs()).exp());
    let w = e1 * cdf(z1) + e2 * cdf(z2);
    let wx = e1 * (a * cdf(z1) + pdf(z1) / s) - e2 * (a * cdf(z2) + pdf(z2) / s);
    -2.0 * mu * wx / w
}

#[test]
fn burgers_profile_matches_cole_hopf() {
    let ic = InitialCondition::NegAbs { dim: 1, tilt: 0.0 };
    let (mu, t) = (0.02, 0.5);
    let series = solve_viscous(&ic, &quad1(), mu, t, 2048, None).unwrap();
    let last = series.frames.last().unwrap();
    assert!((last.time - t).abs() < 1e-12);
    let mut worst: f64 = 0.0;
    for i in 0..=400 {
        let x = -0.2 + 0.001 * i as f64;
        let g = last.gradient_at(&Vector::scalar(x))[0];
        worst = worst.max((g - cole_hopf_gradient(mu, t, x)).abs());
    }
    // |phi_x| <= 1, so this is a relative bound
    assert!(worst <= 0.02, "{worst}");
}

#[test]
fn linear_data_is_reproduced() {
    let ic = InitialCondition::Affine { slope: Vector::scalar(0.25), offset: 0.15 };
    let m = HamiltonianModel::power_law(1, 3.0).unwrap();
    let series = solve_viscous(&ic, &m, 0.05, 0.4, 128, None).unwrap();
    for frame in &series.frames {
        let expect = |x: f64| 0.25 * x + 0.15 - frame.time * 0.25f64.powi(3) / 3.0;
        for x in [-2.0, 0.0, 0.3, 2.5] {
            assert!((frame.value_at(&Vector::scalar(x)) - expect(x)).abs() < 1e-12);
        }
    }
}

#[test]
fn smooth_solution_converges_at_first_order() {
    let ic = InitialCondition::Cosine { dim: 1, amplitude: 1.0 };
    let m = quad1();
    let (mu, t) = (0.05, 0.5);
    let solve = |n: usize| solve_viscous(&ic, &m, mu, t, n, None).unwrap();
    let reference = solve(2048);
    let reference = reference.frames.last().unwrap();
    let errors: Vec<f64> = [64, 128, 256]
        .iter()
        .map(|&n| {
            let s = solve(n);
            let f = s.frames.last().unwrap();
            (0..n)
                .map(|i| f.node_position(i))
                .map(|x| (f.value_at(&x) - reference.value_at(&x)).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.6..=4.5).contains(&ratio), "{errors:?}");
    }
}

#[test]
fn gradient_stays_in_the_momentum_hull() {
    let ic = InitialCondition::NegAbs { dim: 1, tilt: 0.2 };
    let m = quad1();
    let n = 2048;
    let ladder: Vec<_> = [0.02, 0.01].iter().map(|&mu| solve_viscous(&ic, &m, mu, 0.5, n, None).unwrap()).collect();
    let lms = LimitMomentumSet::from_momenta(&m, &[Vector::scalar(1.2), Vector::scalar(-0.8)]).unwrap();
    let h = 2.0 * std::f64::consts::PI / n as f64;
    // the shock sits at x = 0.2 t
    let d = gradient_limit_check(&ladder, &lms, 0.5, &Vector::scalar(0.1));
    assert!(d.iter().all(|&d| d <= 2.0 * h), "{d:?}");
    let smooth = gradient_limit_check(
        &ladder,
        &LimitMomentumSet::from_momenta(&m, &[Vector::scalar(-0.8)]).unwrap(),
        0.5,
        &Vector::scalar(1.0),
    );
    assert!(smooth.iter().all(|&d| d <= h), "{smooth:?}");
}

#[test]
fn regularized_trajectories_collapse_onto_the_shock() {
    let ic = InitialCondition::NegAbs { dim: 1, tilt: 0.0 };
    let m = quad1();
    let gaps: Vec<f64> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&mu| {
            let series = solve_viscous(&ic, &m, mu, 1.0, 1024, None).unwrap();
            let a = integrate_regularized_flow(&series, &m, &Vector::scalar(-0.3), 1e-3).unwrap();
            let b = integrate_regularized_flow(&series, &m, &Vector::scalar(0.3), 1e-3).unwrap();
            a.trajectory.last().distance(&b.trajectory.last())
        })
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[2] < 0.05, "{gaps:?}");
}

#[test]
fn stability_bound_and_validation() {
    let solver = ViscousSolver::<f64>::new(0.01, 256);
    let h = 2.0 * std::f64::consts::PI / 256.0;
    assert!((solver.stability_bound(1, 2.0) - 0.25 * (h * h / 0.02).min(h / 2.0)).abs() < 1e-15);
    // -|x| has speed bound 1 under the quadratic model
    let bound = solver.stability_bound(1, 1.0);
    let ic = InitialCondition::NegAbs { dim: 1, tilt: 0.0 };
    assert!(solve_viscous(&ic, &quad1(), 0.01, 0.5, 256, Some(0.99 * bound)).is_ok());
    let err = solve_viscous(&ic, &quad1(), 0.01, 0.5, 256, Some(1.01 * bound)).unwrap_err();
    assert!(err.is_config());
    let err = solve_viscous(&ic, &quad1(), -0.01, 0.5, 256, None).unwrap_err();
    assert!(err.to_string().contains("`mu`"));
    let three_d = InitialCondition::Zero { dim: 3 };
    assert!(solve_viscous(&three_d, &HamiltonianModel::quadratic(3).unwrap(), 0.01, 0.5, 32, None)
        .unwrap_err()
        .is_config());
}

#[test]
fn two_dimensional_cosine_keeps_its_symmetry() {
    let ic = InitialCondition::Cosine { dim: 2, amplitude: 1.0f64 };
    let m = HamiltonianModel::quadratic(2).unwrap();
    let series = solve_viscous(&ic, &m, 0.05, 0.3, 64, None).unwrap();
    let f = series.frames.last().unwrap();
    for (a, b) in [([0.3, -0.8], [-0.8, 0.3]), ([1.0, 0.5], [-1.0, -0.5])] {
        let (va, vb) = (f.value_at(&Vector::from_slice(&a)), f.value_at(&Vector::from_slice(&b)));
        assert!((va - vb).abs() < 1e-10, "{va} vs {vb}");
    }
}
