//! Acceptance suite: one PASS/FAIL line per criterion.

mod support;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shockflow_core::admissible::{admissible_velocity, check_admissibility, lhat, AdmissibleSolution};
use shockflow_core::bench::{grid_oracle, oracle_step, random_instances, random_model, random_momenta, KINDS};
use shockflow_core::fixtures::catalog;
use shockflow_core::flow::{detect_coalescence, integrate_flow, Flow, FlowOptions};
use shockflow_core::hopf_lax::solve_value;
use shockflow_core::initial::InitialCondition;
use shockflow_core::legendre::HamiltonianModel;
use shockflow_core::stochastic::{self_consistent_velocity, simulate_sde, SdeConfig};
use shockflow_core::superdiff::{limit_data, LimitMomentumSet};
use shockflow_core::vector::Vector;
use shockflow_core::viscous::{anomaly_along, integrate_regularized_flow, plateau, solve_viscous};

type Case = (HamiltonianModel<f64>, LimitMomentumSet<f64>);

struct Line {
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn timed(name: &'static str, limit: Option<Duration>, f: impl FnOnce() -> (bool, String)) -> Line {
    let start = Instant::now();
    let (ok, mut detail) = f();
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed <= l);
    if let Some(l) = limit {
        detail.push_str(&format!("; runtime {:.2}s (limit {}s)", elapsed.as_secs_f64(), l.as_secs()));
    }
    Line { name, pass: ok && in_time, detail, elapsed }
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn preshock() -> (bool, String) {
    let ic = InitialCondition::NegPower { dim: 1 };
    let m = HamiltonianModel::quadratic(1).unwrap();
    let tau: f64 = 0.1;
    let x = Vector::scalar(0.0);
    let value = solve_value(&ic, &m, tau, &x).unwrap().value;
    let expected = -(8.0 / 3.0) * tau.powi(3);
    let lms = limit_data(&ic, &m, tau, &x).unwrap();
    let value_ok = (value - expected).abs() <= 1e-6;
    let momenta_ok =
        lms.k() == 2 && (lms.entries[0].p[0] + 0.4).abs() <= 1e-3 && (lms.entries[1].p[0] - 0.4).abs() <= 1e-3;
    let energy_ok = lms.k() == 2 && lms.entries.iter().all(|e| (e.h - 0.08).abs() <= 1e-4);
    let ps: Vec<String> = lms.entries.iter().map(|e| format!("{:.6}", e.p[0])).collect();
    let hs: Vec<String> = lms.entries.iter().map(|e| format!("{:.6}", e.h)).collect();
    (
        value_ok && momenta_ok && energy_ok,
        format!("phi = {value:.3e} (target {expected:.3e}); momenta [{}]; energies [{}]", ps.join(", "), hs.join(", ")),
    )
}

fn rankine_hugoniot(cases: &mut Vec<Case>) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for kind in KINDS {
        for _ in 0..100 {
            let m = random_model::<f64>(&mut rng, kind, 1).unwrap();
            let (p1, p2) = loop {
                let a: f64 = rng.random_range(-2.0..2.0);
                let b: f64 = rng.random_range(-2.0..2.0);
                if (a - b).abs() > 1e-3 {
                    break (a, b);
                }
            };
            let lms = LimitMomentumSet::from_momenta(&m, &[Vector::scalar(p1), Vector::scalar(p2)]).unwrap();
            let speed = (lms.entries[0].h - lms.entries[1].h) / (p1 - p2);
            match admissible_velocity(&lms, &m, 1e-9) {
                Ok(s) => worst = worst.max((s.v_star[0] - speed).abs()),
                Err(_) => failures += 1,
            }
            cases.push((m, lms));
        }
    }
    (failures == 0 && worst <= 1e-8, format!("400 pairs; max |v* - RH speed| = {worst:.2e}; solver errors {failures}"))
}

fn smallest_ball(cases: &mut Vec<Case>) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for i in 0..100 {
        let dim = 2 + i % 2;
        let k = rng.random_range(2..=6);
        let m = HamiltonianModel::quadratic(dim).unwrap();
        let lms = LimitMomentumSet::from_momenta(&m, &random_momenta(&mut rng, dim, k, 2.0)).unwrap();
        let (center, _) = support::meb_by_enumeration(&lms.velocities());
        match admissible_velocity(&lms, &m, 1e-9) {
            Ok(s) => worst = worst.max(s.v_star.distance(&Vector::from_f64(&center))),
            Err(_) => failures += 1,
        }
        cases.push((m, lms));
    }
    (
        failures == 0 && worst <= 1e-8,
        format!("100 instances; max |v* - ball centre| = {worst:.2e}; solver errors {failures}"),
    )
}

fn oracle(cases: &mut Vec<Case>) -> (bool, String) {
    let instances = random_instances::<f64>(200, 13).unwrap();
    let mut worst_ratio: f64 = 0.0;
    let mut worst_1d: f64 = 0.0;
    let mut beaten = 0;
    let mut failures = 0;
    for inst in instances {
        let step = oracle_step::<f64>(inst.lms.dim());
        let o = grid_oracle(&inst.lms, &inst.model, step);
        match admissible_velocity(&inst.lms, &inst.model, 1e-9) {
            Ok(s) => {
                let ratio = s.v_star.distance(&o.v) / step;
                worst_ratio = worst_ratio.max(ratio);
                if inst.lms.dim() == 1 {
                    worst_1d = worst_1d.max(ratio);
                }
                // the grid must never find a lower value than the solver
                if o.value < lhat(&inst.lms, &inst.model, &s.v_star) - 1e-12 {
                    beaten += 1;
                }
            }
            Err(_) => failures += 1,
        }
        cases.push((inst.model, inst.lms));
    }
    (
        failures == 0 && worst_ratio <= 2.0,
        format!(
            "200 instances; max |v* - grid argmin| = {worst_ratio:.3} grid steps (limit 2), 1D only {worst_1d:.3}; grid value below solver value in {beaten}; solver errors {failures}"
        ),
    )
}

fn certification(cases: &[Case]) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut accept_fail = 0;
    let mut unstable = 0;
    let mut worst_accept: f64 = 0.0;
    let mut rejected = 0;
    let mut bad_remainder = 0;
    for (m, lms) in cases {
        let s: AdmissibleSolution<f64> = admissible_velocity(lms, m, 1e-9).unwrap();
        let a = check_admissibility(lms, m, &s.v_star, 1e-8);
        worst_accept = worst_accept.max(a.distance());
        if !a.is_accepted() || a.distance() > 1e-8 {
            accept_fail += 1;
        }
        if check_admissibility(lms, m, &s.v_star, 1e-6).is_accepted() != a.is_accepted() {
            unstable += 1;
        }
        let dir: Vec<f64> = (0..lms.dim()).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        let u = Vector::from_f64(&dir) / norm;
        let shifted = s.v_star + u * 0.1;
        let r = check_admissibility(lms, m, &shifted, 1e-8);
        if !r.is_accepted() {
            rejected += 1;
        } else {
            let gap = lhat(lms, m, &shifted) - lhat(lms, m, &s.v_star);
            if r.distance() > 1e-6 || gap > 1e-6 {
                bad_remainder += 1;
            }
        }
    }
    let n = cases.len();
    let share = rejected as f64 / n as f64;
    (
        accept_fail == 0 && unstable == 0 && share >= 0.99 && bad_remainder == 0,
        format!(
            "{n} instances; v* accepted in all but {accept_fail} (max hull distance {worst_accept:.2e}); verdict changes at tol 1e-6: {unstable}; perturbed rejected {:.2}%; non-degenerate acceptances {bad_remainder}",
            100.0 * share
        ),
    )
}

fn anomaly() -> (bool, String) {
    let ic = InitialCondition::NegAbs { dim: 1, tilt: 0.0 };
    let mut parts = Vec::new();
    let mut ok = true;
    for (label, m, target) in [
        ("quadratic", HamiltonianModel::quadratic(1).unwrap(), Some(-0.5f64)),
        ("power-law a=4", HamiltonianModel::power_law(1, 4.0).unwrap(), None),
    ] {
        let start = Instant::now();
        let lms = LimitMomentumSet::from_momenta(&m, &[Vector::scalar(1.0), Vector::scalar(-1.0)]).unwrap();
        let lhat_star = admissible_velocity(&lms, &m, 1e-9).unwrap().anomaly;
        let target = target.unwrap_or(-lhat_star);
        let series = solve_viscous(&ic, &m, 0.01, 1.0, 2048, None).unwrap();
        let shock = integrate_regularized_flow(&series, &m, &Vector::scalar(0.0), 1e-3).unwrap();
        let measured = plateau(&anomaly_along(&series, &m, &shock.trajectory), 0.5, 1.0).unwrap();
        let rel = ((measured - target) / target).abs();
        let secs = start.elapsed().as_secs_f64();
        ok &= rel <= 0.05 && secs <= 120.0;
        parts.push(format!("{label}: plateau {measured:.4} vs {target:.4} ({:.2}%, {secs:.1}s)", 100.0 * rel));
    }
    (ok, parts.join("; "))
}

fn vanishing_viscosity() -> (bool, String) {
    let ic = InitialCondition::NegAbs { dim: 1, tilt: 0.0 };
    let m = HamiltonianModel::quadratic(1).unwrap();
    let seed = Vector::scalar(0.5);
    let inviscid = integrate_flow(&ic, &m, &[seed], 1.0, 1e-3).unwrap();
    let mut dists = Vec::new();
    for mu in [0.08, 0.04, 0.02, 0.01] {
        let series = solve_viscous(&ic, &m, mu, 1.0, 2048, None).unwrap();
        let reg = integrate_regularized_flow(&series, &m, &seed, 1e-3).unwrap();
        let d = reg
            .trajectory
            .times
            .iter()
            .zip(&reg.trajectory.positions)
            .map(|(&t, x)| x.distance(&inviscid[0].position_at(t)))
            .fold(0.0, f64::max);
        dists.push(d);
    }
    let monotone = dists.windows(2).all(|w| w[1] < w[0]);
    let text: Vec<String> = dists.iter().map(|d| format!("{d:.4}")).collect();
    (monotone && dists[3] <= 0.05, format!("sup distances over mu = 0.08..0.01: [{}]", text.join(", ")))
}

fn coalescence() -> (bool, String) {
    let ic = InitialCondition::NegAbs { dim: 1, tilt: 0.0 };
    let m = HamiltonianModel::quadratic(1).unwrap();
    let dt = 1e-3;
    let flow = Flow::new(&ic, &m, FlowOptions::default()).unwrap();
    let band = 2.0 * dt * flow.speed_bound();
    let mut pair = flow.integrate(&[Vector::scalar(0.5), Vector::scalar(-0.3)], 1.0, dt).unwrap();
    let c = detect_coalescence(&mut pair, band).unwrap();
    let merged_at = pair[1].merged_at;
    let merged = c.classes.len() == 1 && merged_at.is_some_and(|t| t <= 0.55);
    let stays = pair[0]
        .times
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= 0.55)
        .all(|(k, _)| pair[0].positions[k].distance(&pair[1].positions[k]) <= band);

    let mut reversions = Vec::new();
    let mut runs = 0;
    for fx in catalog::<f64>() {
        let dim = fx.ic.dim();
        let model = HamiltonianModel::quadratic(dim).unwrap();
        let (seeds, horizon, step): (Vec<Vector<f64>>, f64, f64) = match (fx.name, dim) {
            ("cosine", _) => ([-0.6, -0.2, 0.1, 0.5].map(Vector::scalar).to_vec(), 1.6, 1e-3),
            ("cosine-2d", _) => (vec![Vector::from_slice(&[0.3, 0.2]), Vector::from_slice(&[-0.2, 0.4])], 1.6, 1e-2),
            (_, 1) => ([-0.5, -0.1, 0.2, 0.6].map(Vector::scalar).to_vec(), 1.0, 1e-3),
            _ => (
                vec![
                    Vector::from_slice(&[0.4, 0.1]),
                    Vector::from_slice(&[-0.3, -0.2]),
                    Vector::from_slice(&[0.2, 0.5]),
                ],
                1.0,
                1e-3,
            ),
        };
        let trajs = integrate_flow(&fx.ic, &model, &seeds, horizon, step).unwrap();
        for tr in &trajs {
            runs += 1;
            if let Some(first) = tr.on_shock.iter().position(|&s| s) {
                if tr.on_shock[first..].iter().any(|&s| !s) {
                    reversions.push(format!("{}#{}", fx.name, tr.id));
                }
            }
        }
    }
    (
        merged && stays && reversions.is_empty(),
        format!(
            "merge at {:?} (limit 0.55), stays within {band:.1e}: {stays}; {runs} trajectories over the catalog, reversions {:?}",
            merged_at, reversions
        ),
    )
}

fn quadratic_coincidence() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let m = HamiltonianModel::quadratic(2).unwrap();
    let mut not_unique = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let k = rng.random_range(2..=4);
        let lms = LimitMomentumSet::from_momenta(&m, &random_momenta(&mut rng, 2, k, 2.0)).unwrap();
        let s = admissible_velocity(&lms, &m, 1e-9).unwrap();
        let sols = self_consistent_velocity(&lms, &m, 1e-9).unwrap();
        if sols.len() != 1 {
            not_unique += 1;
        }
        for sol in &sols {
            worst = worst.max(sol.v_dagger.distance(&s.v_star));
        }
    }
    let ic = InitialCondition::NegAbs { dim: 1, tilt: 0.0 };
    let m1 = HamiltonianModel::quadratic(1).unwrap();
    let cfg = SdeConfig {
        epsilon: 0.05,
        seed_point: Vector::scalar(0.0),
        horizon: 1.0,
        dt: 1e-3,
        n_paths: 400,
        rng_seed: 2024,
    };
    let e = simulate_sde(&ic, &m1, &cfg).unwrap();
    let occ_ok = e.occupancy.iter().zip(&e.occupancy_se).all(|(p, se): (&f64, &f64)| (p - 0.5).abs() <= 3.0 * se);
    (
        not_unique == 0 && worst <= 1e-8 && occ_ok,
        format!(
            "50 configurations: non-unique {not_unique}, max |v_dagger - v*| = {worst:.2e}; occupancy ({:.4}, {:.4}) +- ({:.4}, {:.4})",
            e.occupancy[0], e.occupancy[1], e.occupancy_se[0], e.occupancy_se[1]
        ),
    )
}

fn zero_data() -> (bool, String) {
    let ic = InitialCondition::Zero { dim: 1 };
    let m = HamiltonianModel::quadratic(1).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..101 {
        let t = 0.05 + 1.95 * ((37 * i) % 101) as f64 / 100.0;
        let x = -2.0 + 4.0 * i as f64 / 100.0;
        worst = worst.max(solve_value(&ic, &m, t, &Vector::scalar(x)).unwrap().value.abs());
    }
    (worst <= 1e-12, format!("max |phi| over 101 samples = {worst:.2e}"))
}

fn main() -> ExitCode {
    let mut cases: Vec<Case> = Vec::new();
    let mut lines = vec![
        timed("preshock superdifferential", secs(1), preshock),
        timed("1D Rankine-Hugoniot equivalence", secs(10), || rankine_hugoniot(&mut cases)),
        timed("smallest-ball reduction", secs(10), || smallest_ball(&mut cases)),
        timed("lhat grid-oracle equivalence", secs(300), || oracle(&mut cases)),
    ];
    lines.push(timed("admissibility certification", None, || certification(&cases)));
    lines.push(timed("dissipative anomaly", secs(240), anomaly));
    lines.push(timed("vanishing-viscosity flow convergence", secs(120), vanishing_viscosity));
    lines.push(timed("coalescence and shock persistence", None, coalescence));
    lines.push(timed("quadratic coincidence of regularizations", secs(180), quadratic_coincidence));
    lines.push(timed("zero data has zero solution", None, zero_data));

    let mut failed = 0;
    for l in &lines {
        println!(
            "{} {:<42} {} [{:.2}s]",
            if l.pass { "PASS" } else { "FAIL" },
            l.name,
            l.detail,
            l.elapsed.as_secs_f64()
        );
        failed += usize::from(!l.pass);
    }
    println!("{} of {} criteria passed", lines.len() - failed, lines.len());
    // failures are reported; set SHOCKFLOW_ACCEPTANCE_STRICT to turn them into a failing exit status
    if failed > 0 && std::env::var_os("SHOCKFLOW_ACCEPTANCE_STRICT").is_some() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
