use rayon::prelude::*;
use shockflow_core::admissible::{admissible_velocity, classify_shock, lhat, ShockClass};
use shockflow_core::bench::{grid_oracle, oracle_step, random_instances};
use shockflow_core::flow::{detect_coalescence, Flow, FlowOptions, ParticleTrajectory};
use shockflow_core::hopf_lax::solve_value;
use shockflow_core::stochastic::{compare_regularizations, simulate_sde, SdeConfig};
use shockflow_core::superdiff::{LimitDataOptions, LimitMomentumSet};
use shockflow_core::viscous::{anomaly_along, integrate_regularized_flow, plateau, solve_viscous, FieldSeries};
use shockflow_core::{Error, Initial64, Model64, Vec64};

use crate::config::{
    AnomalyParams, BenchParams, Experiment, ExperimentConfig, ParticleParams, SdeParams, SolveParams, ViscousParams,
};
use crate::output::{coords, header, num, point, tag, Artifacts};
use crate::Failure;

type Run<T = ()> = Result<T, Failure>;

pub fn run(cfg: &ExperimentConfig, out: &mut Artifacts) -> Run {
    let setup = || (cfg.ic.as_ref().expect("fixture"), cfg.model.as_ref().expect("model"));
    match &cfg.experiment {
        Experiment::Solve(p) => {
            let (ic, m) = setup();
            solve(ic, m, p, out)
        }
        Experiment::Particles(p) => {
            let (ic, m) = setup();
            particles(ic, m, flow_options(cfg), p, out)
        }
        Experiment::ViscousCompare(p) => {
            let (ic, m) = setup();
            viscous_compare(ic, m, flow_options(cfg), p, out)
        }
        Experiment::Anomaly(v, a) => {
            let (ic, m) = setup();
            anomaly(ic, m, flow_options(cfg), v, a, out)
        }
        Experiment::Sde(p) => {
            let (ic, m) = setup();
            sde(ic, m, p, cfg.rng_seed, out)
        }
        Experiment::AdmissibleBench(p) => bench(p, cfg.rng_seed, out),
    }
}

fn flow_options(cfg: &ExperimentConfig) -> FlowOptions<f64> {
    FlowOptions { limit: LimitDataOptions { cluster_tol: cfg.cluster_tol, ..Default::default() }, ..Default::default() }
}

/// Nodes of `points` per axis spanning `[-pi, pi]^dim`.
fn grid(dim: usize, points: usize) -> Vec<Vec64> {
    let pi = std::f64::consts::PI;
    let axis: Vec<f64> = (0..points).map(|i| -pi + 2.0 * pi * i as f64 / (points - 1) as f64).collect();
    match dim {
        1 => axis.iter().map(|&x| Vec64::scalar(x)).collect(),
        _ => axis.iter().flat_map(|&a| axis.iter().map(move |&b| Vec64::from_slice(&[a, b]))).collect(),
    }
}

fn solve(ic: &Initial64, m: &Model64, p: &SolveParams, out: &mut Artifacts) -> Run {
    let dim = ic.dim();
    let nodes = grid(dim, p.points);
    let mut fields = Vec::new();
    let mut shocks = Vec::new();
    for &t in &p.times {
        let values: Vec<(f64, usize)> = nodes
            .par_iter()
            .map(|x| solve_value(ic, m, t, x).map(|r| (r.value, r.count())))
            .collect::<Result<_, Error>>()
            .map_err(|e| Failure::core("hopf-lax", e))?;
        for (x, (phi, branches)) in nodes.iter().zip(values) {
            let mut row = vec![num(t)];
            row.extend(point(x));
            if branches > 1 {
                let mut s = row.clone();
                s.push(branches.to_string());
                shocks.push(s);
            }
            row.push(num(phi));
            fields.push(row);
        }
    }
    let mut h = vec!["t".to_string()];
    h.extend(coords("x", dim));
    out.csv("fields.csv", &[h.clone(), header(&["phi"])].concat(), fields)?;
    out.csv("shocks.csv", &[h, header(&["branches"])].concat(), shocks)?;
    Ok(())
}

fn trajectory_rows(trajs: &[ParticleTrajectory<f64>]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for tr in trajs {
        for (k, (&t, x)) in tr.times.iter().zip(&tr.positions).enumerate() {
            let merged = match (tr.merged_into, tr.merged_at) {
                (Some(j), Some(at)) if t >= at => j.to_string(),
                _ => String::new(),
            };
            let mut row = vec![tr.id.to_string(), num(t)];
            row.extend(point(x));
            row.push(u8::from(tr.on_shock[k]).to_string());
            row.push(merged);
            rows.push(row);
        }
    }
    rows
}

fn trajectory_header(dim: usize) -> Vec<String> {
    [header(&["traj_id", "t"]), coords("x", dim), header(&["on_shock", "merged_into"])].concat()
}

fn integrate(
    ic: &Initial64,
    m: &Model64,
    options: FlowOptions<f64>,
    seeds: &[Vec64],
    horizon: f64,
    dt: f64,
    merge_tol: Option<f64>,
) -> Run<Vec<ParticleTrajectory<f64>>> {
    let flow = Flow::new(ic, m, options).map_err(|e| Failure::core("flow", e))?;
    let mut trajs = flow.integrate(seeds, horizon, dt).map_err(|e| Failure::core("flow", e))?;
    let tol = merge_tol.unwrap_or(2.0 * dt * flow.speed_bound());
    detect_coalescence(&mut trajs, tol).map_err(|e| Failure::core("coalescence", e))?;
    Ok(trajs)
}

fn particles(ic: &Initial64, m: &Model64, options: FlowOptions<f64>, p: &ParticleParams, out: &mut Artifacts) -> Run {
    let trajs = integrate(ic, m, options, &p.seeds, p.horizon, p.dt, p.merge_tol)?;
    out.csv("trajectories.csv", &trajectory_header(ic.dim()), trajectory_rows(&trajs))?;
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    let events = trajs.iter().map(|tr| {
        vec![
            tr.id.to_string(),
            opt(tr.shock_entry),
            tr.merged_into.map(|j| j.to_string()).unwrap_or_default(),
            opt(tr.merged_at),
        ]
    });
    out.csv("events.csv", &header(&["traj_id", "shock_entry", "merged_into", "merged_at"]), events)?;
    Ok(())
}

fn ladder(ic: &Initial64, m: &Model64, v: &ViscousParams) -> Run<Vec<FieldSeries<f64>>> {
    v.mu_ladder
        .par_iter()
        .map(|&mu| solve_viscous(ic, m, mu, v.horizon, v.n, v.dt))
        .collect::<Result<_, Error>>()
        .map_err(|e| Failure::core("viscous", e))
}

fn field_rows(series: &FieldSeries<f64>, interval: f64) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    let mut next = series.start();
    for f in &series.frames {
        if f.time + 1e-9 < next {
            continue;
        }
        next = f.time + interval;
        for flat in 0..f.values.len() {
            let x = f.node_position(flat);
            let mut row = vec![num(f.time)];
            row.extend(point(&x));
            row.push(num(f.value_at(&x)));
            rows.push(row);
        }
    }
    rows
}

fn regularized(
    series: &FieldSeries<f64>,
    m: &Model64,
    seeds: &[Vec64],
    dt: f64,
) -> Run<Vec<(ParticleTrajectory<f64>, bool)>> {
    seeds
        .par_iter()
        .enumerate()
        .map(|(id, s)| {
            integrate_regularized_flow(series, m, s, dt).map(|r| {
                let mut tr = r.trajectory;
                tr.id = id;
                (tr, r.extrapolated)
            })
        })
        .collect::<Result<_, Error>>()
        .map_err(|e| Failure::core("regularized flow", e))
}

fn viscous_compare(
    ic: &Initial64,
    m: &Model64,
    options: FlowOptions<f64>,
    v: &ViscousParams,
    out: &mut Artifacts,
) -> Run {
    let dim = ic.dim();
    let inviscid = integrate(ic, m, options, &v.seeds, v.horizon, v.particle_dt, None)?;
    out.csv("trajectories.csv", &trajectory_header(dim), trajectory_rows(&inviscid))?;
    let mut compare = Vec::new();
    for (mu, series) in v.mu_ladder.iter().zip(ladder(ic, m, v)?) {
        let regs = regularized(&series, m, &v.seeds, v.particle_dt)?;
        let trajs: Vec<_> = regs.iter().map(|r| r.0.clone()).collect();
        for ((tr, extrapolated), reference) in regs.iter().zip(&inviscid) {
            let sup = tr
                .times
                .iter()
                .zip(&tr.positions)
                .map(|(&t, x)| x.distance(&reference.position_at(t)))
                .fold(0.0, f64::max);
            compare.push(vec![num(*mu), tr.id.to_string(), num(sup), extrapolated.to_string()]);
        }
        out.csv(&format!("trajectories_{}.csv", tag("mu", *mu)), &trajectory_header(dim), trajectory_rows(&trajs))?;
        let h = [header(&["t"]), coords("x", dim), header(&["phi"])].concat();
        out.csv(&format!("fields_{}.csv", tag("mu", *mu)), &h, field_rows(&series, v.field_interval))?;
    }
    out.csv("compare.csv", &header(&["mu", "traj_id", "sup_distance", "extrapolated"]), compare)?;
    Ok(())
}

fn anomaly(
    ic: &Initial64,
    m: &Model64,
    options: FlowOptions<f64>,
    v: &ViscousParams,
    a: &AnomalyParams,
    out: &mut Artifacts,
) -> Run {
    // signed anomaly predicted at the middle of the window on the inviscid shock path
    let mid = 0.5 * (a.window.0 + a.window.1);
    let flow = Flow::new(ic, m, options).map_err(|e| Failure::core("flow", e))?;
    let path = flow.trajectory(0, &a.seed, v.horizon, v.particle_dt).map_err(|e| Failure::core("flow", e))?;
    let lms = flow.limit_data(mid, &path.position_at(mid)).map_err(|e| Failure::core("limit data", e))?;
    let target = if lms.k() > 1 {
        let s = admissible_velocity(&lms, m, 1e-9).map_err(|e| Failure::core("admissible velocity", e))?;
        Some(-s.anomaly)
    } else {
        None
    };

    let mut summary = Vec::new();
    let mut finest: Option<(f64, Vec<Vec<String>>)> = None;
    for (mu, series) in v.mu_ladder.iter().zip(ladder(ic, m, v)?) {
        let shock = integrate_regularized_flow(&series, m, &a.seed, v.particle_dt)
            .map_err(|e| Failure::core("regularized flow", e))?;
        let samples = anomaly_along(&series, m, &shock.trajectory);
        let level = plateau(&samples, a.window.0, a.window.1).ok_or_else(|| {
            Failure::Config(crate::config::ConfigError::new("anomaly.window", "no samples inside the window"))
        })?;
        let rows: Vec<Vec<String>> = samples.iter().map(|s| vec![num(s.t), num(s.value)]).collect();
        out.csv(&format!("anomaly_{}.csv", tag("mu", *mu)), &header(&["t", "value"]), rows.clone())?;
        summary.push(vec![num(*mu), num(level), target.map(num).unwrap_or_default()]);
        if finest.as_ref().is_none_or(|(f, _)| mu < f) {
            finest = Some((*mu, rows));
        }
    }
    let (_, rows) = finest.expect("non-empty ladder");
    out.csv("anomaly.csv", &header(&["t", "value"]), rows)?;
    out.csv("plateau.csv", &header(&["mu", "plateau", "target"]), summary)?;
    Ok(())
}

fn sde(ic: &Initial64, m: &Model64, p: &SdeParams, rng_seed: u64, out: &mut Artifacts) -> Run {
    let dim = ic.dim();
    let mut occupancy = Vec::new();
    let mut comparison = Vec::new();
    let comparison_header =
        [header(&["epsilon", "source"]), coords("v", dim), coords("se", dim), header(&["gap", "verdict"])].concat();
    for &epsilon in &p.epsilon_ladder {
        let cfg =
            SdeConfig { epsilon, seed_point: p.seed_point, horizon: p.horizon, dt: p.dt, n_paths: p.paths, rng_seed };
        let ens = simulate_sde(ic, m, &cfg).map_err(|e| Failure::core("sde", e))?;
        let lms = LimitMomentumSet::from_momenta(m, &ens.branches).map_err(|e| Failure::core("limit data", e))?;
        let report =
            compare_regularizations(&lms, m, &ens).map_err(|e| Failure::core("regularization comparison", e))?;
        for (j, b) in ens.branches.iter().enumerate() {
            let mut row = vec![num(epsilon), j.to_string()];
            row.extend(point(b));
            row.extend([num(ens.occupancy[j]), num(ens.occupancy_se[j])]);
            occupancy.push(row);
        }
        let blank = vec![String::new(); dim];
        let mut row = vec![num(epsilon), "admissible".to_string()];
        row.extend(point(&report.admissible.v_star));
        row.extend(blank.clone());
        row.extend([num(0.0), String::new()]);
        comparison.push(row);
        for ((c, gap), verdict) in report.candidates.iter().zip(&report.gaps).zip(&report.verdicts) {
            let mut row = vec![num(epsilon), "self-consistent".to_string()];
            row.extend(point(&c.v_dagger));
            row.extend(blank.clone());
            row.extend([num(*gap), verdict.as_str().to_string()]);
            comparison.push(row);
        }
        let mut row = vec![num(epsilon), "sde".to_string()];
        row.extend(point(&report.sde_velocity));
        row.extend(point(&report.sde_velocity_se));
        row.extend([
            num(report.sde_velocity.distance(&report.admissible.v_star)),
            report.sde_verdict.as_str().to_string(),
        ]);
        comparison.push(row);

        let mut paths = Vec::new();
        for (id, path) in ens.paths.iter().take(p.saved_paths).enumerate() {
            for (n, x) in path.positions.iter().enumerate() {
                let mut row = vec![id.to_string(), num(ens.dt * n as f64)];
                row.extend(point(x));
                row.push(path.labels.get(n).or(path.labels.last()).map(|l| l.to_string()).unwrap_or_default());
                paths.push(row);
            }
        }
        let h = [header(&["traj_id", "t"]), coords("x", dim), header(&["branch"])].concat();
        out.csv(&format!("sde_paths_{}.csv", tag("eps", epsilon)), &h, paths)?;
    }
    let h = [header(&["epsilon", "branch"]), coords("p", dim), header(&["share", "se"])].concat();
    out.csv("occupancy.csv", &h, occupancy)?;
    out.csv("comparison.csv", &comparison_header, comparison)?;
    Ok(())
}

fn class_name(c: ShockClass) -> &'static str {
    match c {
        ShockClass::Restraining => "restraining",
        ShockClass::Nonrestraining => "nonrestraining",
        ShockClass::NotAShock => "not-a-shock",
    }
}

fn bench(p: &BenchParams, rng_seed: u64, out: &mut Artifacts) -> Run {
    let instances = random_instances::<f64>(p.instances, rng_seed).map_err(|e| Failure::core("bench setup", e))?;
    let rows: Vec<Vec<String>> = instances
        .par_iter()
        .map(|inst| -> Result<Vec<String>, Error> {
            let dim = inst.lms.dim();
            let s = admissible_velocity(&inst.lms, &inst.model, p.tol)?;
            let pad = |x: &Vec64| {
                let mut c = point(x);
                c.resize(3, String::new());
                c
            };
            let mut row = vec![
                inst.id.to_string(),
                inst.model.kind().name().to_string(),
                dim.to_string(),
                inst.lms.k().to_string(),
            ];
            row.extend(pad(&s.v_star));
            row.extend([
                num(lhat(&inst.lms, &inst.model, &s.v_star)),
                class_name(classify_shock(&inst.lms, &s)).to_string(),
            ]);
            if p.oracle {
                let step = oracle_step::<f64>(dim);
                let o = grid_oracle(&inst.lms, &inst.model, step);
                let gap = s.v_star.distance(&o.v);
                row.extend(pad(&o.v));
                row.extend([num(o.value), num(step), num(gap), num(gap / step)]);
            } else {
                row.extend(vec![String::new(); 7]);
            }
            Ok(row)
        })
        .collect::<Result<_, Error>>()
        .map_err(|e| Failure::core("admissible velocity", e))?;
    let h = [
        header(&["id", "kind", "dim", "k"]),
        coords("v", 3),
        header(&["lhat", "class"]),
        coords("oracle_v", 3),
        header(&["oracle_lhat", "oracle_step", "oracle_gap", "gap_steps"]),
    ]
    .concat();
    out.csv("bench.csv", &h, rows)?;
    Ok(())
}
