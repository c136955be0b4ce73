//! Weak-noise regularization of the particle flow and self-consistent velocities.
//!
//! Paths follow `dx = grad_p H(grad phi(t, x)) dt + eps dW` where `phi` is the
//! inviscid solution. The share of time a path spends on each smooth branch
//! estimates the weights `pi_j` in `v = sum_j pi_j v_j`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::admissible::{active_set, admissible_velocity, AdmissibleSolution, DEFAULT_TIE_TOL};
use crate::error::{Error, Result};
use crate::hopf_lax::HopfLaxSolver;
use crate::hull::subsets_of_size;
use crate::initial::InitialCondition;
use crate::legendre::HamiltonianModel;
use crate::linalg::DenseMatrix;
use crate::scalar::{count, lit, to_f64, Real};
use crate::superdiff::{limit_data, LimitMomentumSet};
use crate::vector::Vector;

/// One Euler-Maruyama path with its branch label at every step.
#[derive(Clone, Debug, PartialEq)]
pub struct SdePath<T> {
    pub positions: Vec<Vector<T>>,
    /// Index into [`SdeEnsemble::branches`] of the branch attaining the minimum.
    pub labels: Vec<usize>,
}

/// Monte-Carlo ensemble and its occupancy estimates.
#[derive(Clone, Debug)]
pub struct SdeEnsemble<T> {
    pub epsilon: T,
    pub rng_seed: u64,
    pub n_paths: usize,
    pub dt: T,
    pub horizon: T,
    pub seed_point: Vector<T>,
    /// Reference momenta of the branches used for labelling.
    pub branches: Vec<Vector<T>>,
    pub paths: Vec<SdePath<T>>,
    /// Time share per branch, summing to one.
    pub occupancy: Vec<T>,
    /// Standard errors of the shares across paths.
    pub occupancy_se: Vec<T>,
    /// Ensemble mean of `(x_T - x_0) / T`.
    pub mean_velocity: Vector<T>,
    pub mean_velocity_se: Vector<T>,
}

/// Drift source of the simulation.
enum Drift<T> {
    /// `phi(t, x) = min_j (p_j . x + c_j - t H(p_j))`.
    Affine {
        branches: Vec<(Vector<T>, T, T)>,
        velocities: Vec<Vector<T>>,
    },
    Variational {
        solver: HopfLaxSolver<T>,
        references: Vec<Vector<T>>,
    },
}

impl<T: Real> Drift<T> {
    fn new(ic: &InitialCondition<T>, model: &HamiltonianModel<T>, seed_point: &Vector<T>, horizon: T) -> Result<Self> {
        if let Some(affine) = ic.affine_branches() {
            let branches: Vec<(Vector<T>, T, T)> = affine.iter().map(|(p, c)| (*p, *c, model.hamiltonian(p))).collect();
            let velocities = affine.iter().map(|(p, _)| model.velocity_of_momentum(p)).collect();
            return Ok(Drift::Affine { branches, velocities });
        }
        // label against the branches meeting at the seed point halfway through the run
        let lms = limit_data(ic, model, horizon * lit(0.5), seed_point)?;
        Ok(Drift::Variational { solver: HopfLaxSolver::default(), references: lms.momenta() })
    }

    fn references(&self) -> Vec<Vector<T>> {
        match self {
            Drift::Affine { branches, .. } => branches.iter().map(|b| b.0).collect(),
            Drift::Variational { references, .. } => references.clone(),
        }
    }

    fn eval(
        &self,
        ic: &InitialCondition<T>,
        model: &HamiltonianModel<T>,
        t: T,
        x: &Vector<T>,
    ) -> Result<(Vector<T>, usize)> {
        match self {
            Drift::Affine { branches, velocities } => {
                let mut best = 0;
                let mut best_value = T::infinity();
                for (j, (p, c, h)) in branches.iter().enumerate() {
                    let value = p.dot(x) + *c - t * *h;
                    if value < best_value {
                        best_value = value;
                        best = j;
                    }
                }
                Ok((velocities[best], best))
            }
            Drift::Variational { solver, references } => {
                let p = if t > T::zero() {
                    let r = solver.solve(ic, model, t, x)?;
                    model.momentum_of_velocity(&r.velocities[0])
                } else {
                    ic.gradient(x).unwrap_or_else(|| references[0])
                };
                let label = (0..references.len())
                    .min_by(|&a, &b| references[a].distance(&p).partial_cmp(&references[b].distance(&p)).unwrap())
                    .unwrap_or(0);
                Ok((model.velocity_of_momentum(&p), label))
            }
        }
    }
}

/// Settings of an ensemble run.
#[derive(Clone, Debug)]
pub struct SdeConfig<T> {
    pub epsilon: T,
    pub seed_point: Vector<T>,
    pub horizon: T,
    pub dt: T,
    pub n_paths: usize,
    pub rng_seed: u64,
}

/// Euler-Maruyama ensemble started at `seed_point` at `t = 0`.
pub fn simulate_sde<T: Real>(
    ic: &InitialCondition<T>,
    model: &HamiltonianModel<T>,
    config: &SdeConfig<T>,
) -> Result<SdeEnsemble<T>> {
    let SdeConfig { epsilon, seed_point, horizon, dt, n_paths, rng_seed } = config.clone();
    if !(epsilon >= T::zero()) || !epsilon.is_finite() {
        return Err(Error::config("epsilon", "noise amplitude must be non-negative"));
    }
    if !(dt > T::zero()) || dt > lit(1e-3) {
        return Err(Error::config("dt", "step must lie in (0, 1e-3]"));
    }
    if !(horizon > T::zero()) || !horizon.is_finite() {
        return Err(Error::config("T", "horizon must be positive"));
    }
    if n_paths < 2 {
        return Err(Error::config("n_paths", "at least two paths are needed for error bars"));
    }
    if seed_point.dim() != model.dim() || ic.dim() != model.dim() {
        return Err(Error::config("dim", "seed, fixture and Hamiltonian dimensions differ"));
    }
    let drift = Drift::new(ic, model, &seed_point, horizon)?;
    let branches = drift.references();
    let steps = (horizon / dt).round().to_usize().unwrap_or(1).max(1);
    let dt = horizon / count::<T>(steps);
    let sqrt_dt = dt.sqrt();
    let dim = seed_point.dim();

    let paths: Vec<SdePath<T>> = (0..n_paths)
        .into_par_iter()
        .map(|path| -> Result<SdePath<T>> {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(path as u64);
            let mut x = seed_point;
            let mut positions = Vec::with_capacity(steps + 1);
            let mut labels = Vec::with_capacity(steps);
            positions.push(x);
            for n in 0..steps {
                let t = dt * count::<T>(n);
                let (v, label) = drift.eval(ic, model, t, &x)?;
                labels.push(label);
                let mut noise = Vector::zeros(dim);
                for k in 0..dim {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    noise[k] = lit::<T>(z);
                }
                x = x + v * dt + noise * (epsilon * sqrt_dt);
                if !x.is_finite() {
                    return Err(Error::NonFinite { step: n + 1, t: to_f64(t + dt) });
                }
                positions.push(x);
            }
            Ok(SdePath { positions, labels })
        })
        .collect::<Result<_>>()?;

    let k = branches.len();
    let n = count::<T>(n_paths);
    let shares: Vec<Vec<T>> = paths
        .iter()
        .map(|p| {
            let mut c = vec![T::zero(); k];
            for &l in &p.labels {
                c[l] = c[l] + T::one();
            }
            c.into_iter().map(|x| x / count::<T>(p.labels.len())).collect()
        })
        .collect();
    let mut occupancy = vec![T::zero(); k];
    let mut occupancy_se = vec![T::zero(); k];
    for j in 0..k {
        let (mean, se) = mean_and_se(shares.iter().map(|s| s[j]), n);
        occupancy[j] = mean;
        occupancy_se[j] = se;
    }
    let mut mean_velocity = Vector::zeros(dim);
    let mut mean_velocity_se = Vector::zeros(dim);
    for c in 0..dim {
        let (mean, se) = mean_and_se(paths.iter().map(|p| (p.positions[steps][c] - p.positions[0][c]) / horizon), n);
        mean_velocity[c] = mean;
        mean_velocity_se[c] = se;
    }
    Ok(SdeEnsemble {
        epsilon,
        rng_seed,
        n_paths,
        dt,
        horizon,
        seed_point,
        branches,
        paths,
        occupancy,
        occupancy_se,
        mean_velocity,
        mean_velocity_se,
    })
}

fn mean_and_se<T: Real>(xs: impl Iterator<Item = T> + Clone, n: T) -> (T, T) {
    let mean = xs.clone().sum::<T>() / n;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<T>() / (n - T::one());
    (mean, (var / n).sqrt())
}

/// Solution of `v = sum_{j in S} pi_j v_j` with `S = I(v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SelfConsistentSolution<T> {
    pub v_dagger: Vector<T>,
    pub active_set: Vec<usize>,
    /// Weights over `active_set`, in the same order.
    pub shares: Vec<T>,
}

/// Every self-consistent velocity of `lms`, found by enumerating branch subsets.
pub fn self_consistent_velocity<T: Real>(
    lms: &LimitMomentumSet<T>,
    _model: &HamiltonianModel<T>,
    tol: T,
) -> Result<Vec<SelfConsistentSolution<T>>> {
    let k = lms.k();
    if k > 8 {
        return Err(Error::config("momenta", "self-consistent enumeration supports at most 8 branches"));
    }
    let scale = lms.entries.iter().fold(T::one(), |m, e| m.max(e.v.norm()).max(e.p.norm()).max(e.h.abs()));
    let mut out: Vec<SelfConsistentSolution<T>> = Vec::new();
    for size in 1..=k {
        for subset in subsets_of_size(k, size) {
            let Some(shares) = subset_shares(lms, &subset) else { continue };
            if shares.iter().any(|&s| s < -tol) {
                continue;
            }
            let shares: Vec<T> = shares.into_iter().map(|s| s.max(T::zero())).collect();
            let total: T = shares.iter().copied().sum();
            let shares: Vec<T> = shares.into_iter().map(|s| s / total).collect();
            let mut v = Vector::zeros(lms.dim());
            for (&j, &s) in subset.iter().zip(&shares) {
                v += lms.entries[j].v * s;
            }
            if active_set(lms, &v, tol * scale) != subset {
                continue;
            }
            if out.iter().any(|s| s.v_dagger.distance(&v) <= tol * scale) {
                continue;
            }
            out.push(SelfConsistentSolution { v_dagger: v, active_set: subset, shares });
        }
    }
    Ok(out)
}

/// Solves the square system `sum pi = 1`, `(p_j - p_s0) . sum pi_i v_i = H_j - H_s0`.
fn subset_shares<T: Real>(lms: &LimitMomentumSet<T>, subset: &[usize]) -> Option<Vec<T>> {
    let m = subset.len();
    if m == 1 {
        return Some(vec![T::one()]);
    }
    let base = &lms.entries[subset[0]];
    let mut a = DenseMatrix::zeros(m, m);
    let mut rhs = vec![T::zero(); m];
    for c in 0..m {
        a[(0, c)] = T::one();
    }
    rhs[0] = T::one();
    for r in 1..m {
        let e = &lms.entries[subset[r]];
        let dp = e.p - base.p;
        for (c, &i) in subset.iter().enumerate() {
            a[(r, c)] = dp.dot(&lms.entries[i].v);
        }
        rhs[r] = e.h - base.h;
    }
    a.solve(&rhs)
}

/// Whether two velocities agree within the stated tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Coincide,
    Differ,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Coincide => "coincide",
            Verdict::Differ => "differ",
        }
    }
}

/// Side-by-side account of the admissible and self-consistent velocities.
#[derive(Clone, Debug)]
pub struct RegularizationReport<T> {
    pub admissible: AdmissibleSolution<T>,
    pub candidates: Vec<SelfConsistentSolution<T>>,
    /// `|v_dagger - v*|` per candidate.
    pub gaps: Vec<T>,
    pub tolerance: T,
    /// Per-candidate comparison against `v*` at `tolerance`.
    pub verdicts: Vec<Verdict>,
    pub sde_velocity: Vector<T>,
    pub sde_velocity_se: Vector<T>,
    pub occupancy: Vec<T>,
    pub occupancy_se: Vec<T>,
    /// `v*` against the ensemble mean, within three standard errors per component.
    pub sde_verdict: Verdict,
}

/// Admissible velocity, self-consistent candidates and ensemble statistics.
pub fn compare_regularizations<T: Real>(
    lms: &LimitMomentumSet<T>,
    model: &HamiltonianModel<T>,
    sde: &SdeEnsemble<T>,
) -> Result<RegularizationReport<T>> {
    let tol = lit::<T>(DEFAULT_TIE_TOL);
    let admissible = admissible_velocity(lms, model, tol)?;
    let candidates = self_consistent_velocity(lms, model, tol)?;
    let scale = lms.entries.iter().fold(T::one(), |m, e| m.max(e.v.norm()));
    let tolerance = lit::<T>(1e-8) * scale;
    let gaps: Vec<T> = candidates.iter().map(|c| c.v_dagger.distance(&admissible.v_star)).collect();
    let verdicts = gaps.iter().map(|&g| if g <= tolerance { Verdict::Coincide } else { Verdict::Differ }).collect();
    let three = lit::<T>(3.0);
    let sde_ok = (0..lms.dim())
        .all(|c| (sde.mean_velocity[c] - admissible.v_star[c]).abs() <= three * sde.mean_velocity_se[c] + tolerance);
    Ok(RegularizationReport {
        admissible,
        candidates,
        gaps,
        tolerance,
        verdicts,
        sde_velocity: sde.mean_velocity,
        sde_velocity_se: sde.mean_velocity_se,
        occupancy: sde.occupancy.clone(),
        occupancy_se: sde.occupancy_se.clone(),
        sde_verdict: if sde_ok { Verdict::Coincide } else { Verdict::Differ },
    })
}
