//! The coalescing particle flow driven by the admissible velocity field.
//!
//! Each step evaluates the limit data at the particle, advances it by
//! `dt * v*`, and then corrects the position: a particle inside a shock is
//! projected back onto the set where its active branches tie, and a particle
//! whose branch stopped being minimal during the step is moved back to the
//! shock it crossed.

use rayon::prelude::*;

use crate::admissible::AdmissibleSolver;
use crate::error::{Error, Result};
use crate::hopf_lax::speed_bound;
use crate::initial::InitialCondition;
use crate::legendre::HamiltonianModel;
use crate::linalg::{orthonormalize, SmallMatrix};
use crate::scalar::{lit, to_f64, Real};
use crate::superdiff::{LimitDataOptions, LimitEntry, LimitMomentumSet};
use crate::vector::Vector;

/// One sampled trajectory of the flow.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleTrajectory<T> {
    pub id: usize,
    pub seed: Vector<T>,
    pub times: Vec<T>,
    pub positions: Vec<Vector<T>>,
    /// Shock indicator at each sample.
    pub on_shock: Vec<bool>,
    pub shock_entry: Option<T>,
    /// Lowest id of the trajectories this one coalesced with.
    pub merged_into: Option<usize>,
    pub merged_at: Option<T>,
}

impl<T: Real> ParticleTrajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Vector<T> {
        *self.positions.last().expect("non-empty trajectory")
    }

    /// Piecewise-linear position at time `t`, clamped to the sampled span.
    pub fn position_at(&self, t: T) -> Vector<T> {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.positions[0];
        }
        if t >= self.times[n - 1] {
            return self.positions[n - 1];
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        self.positions[k] + (self.positions[k + 1] - self.positions[k]) * w
    }
}

/// How branch values are evaluated.
#[derive(Clone, Debug)]
pub enum BranchSource<T> {
    /// Closed form for concave piecewise-affine data.
    Affine(Vec<(Vector<T>, T)>),
    /// Local polish of the variational objective.
    Variational,
}

#[derive(Clone, Debug)]
pub struct FlowOptions<T> {
    pub limit: LimitDataOptions<T>,
    pub admissible: AdmissibleSolver<T>,
    /// Use the closed form when the initial data is concave piecewise affine.
    pub prefer_exact: bool,
    /// Apply the shock projection and crossing correction.
    pub snap: bool,
    /// Branch values within this (relative) band count as tied.
    pub value_rel_tol: T,
}

impl<T: Real> Default for FlowOptions<T> {
    fn default() -> Self {
        Self {
            limit: LimitDataOptions::default(),
            admissible: AdmissibleSolver::default(),
            prefer_exact: true,
            snap: true,
            value_rel_tol: lit(1e-7),
        }
    }
}

/// Evaluation context for one fixture and Hamiltonian.
pub struct Flow<'a, T> {
    ic: &'a InitialCondition<T>,
    model: &'a HamiltonianModel<T>,
    options: FlowOptions<T>,
    source: BranchSource<T>,
    v_max: T,
}

impl<'a, T: Real> Flow<'a, T> {
    pub fn new(ic: &'a InitialCondition<T>, model: &'a HamiltonianModel<T>, options: FlowOptions<T>) -> Result<Self> {
        if ic.dim() != model.dim() {
            return Err(Error::config("dim", "fixture and Hamiltonian dimensions differ"));
        }
        let source = match ic.affine_branches() {
            Some(b) if options.prefer_exact => BranchSource::Affine(b),
            _ => BranchSource::Variational,
        };
        Ok(Self { ic, model, v_max: speed_bound(ic, model), options, source })
    }

    pub fn speed_bound(&self) -> T {
        self.v_max
    }

    pub fn source(&self) -> &BranchSource<T> {
        &self.source
    }

    /// Limit data at `(t, x)`, `t > 0`.
    pub fn limit_data(&self, t: T, x: &Vector<T>) -> Result<LimitMomentumSet<T>> {
        match &self.source {
            BranchSource::Variational => self.options.limit.limit_data(self.ic, self.model, t, x),
            BranchSource::Affine(branches) => {
                if !(t > T::zero()) {
                    return Err(Error::config("t", "time must be positive"));
                }
                let vals: Vec<T> = branches.iter().map(|(p, c)| self.affine_value(p, *c, t, x)).collect();
                let min = vals.iter().copied().fold(T::infinity(), T::min);
                let band = self.options.value_rel_tol * (T::one() + min.abs());
                let mut entries: Vec<LimitEntry<T>> = Vec::new();
                for (i, (p, _)) in branches.iter().enumerate() {
                    if vals[i] <= min + band
                        && entries.iter().all(|e| e.p.distance(p) >= self.options.limit.momentum_tol)
                    {
                        let v = self.model.velocity_of_momentum(p);
                        entries.push(LimitEntry { p: *p, h: self.model.hamiltonian(p), v, preimage: Some(*x - v * t) });
                    }
                }
                entries.sort_by(|a, b| a.p.as_slice().partial_cmp(b.p.as_slice()).unwrap_or(std::cmp::Ordering::Equal));
                Ok(LimitMomentumSet { t, x: *x, entries })
            }
        }
    }

    fn affine_value(&self, p: &Vector<T>, c: T, t: T, x: &Vector<T>) -> T {
        p.dot(x) + c - t * self.model.hamiltonian(p)
    }

    /// `phi(t, x)`.
    pub fn value(&self, t: T, x: &Vector<T>) -> Result<T> {
        match &self.source {
            BranchSource::Affine(branches) => {
                Ok(branches.iter().map(|(p, c)| self.affine_value(p, *c, t, x)).fold(T::infinity(), T::min))
            }
            BranchSource::Variational => Ok(self.options.limit.solver.solve(self.ic, self.model, t, x)?.value),
        }
    }

    /// Value and momentum at `(t, x)` of the branch that `entry` belongs to.
    pub fn branch(&self, t: T, x: &Vector<T>, entry: &LimitEntry<T>, search: T) -> (T, Vector<T>) {
        match &self.source {
            BranchSource::Affine(branches) => {
                let (p, c) = branches
                    .iter()
                    .min_by(|a, b| a.0.distance(&entry.p).partial_cmp(&b.0.distance(&entry.p)).unwrap())
                    .expect("non-empty branch list");
                (self.affine_value(p, *c, t, x), *p)
            }
            BranchSource::Variational => {
                let seed = entry.preimage.unwrap_or_else(|| *x - entry.v * t);
                let bp = self.options.limit.solver.branch_value(self.ic, self.model, t, x, &seed, search);
                (bp.value, self.model.momentum_of_velocity(&((*x - bp.preimage) / t)))
            }
        }
    }

    /// Admissible velocity `v*(t, x)` together with the limit data it came from.
    pub fn velocity(&self, t: T, x: &Vector<T>) -> Result<(Vector<T>, LimitMomentumSet<T>, Vec<usize>)> {
        let lms = self.limit_data(t, x)?;
        let sol = self.options.admissible.solve(&lms, self.model)?;
        Ok((sol.v_star, lms, sol.active_set))
    }

    /// Integrates one trajectory from `seed` over `[0, horizon]` with step `dt`.
    pub fn trajectory(&self, id: usize, seed: &Vector<T>, horizon: T, dt: T) -> Result<ParticleTrajectory<T>> {
        validate_steps(horizon, dt)?;
        let steps = (horizon / dt).round().to_usize().unwrap_or(0).max(1);
        let mut traj = ParticleTrajectory {
            id,
            seed: *seed,
            times: Vec::with_capacity(steps + 1),
            positions: Vec::with_capacity(steps + 1),
            on_shock: Vec::with_capacity(steps + 1),
            shock_entry: None,
            merged_into: None,
            merged_at: None,
        };
        let mut x = *seed;
        let probe = dt * lit(1e-3);
        let search = lit::<T>(4.0) * dt * self.v_max + lit(1e-8);
        for n in 0..=steps {
            let t = dt * T::from_usize(n).unwrap();
            if !x.is_finite() {
                return Err(Error::NonFinite { step: n, t: to_f64(t) });
            }
            let te = if n == 0 { probe } else { t };
            let (v, lms, active) = self.velocity(te, &x)?;
            traj.times.push(t);
            traj.positions.push(x);
            traj.on_shock.push(lms.is_shock());
            if lms.is_shock() && traj.shock_entry.is_none() {
                traj.shock_entry = Some(t);
            }
            if n == steps {
                break;
            }
            let speed = v.norm();
            if speed > self.v_max * (T::one() + lit(1e-6)) + lit(1e-9) {
                return Err(Error::StepRejected { t: to_f64(t), speed: to_f64(speed), bound: to_f64(self.v_max) });
            }
            let t1 = t + dt;
            let trial = x + v * dt;
            x = if !self.options.snap {
                trial
            } else if lms.is_shock() {
                let mut branches: Vec<LimitEntry<T>> = active.iter().map(|&j| lms.entries[j]).collect();
                let mut y = self.snap(t1, &trial, &branches, dt, search);
                // a branch outside the active set may be minimal at the projection,
                // as when a shock line runs into a junction
                for _ in 0..x.dim() {
                    let here = self.limit_data(t1, &y)?;
                    let tol = self.options.limit.momentum_tol;
                    let fresh: Vec<LimitEntry<T>> = here
                        .entries
                        .into_iter()
                        .filter(|e| branches.iter().all(|b| b.p.distance(&e.p) >= tol))
                        .collect();
                    if fresh.is_empty() {
                        break;
                    }
                    branches.extend(fresh);
                    y = self.snap(t1, &trial, &branches, dt, search);
                }
                y
            } else {
                self.uncross(t1, &x, &trial, &lms.entries[0], search)?
            };
        }
        Ok(traj)
    }

    /// Projects `x` onto `{ phi_a(t, .) = phi_b(t, .) for all active a, b }`.
    fn snap(&self, t: T, x: &Vector<T>, branches: &[LimitEntry<T>], dt: T, search: T) -> Vector<T> {
        if branches.len() < 2 {
            return *x;
        }
        let eval =
            |y: &Vector<T>| -> Vec<(T, Vector<T>)> { branches.iter().map(|e| self.branch(t, y, e, search)).collect() };
        let width = lit::<T>(2.0) * dt * self.v_max + lit(1e-12);

        // independent constraints phi_j - phi_0
        let at_x = eval(x);
        let mut basis: Vec<Vector<T>> = Vec::new();
        let mut rows: Vec<usize> = Vec::new();
        for j in 1..branches.len() {
            if let Some(u) = orthonormalize(&(at_x[j].1 - at_x[0].1), &basis, lit(1e-8)) {
                basis.push(u);
                rows.push(j);
            }
        }
        if rows.is_empty() {
            return *x;
        }
        if rows.len() == 1 {
            let j = rows[0];
            let dir = basis[0];
            let gap = |s: T| {
                let y = *x + dir * s;
                let vals = eval(&y);
                vals[j].0 - vals[0].0
            };
            // grow the bracket from the trial point; branches may cease to exist
            // a short distance away, where both evaluations collapse onto one basin
            let mut w = width * lit(1e-4);
            let (mut lo, mut hi, increasing) = loop {
                let (glo, ghi) = (gap(-w), gap(w));
                if glo.is_nan() || ghi.is_nan() {
                    return *x;
                }
                if glo * ghi < T::zero() {
                    break (-w, w, ghi > glo);
                }
                w = w + w;
                if w > width {
                    return *x;
                }
            };
            for _ in 0..200 {
                let mid = (lo + hi) * lit(0.5);
                if mid == lo || mid == hi {
                    break;
                }
                let g = gap(mid);
                if (g > T::zero()) == increasing {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return *x + dir * ((lo + hi) * lit(0.5));
        }

        // Gauss-Newton minimum-norm steps for two or more constraints
        let mut y = *x;
        for _ in 0..30 {
            let vals = eval(&y);
            let m = rows.len();
            let mut jj = SmallMatrix::zeros(m);
            let mut c = Vector::zeros(m);
            let grads: Vec<Vector<T>> = rows.iter().map(|&j| vals[j].1 - vals[0].1).collect();
            for a in 0..m {
                c[a] = vals[rows[a]].0 - vals[0].0;
                for b in 0..m {
                    jj.set(a, b, grads[a].dot(&grads[b]));
                }
            }
            if c.max_abs() <= lit::<T>(1e-14) * (T::one() + vals[0].0.abs()) {
                break;
            }
            let Some(w) = jj.solve(&c) else { break };
            let mut step = Vector::zeros(y.dim());
            for a in 0..m {
                step += grads[a] * w[a];
            }
            y -= step;
            if (y - *x).norm() > width {
                return *x;
            }
        }
        y
    }

    /// When the branch followed during the step is no longer minimal at `trial`,
    /// returns the point where it stopped being minimal.
    fn uncross(
        &self,
        t: T,
        start: &Vector<T>,
        trial: &Vector<T>,
        entry: &LimitEntry<T>,
        search: T,
    ) -> Result<Vector<T>> {
        let gap = |y: &Vector<T>, band: T| -> Result<T> {
            let phi = self.value(t, y)?;
            let own = self.branch(t, y, entry, search).0;
            Ok(own - phi - band * (T::one() + phi.abs()))
        };
        if gap(trial, self.options.value_rel_tol)? <= T::zero() {
            return Ok(*trial);
        }
        // land well inside the tie band used to detect shocks
        let band = self.options.value_rel_tol * lit(1e-3);
        let gap = |y: &Vector<T>| gap(y, band);
        let dir = *trial - *start;
        let point = |s: T| *start + dir * s;
        // the shock may also have moved past the starting point
        let mut lo = T::zero();
        while gap(&point(lo))? > T::zero() {
            lo = lo - T::one();
            if lo < -lit::<T>(2.0) {
                return Ok(*trial);
            }
        }
        let mut hi = T::one();
        for _ in 0..100 {
            let mid = (lo + hi) * lit(0.5);
            if mid == lo || mid == hi {
                break;
            }
            if gap(&point(mid))? > T::zero() {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(point((lo + hi) * lit(0.5)))
    }

    /// Integrates every seed; trajectories are independent and run in parallel.
    pub fn integrate(&self, seeds: &[Vector<T>], horizon: T, dt: T) -> Result<Vec<ParticleTrajectory<T>>> {
        validate_steps(horizon, dt)?;
        seeds.par_iter().enumerate().map(|(id, s)| self.trajectory(id, s, horizon, dt)).collect()
    }
}

fn validate_steps<T: Real>(horizon: T, dt: T) -> Result<()> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::config("dt", "step must be positive"));
    }
    if !(horizon > T::zero()) || !horizon.is_finite() {
        return Err(Error::config("T", "horizon must be positive"));
    }
    Ok(())
}

/// `v*(t, x)` from the variational limit data.
pub fn forward_velocity<T: Real>(
    ic: &InitialCondition<T>,
    model: &HamiltonianModel<T>,
    t: T,
    x: &Vector<T>,
) -> Result<Vector<T>> {
    let options = FlowOptions { prefer_exact: false, ..Default::default() };
    Ok(Flow::new(ic, model, options)?.velocity(t, x)?.0)
}

/// Integrates the flow for every seed with default options.
pub fn integrate_flow<T: Real>(
    ic: &InitialCondition<T>,
    model: &HamiltonianModel<T>,
    seeds: &[Vector<T>],
    horizon: T,
    dt: T,
) -> Result<Vec<ParticleTrajectory<T>>> {
    Flow::new(ic, model, FlowOptions::default())?.integrate(seeds, horizon, dt)
}

/// Merge classes of a batch of trajectories.
#[derive(Clone, Debug, PartialEq)]
pub struct Coalescence<T> {
    /// Classes of trajectory indices, each sorted, ordered by their smallest member.
    pub classes: Vec<Vec<usize>>,
    /// Per trajectory, the time from which it stays with a lower-indexed member.
    pub merge_times: Vec<Option<T>>,
}

/// Groups trajectories that stay within `merge_tol` of each other from some
/// sample on until the end, and sets their merge links.
pub fn detect_coalescence<T: Real>(trajectories: &mut [ParticleTrajectory<T>], merge_tol: T) -> Result<Coalescence<T>> {
    let n = trajectories.len();
    if n == 0 {
        return Ok(Coalescence { classes: Vec::new(), merge_times: Vec::new() });
    }
    let len = trajectories[0].len();
    if trajectories.iter().any(|tr| tr.len() != len || tr.times != trajectories[0].times) {
        return Err(Error::config("trajectories", "trajectories must share one time grid"));
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut merge_times: Vec<Option<T>> = vec![None; n];
    for b in 0..n {
        for a in 0..b {
            let close = |k: usize| trajectories[a].positions[k].distance(&trajectories[b].positions[k]) <= merge_tol;
            if !close(len - 1) {
                continue;
            }
            let mut first = len - 1;
            while first > 0 && close(first - 1) {
                first -= 1;
            }
            let time = trajectories[0].times[first];
            if merge_times[b].is_none_or(|m| time < m) {
                merge_times[b] = Some(time);
            }
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut root_of_class: Vec<usize> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        match root_of_class.iter().position(|&x| x == r) {
            Some(c) => classes[c].push(i),
            None => {
                root_of_class.push(r);
                classes.push(vec![i]);
            }
        }
    }
    for class in &classes {
        let root = class[0];
        for &i in &class[1..] {
            trajectories[i].merged_into = Some(root);
            trajectories[i].merged_at = merge_times[i];
        }
    }
    Ok(Coalescence { classes, merge_times })
}
