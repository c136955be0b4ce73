//! Viscosity solution `phi(t, x)` by the Hopf-Lax formula
//!
//! ```text
//! phi(t, x) = min_y [ phi_0(y) + t L((x - y) / t) ]
//! ```
//!
//! valid for Hamiltonians that depend on the momentum only, where action
//! minimizers are straight lines. The minimization is a coarse lattice scan of
//! the search box followed by a pattern-search polish of every candidate basin
//! and, where `phi_0` is differentiable, Newton refinement of the stationarity
//! condition `grad phi_0(y) = grad L((x - y) / t)`.

use crate::error::{Error, Result};
use crate::initial::InitialCondition;
use crate::legendre::HamiltonianModel;
use crate::scalar::{count, lit, to_f64, Real};
use crate::vector::Vector;

/// Value of the viscosity solution at a point, with its minimizing preimages.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueResult<T> {
    pub value: T,
    /// One representative preimage `y_i` per minimizing basin.
    pub minimizers: Vec<Vector<T>>,
    /// `(x - y_i) / t` for each minimizer.
    pub velocities: Vec<Vector<T>>,
}

impl<T: Real> ValueResult<T> {
    pub fn count(&self) -> usize {
        self.minimizers.len()
    }
}

/// Locally minimized objective inside one basin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchPoint<T> {
    pub value: T,
    pub preimage: Vector<T>,
}

/// Tunable parameters of the variational solver.
#[derive(Clone, Debug)]
pub struct HopfLaxSolver<T> {
    /// Lattice points per axis for the coarse scan, indexed by `dim - 1`.
    pub coarse_points: [usize; 3],
    /// Relative tolerance deciding which basins attain the global minimum:
    /// `value_i <= min + value_rel_tol * (1 + |min|)`.
    pub value_rel_tol: T,
    /// Added to `t * V_max` to form the search radius.
    pub margin: T,
    /// Upper bound on basins polished per evaluation.
    pub max_candidates: usize,
}

impl<T: Real> Default for HopfLaxSolver<T> {
    fn default() -> Self {
        Self { coarse_points: [2001, 121, 31], value_rel_tol: lit(1e-7), margin: T::one(), max_candidates: 32 }
    }
}

/// `phi_0(y) + t L((x - y) / t)`.
#[inline]
pub fn objective<T: Real>(
    ic: &InitialCondition<T>,
    model: &HamiltonianModel<T>,
    t: T,
    x: &Vector<T>,
    y: &Vector<T>,
) -> T {
    ic.value(y) + t * model.lagrangian(&((*x - *y) / t))
}

/// Bound on the speed of any minimizing line, from the Lipschitz bound of `phi_0`.
pub fn speed_bound<T: Real>(ic: &InitialCondition<T>, model: &HamiltonianModel<T>) -> T {
    model.max_speed(ic.lipschitz_bound())
}

fn validate<T: Real>(ic: &InitialCondition<T>, model: &HamiltonianModel<T>, t: T, x: &Vector<T>) -> Result<()> {
    if !(t > T::zero()) || !t.is_finite() {
        return Err(Error::config("t", format!("time must be positive, got {t}")));
    }
    if x.dim() != model.dim() || ic.dim() != model.dim() {
        return Err(Error::config(
            "dim",
            format!("dimension mismatch: x {}, model {}, fixture {}", x.dim(), model.dim(), ic.dim()),
        ));
    }
    if !x.is_finite() {
        return Err(Error::config("x", "non-finite position"));
    }
    Ok(())
}

struct Lattice<T> {
    center: Vector<T>,
    radius: T,
    n: usize,
}

impl<T: Real> Lattice<T> {
    fn spacing(&self) -> T {
        self.radius * lit(2.0) / count::<T>(self.n - 1)
    }

    fn point(&self, idx: &[usize]) -> Vector<T> {
        let h = self.spacing();
        let mut y = self.center;
        for (k, &i) in idx.iter().enumerate() {
            y[k] = self.center[k] - self.radius + h * count::<T>(i);
        }
        y
    }

    fn total(&self, dim: usize) -> usize {
        self.n.pow(dim as u32)
    }

    fn unflatten(&self, mut flat: usize, dim: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        for k in (0..dim).rev() {
            idx[k] = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }
}

impl<T: Real> HopfLaxSolver<T> {
    pub fn search_radius(&self, ic: &InitialCondition<T>, model: &HamiltonianModel<T>, t: T) -> T {
        t * speed_bound(ic, model) + self.margin
    }

    /// Default preimage cluster tolerance: `1e-4` of the search box width.
    pub fn default_cluster_tol(&self, ic: &InitialCondition<T>, model: &HamiltonianModel<T>, t: T) -> T {
        lit::<T>(2e-4) * self.search_radius(ic, model, t)
    }

    pub fn solve(
        &self,
        ic: &InitialCondition<T>,
        model: &HamiltonianModel<T>,
        t: T,
        x: &Vector<T>,
    ) -> Result<ValueResult<T>> {
        let tol = self.default_cluster_tol(ic, model, t);
        self.solve_clustered(ic, model, t, x, tol)
    }

    /// Evaluates `phi(t, x)` and returns one preimage per minimizing basin, the
    /// representatives separated pairwise by at least `cluster_tol`.
    pub fn solve_clustered(
        &self,
        ic: &InitialCondition<T>,
        model: &HamiltonianModel<T>,
        t: T,
        x: &Vector<T>,
        cluster_tol: T,
    ) -> Result<ValueResult<T>> {
        validate(ic, model, t, x)?;
        let mut radius = self.search_radius(ic, model, t);
        for attempt in 0..2 {
            let (candidates, h) = self.scan(ic, model, t, x, radius);
            let best = &candidates[0];
            let on_boundary = (0..x.dim()).any(|k| (best.preimage[k] - x[k]).abs() > radius - lit::<T>(1.5) * h);
            if on_boundary {
                if attempt == 0 {
                    radius = radius + radius;
                    continue;
                }
                return Err(Error::SearchBoxTruncated { t: to_f64(t), x: x.to_f64_vec(), radius: to_f64(radius) });
            }
            return Ok(self.select(candidates, t, x, cluster_tol));
        }
        unreachable!("loop returns on the second attempt")
    }

    /// Candidate basin minima sorted by objective value, plus the coarse spacing.
    fn scan(
        &self,
        ic: &InitialCondition<T>,
        model: &HamiltonianModel<T>,
        t: T,
        x: &Vector<T>,
        radius: T,
    ) -> (Vec<BranchPoint<T>>, T) {
        let dim = x.dim();
        let n = self.coarse_points[dim - 1] | 1;
        let outer = Lattice { center: *x, radius, n };
        let mut seeds = self.lattice_minima(ic, model, t, x, &outer);
        // minimizing velocities are bounded by V_max, so a dense core lattice
        // resolves basins that the outer lattice is too coarse to separate
        let core_radius = t * speed_bound(ic, model) * lit(1.05) + lit::<T>(1e-12) * (T::one() + t);
        if core_radius < radius * lit(0.5) {
            let core = Lattice { center: *x, radius: core_radius, n };
            seeds.extend(self.lattice_minima(ic, model, t, x, &core));
        }
        seeds.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        seeds.truncate(self.max_candidates);

        let mut polished: Vec<BranchPoint<T>> =
            seeds.into_iter().map(|(y, _, spacing)| self.polish(ic, model, t, x, &y, spacing)).collect();
        polished.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
        (polished, outer.spacing())
    }

    /// Discrete local minima of the objective on a lattice: `(point, value, spacing)`.
    fn lattice_minima(
        &self,
        ic: &InitialCondition<T>,
        model: &HamiltonianModel<T>,
        t: T,
        x: &Vector<T>,
        lattice: &Lattice<T>,
    ) -> Vec<(Vector<T>, T, T)> {
        let dim = x.dim();
        let total = lattice.total(dim);
        let values: Vec<T> = (0..total)
            .map(|flat| {
                let idx = lattice.unflatten(flat, dim);
                objective(ic, model, t, x, &lattice.point(&idx[..dim]))
            })
            .collect();
        let mut minima = Vec::new();
        for flat in 0..total {
            let idx = lattice.unflatten(flat, dim);
            let v = values[flat];
            let mut is_min = true;
            'axes: for k in 0..dim {
                for dir in [-1isize, 1] {
                    let j = idx[k] as isize + dir;
                    if j < 0 || j >= lattice.n as isize {
                        continue;
                    }
                    let mut nb = idx;
                    nb[k] = j as usize;
                    let w = values[lattice.flatten(&nb[..dim])];
                    // strict on one side so plateaus yield a single representative
                    if w < v || (w == v && dir < 0) {
                        is_min = false;
                        break 'axes;
                    }
                }
            }
            if is_min {
                minima.push((lattice.point(&idx[..dim]), v, lattice.spacing()));
            }
        }
        minima
    }

    fn select(&self, candidates: Vec<BranchPoint<T>>, t: T, x: &Vector<T>, cluster_tol: T) -> ValueResult<T> {
        let best = candidates[0].value;
        let cutoff = best + self.value_rel_tol * (T::one() + best.abs());
        let mut kept: Vec<BranchPoint<T>> = Vec::new();
        for c in candidates.into_iter().filter(|c| c.value <= cutoff) {
            if kept.iter().all(|k| k.preimage.distance(&c.preimage) >= cluster_tol) {
                kept.push(c);
            }
        }
        kept.sort_by(|a, b| {
            a.preimage.as_slice().partial_cmp(b.preimage.as_slice()).unwrap_or(std::cmp::Ordering::Equal)
        });
        ValueResult {
            value: best,
            velocities: kept.iter().map(|k| (*x - k.preimage) / t).collect(),
            minimizers: kept.into_iter().map(|k| k.preimage).collect(),
        }
    }

    /// Local minimization of the objective starting from `seed`, searching a
    /// neighbourhood of half-width `radius`.
    pub fn branch_value(
        &self,
        ic: &InitialCondition<T>,
        model: &HamiltonianModel<T>,
        t: T,
        x: &Vector<T>,
        seed: &Vector<T>,
        radius: T,
    ) -> BranchPoint<T> {
        self.polish(ic, model, t, x, seed, radius)
    }

    fn polish(
        &self,
        ic: &InitialCondition<T>,
        model: &HamiltonianModel<T>,
        t: T,
        x: &Vector<T>,
        seed: &Vector<T>,
        half_width: T,
    ) -> BranchPoint<T> {
        let f = |y: &Vector<T>| objective(ic, model, t, x, y);
        let (mut y, mut val) = pattern_search(&f, *seed, half_width);
        if let Some((y2, v2)) = newton_refine(ic, model, t, x, &y, val) {
            // stay in the basin being polished
            if (y2 - *seed).max_abs() <= half_width {
                y = y2;
                val = v2;
            }
        }
        BranchPoint { value: val, preimage: y }
    }
}

/// Shrinking lattice pattern search (5 points per axis). Converges to a local
/// minimum of continuous functions, including minima at kinks.
fn pattern_search<T: Real>(f: &impl Fn(&Vector<T>) -> T, start: Vector<T>, half_width: T) -> (Vector<T>, T) {
    let dim = start.dim();
    let m = 2isize;
    let per_axis = (2 * m + 1) as usize;
    let total = per_axis.pow(dim as u32);
    let mut c = start;
    let mut best = f(&c);
    let mut w = half_width;
    for _ in 0..400 {
        if w <= lit::<T>(1e-14) * (T::one() + c.max_abs()) {
            break;
        }
        let mut best_y = c;
        let mut best_off = [0isize; 3];
        for flat in 0..total {
            let mut rem = flat;
            let mut off = [0isize; 3];
            let mut y = c;
            for k in 0..dim {
                off[k] = (rem % per_axis) as isize - m;
                rem /= per_axis;
                y[k] = c[k] + w * lit::<T>(off[k] as f64 / m as f64);
            }
            let v = f(&y);
            if v < best {
                best = v;
                best_y = y;
                best_off = off;
            }
        }
        let on_edge = best_off[..dim].iter().any(|o| o.abs() == m);
        c = best_y;
        if !on_edge {
            w = w * lit(0.5);
        }
    }
    (c, best)
}

/// Newton iteration on `grad phi_0(y) - grad L((x - y)/t) = 0`, accepted only
/// while the objective does not increase.
fn newton_refine<T: Real>(
    ic: &InitialCondition<T>,
    model: &HamiltonianModel<T>,
    t: T,
    x: &Vector<T>,
    start: &Vector<T>,
    start_value: T,
) -> Option<(Vector<T>, T)> {
    let dim = start.dim();
    let residual = |y: &Vector<T>| -> Option<Vector<T>> {
        let g0 = ic.gradient(y)?;
        Some(g0 - model.momentum_of_velocity(&((*x - *y) / t)))
    };
    let mut y = *start;
    let mut val = start_value;
    let mut improved = false;
    for _ in 0..6 {
        let r = residual(&y)?;
        if r.norm() == T::zero() {
            break;
        }
        // Jacobian: Hess phi_0 (finite differences of the gradient) + Hess L / t
        let mut jac = model.lagrangian_hessian(&((*x - y) / t)).scaled(T::one() / t);
        let eps = lit::<T>(1e-6) * (T::one() + y.max_abs());
        for k in 0..dim {
            let e = Vector::unit(dim, k) * eps;
            let gp = ic.gradient(&(y + e))?;
            let gm = ic.gradient(&(y - e))?;
            let col = (gp - gm) / (eps + eps);
            for i in 0..dim {
                jac.set(i, k, jac.get(i, k) + col[i]);
            }
        }
        let step = jac.solve(&r)?;
        let trial = y - step;
        let tv = objective(ic, model, t, x, &trial);
        if !(tv <= val + T::epsilon() * (T::one() + val.abs())) || !trial.is_finite() {
            break;
        }
        let small = step.norm() <= T::epsilon() * (T::one() + y.norm());
        y = trial;
        val = tv.min(val);
        improved = true;
        if small {
            break;
        }
    }
    improved.then_some((y, val))
}

/// `phi(t, x)` with preimages, using the default solver settings.
pub fn solve_value<T: Real>(
    ic: &InitialCondition<T>,
    model: &HamiltonianModel<T>,
    t: T,
    x: &Vector<T>,
) -> Result<ValueResult<T>> {
    HopfLaxSolver::default().solve(ic, model, t, x)
}

/// One preimage per minimizing basin, separated by at least `cluster_tol`.
pub fn minimizer_set<T: Real>(
    ic: &InitialCondition<T>,
    model: &HamiltonianModel<T>,
    t: T,
    x: &Vector<T>,
    cluster_tol: T,
) -> Result<Vec<Vector<T>>> {
    Ok(HopfLaxSolver::default().solve_clustered(ic, model, t, x, cluster_tol)?.minimizers)
}

/// Closed-form solution for concave piecewise-affine data:
/// `phi(t, x) = min_i (p_i . x + c_i - t H(p_i))`. Returns the value and the
/// indices of the attaining branches (within `tie_tol`).
pub fn exact_affine_value<T: Real>(
    ic: &InitialCondition<T>,
    model: &HamiltonianModel<T>,
    t: T,
    x: &Vector<T>,
    tie_tol: T,
) -> Option<(T, Vec<usize>)> {
    let branches = ic.affine_branches()?;
    let vals: Vec<T> = branches.iter().map(|(p, c)| p.dot(x) + *c - t * model.hamiltonian(p)).collect();
    let min = vals.iter().copied().fold(T::infinity(), T::min);
    let active = (0..vals.len()).filter(|&i| vals[i] <= min + tie_tol).collect();
    Some((min, active))
}

/// Surplus action of a sampled curve over `[t_1, t_2]`:
///
/// `phi(t_1, g(t_1)) + int L(g') ds - phi(t_2, g(t_2))`,
///
/// nonnegative for every curve and zero along minimizers. The curve is the
/// piecewise-linear interpolant of the samples, so the integral is exact per
/// segment. `phi(0, .)` is `phi_0`.
pub fn action_inequality_check<T: Real>(
    solver: &HopfLaxSolver<T>,
    ic: &InitialCondition<T>,
    model: &HamiltonianModel<T>,
    times: &[T],
    positions: &[Vector<T>],
) -> Result<T> {
    if times.len() < 2 || times.len() != positions.len() {
        return Err(Error::config("curve", "need at least two samples with matching positions"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::config("curve", "sample times must be increasing"));
    }
    let phi = |t: T, x: &Vector<T>| -> Result<T> {
        if t == T::zero() {
            Ok(ic.value(x))
        } else {
            Ok(solver.solve(ic, model, t, x)?.value)
        }
    };
    let mut action = T::zero();
    for k in 0..times.len() - 1 {
        let dt = times[k + 1] - times[k];
        let v = (positions[k + 1] - positions[k]) / dt;
        action = action + dt * model.lagrangian(&v);
    }
    let last = times.len() - 1;
    Ok(phi(times[0], &positions[0])? + action - phi(times[last], &positions[last])?)
}
