//! The admissible velocity inside a shock.
//!
//! With branch data `(p_i, H_i, v_i)` the surplus-action rate is
//!
//! ```text
//! lhat(v) = L(v) - min_i (p_i . v - H_i) = max_i D(v, v_i)
//! ```
//!
//! where `D` is the Bregman divergence of `L`. It is strictly convex; its unique
//! minimizer `v*` is the admissible velocity, characterized by
//! `grad L(v*) in conv { p_j : j in I(v*) }`.

use crate::ball::min_enclosing_ball;
use crate::error::{Error, Result};
use crate::hull::{hull_projection, relative_boundary_distance, subsets_of_size};
use crate::legendre::HamiltonianModel;
use crate::linalg::{null_space_basis, orthonormalize, SmallMatrix};
use crate::scalar::{count, lit, Real};
use crate::superdiff::LimitMomentumSet;
use crate::vector::Vector;

/// Default band for ties in the active set.
pub const DEFAULT_TIE_TOL: f64 = 1e-9;
/// Distance from the hull boundary below which a shock counts as nonrestraining.
pub const CLASSIFY_TOL: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq)]
pub struct AdmissibleSolution<T> {
    pub v_star: Vector<T>,
    pub p_star: Vector<T>,
    pub h_star: T,
    /// `I(v*)`, increasing indices into the limit set.
    pub active_set: Vec<usize>,
    /// Hull weights, one per entry of `active_set`.
    pub weights: Vec<T>,
    /// `lhat(v*)`.
    pub anomaly: T,
    /// Distance from `p*` to the hull of the active momenta.
    pub hull_distance: T,
}

/// Outcome of testing the admissibility condition at a velocity.
#[derive(Clone, Debug, PartialEq)]
pub enum Admissibility<T> {
    Accepted { active_set: Vec<usize>, weights: Vec<T>, distance: T },
    Rejected { active_set: Vec<usize>, distance: T },
}

impl<T: Real> Admissibility<T> {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Admissibility::Accepted { .. })
    }

    pub fn distance(&self) -> T {
        match self {
            Admissibility::Accepted { distance, .. } | Admissibility::Rejected { distance, .. } => *distance,
        }
    }

    pub fn active_set(&self) -> &[usize] {
        match self {
            Admissibility::Accepted { active_set, .. } | Admissibility::Rejected { active_set, .. } => active_set,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShockClass {
    Restraining,
    Nonrestraining,
    NotAShock,
}

/// `lhat(v) = max_i [L(v) + H_i - p_i . v]`.
pub fn lhat<T: Real>(lms: &LimitMomentumSet<T>, model: &HamiltonianModel<T>, v: &Vector<T>) -> T {
    let min_rate = lms.branch_rates(v).into_iter().fold(T::infinity(), T::min);
    model.lagrangian(v) - min_rate
}

/// `I(v)`: branches whose rate `-H_j + p_j . v` is within `tol` of the minimum.
pub fn active_set<T: Real>(lms: &LimitMomentumSet<T>, v: &Vector<T>, tol: T) -> Vec<usize> {
    let rates = lms.branch_rates(v);
    let min = rates.iter().copied().fold(T::infinity(), T::min);
    (0..rates.len()).filter(|&j| rates[j] <= min + tol).collect()
}

/// Tests `grad L(v) in conv { p_j : j in I(v) }` within `tol`; `tol` is also the tie band.
pub fn check_admissibility<T: Real>(
    lms: &LimitMomentumSet<T>,
    model: &HamiltonianModel<T>,
    v: &Vector<T>,
    tol: T,
) -> Admissibility<T> {
    let active = active_set(lms, v, tol);
    let p = model.momentum_of_velocity(v);
    let hull: Vec<Vector<T>> = active.iter().map(|&j| lms.entries[j].p).collect();
    let proj = hull_projection(&p, &hull);
    let distance = proj.point.distance(&p);
    if distance <= tol {
        Admissibility::Accepted { active_set: active, weights: proj.weights, distance }
    } else {
        Admissibility::Rejected { active_set: active, distance }
    }
}

/// Restraining when `p*` lies in the relative interior of the momentum hull.
pub fn classify_shock<T: Real>(lms: &LimitMomentumSet<T>, solution: &AdmissibleSolution<T>) -> ShockClass {
    if !lms.is_shock() {
        return ShockClass::NotAShock;
    }
    let depth = relative_boundary_distance(&solution.p_star, &lms.momenta());
    if depth > lit(CLASSIFY_TOL) {
        ShockClass::Restraining
    } else {
        ShockClass::Nonrestraining
    }
}

/// Solver for the global minimizer of `lhat`.
#[derive(Clone, Debug)]
pub struct AdmissibleSolver<T> {
    /// Certification tolerance (hull distance and tie band).
    pub tol: T,
    /// Subgradient iterations before the active-set polish.
    pub max_iter: usize,
    /// Starting point of the subgradient phase; the centroid of the `v_i` by default.
    pub start: Option<Vector<T>>,
    /// Skip the smallest-ball shortcut for quadratic Hamiltonians.
    pub force_general: bool,
}

impl<T: Real> Default for AdmissibleSolver<T> {
    fn default() -> Self {
        Self { tol: lit(DEFAULT_TIE_TOL), max_iter: 400, start: None, force_general: false }
    }
}

impl<T: Real> AdmissibleSolver<T> {
    pub fn solve(&self, lms: &LimitMomentumSet<T>, model: &HamiltonianModel<T>) -> Result<AdmissibleSolution<T>> {
        if lms.entries.is_empty() {
            return Err(Error::config("lms", "empty limit momentum set"));
        }
        if lms.dim() != model.dim() {
            return Err(Error::config("lms", "dimension differs from the model"));
        }
        if lms.k() == 1 {
            let e = &lms.entries[0];
            return Ok(AdmissibleSolution {
                v_star: e.v,
                p_star: e.p,
                h_star: e.h,
                active_set: vec![0],
                weights: vec![T::one()],
                anomaly: T::zero(),
                hull_distance: T::zero(),
            });
        }
        if model.is_quadratic_form() && !self.force_general {
            let v = ball_velocity(lms, model);
            if let Some(sol) = self.certify(lms, model, &v) {
                return Ok(sol);
            }
        }

        let start = self.start.unwrap_or_else(|| centroid(&lms.velocities()));
        let v_sub = subgradient(lms, model, start, self.max_iter);
        let g = branch_gaps(lms, model, &v_sub);
        let top = g.iter().copied().fold(T::neg_infinity(), T::max);
        let mut tried: Vec<Vec<usize>> = Vec::new();
        for band in [1e-8, 1e-6, 1e-4, 1e-2, 1e-1, 1.0] {
            let band = lit::<T>(band) * (T::one() + top.abs());
            let set: Vec<usize> = (0..lms.k()).filter(|&j| g[j] >= top - band).collect();
            if tried.contains(&set) {
                continue;
            }
            if let Some(sol) = self.try_set(lms, model, &set, &v_sub) {
                return Ok(sol);
            }
            tried.push(set);
        }
        for size in 1..=lms.k() {
            for set in subsets_of_size(lms.k(), size) {
                if tried.contains(&set) {
                    continue;
                }
                if let Some(sol) = self.try_set(lms, model, &set, &v_sub) {
                    return Ok(sol);
                }
            }
        }
        let verdict = check_admissibility(lms, model, &v_sub, self.tol);
        Err(Error::NotCertified { best: v_sub.to_f64_vec(), hull_distance: crate::scalar::to_f64(verdict.distance()) })
    }

    fn try_set(
        &self,
        lms: &LimitMomentumSet<T>,
        model: &HamiltonianModel<T>,
        set: &[usize],
        start: &Vector<T>,
    ) -> Option<AdmissibleSolution<T>> {
        let v = minimize_on_tie_set(lms, model, set, start)?;
        self.certify(lms, model, &v)
    }

    fn certify(
        &self,
        lms: &LimitMomentumSet<T>,
        model: &HamiltonianModel<T>,
        v: &Vector<T>,
    ) -> Option<AdmissibleSolution<T>> {
        if !v.is_finite() {
            return None;
        }
        match check_admissibility(lms, model, v, self.tol) {
            Admissibility::Accepted { active_set, weights, distance } => {
                let p = model.momentum_of_velocity(v);
                let min_rate = lms.branch_rates(v).into_iter().fold(T::infinity(), T::min);
                Some(AdmissibleSolution {
                    v_star: *v,
                    p_star: p,
                    h_star: p.dot(v) - min_rate,
                    active_set,
                    weights,
                    anomaly: lhat(lms, model, v),
                    hull_distance: distance,
                })
            }
            Admissibility::Rejected { .. } => None,
        }
    }
}

/// `v*` with default settings.
pub fn admissible_velocity<T: Real>(
    lms: &LimitMomentumSet<T>,
    model: &HamiltonianModel<T>,
    tol: T,
) -> Result<AdmissibleSolution<T>> {
    AdmissibleSolver { tol, ..Default::default() }.solve(lms, model)
}

fn centroid<T: Real>(points: &[Vector<T>]) -> Vector<T> {
    let mut c = Vector::zeros(points[0].dim());
    for q in points {
        c += *q;
    }
    c / count::<T>(points.len())
}

/// For `L(v) = v^T A^{-1} v / 2` the Bregman divergences are squared distances in
/// the metric `A^{-1}`; with `A = C C^T`, `w = C^{-1} v` makes it Euclidean.
fn ball_velocity<T: Real>(lms: &LimitMomentumSet<T>, model: &HamiltonianModel<T>) -> Vector<T> {
    let c = model.metric_factor().expect("quadratic form has a metric factor");
    let w: Vec<Vector<T>> = lms.entries.iter().map(|e| c.forward_substitute(&e.v)).collect();
    let ball = min_enclosing_ball(&w);
    c.mul_vec(&ball.center)
}

/// `L(v) + H_i - p_i . v` per branch.
fn branch_gaps<T: Real>(lms: &LimitMomentumSet<T>, model: &HamiltonianModel<T>, v: &Vector<T>) -> Vec<T> {
    let l = model.lagrangian(v);
    lms.branch_rates(v).into_iter().map(|r| l - r).collect()
}

/// Polyak-step subgradient descent on `lhat` with a shrinking target gap.
fn subgradient<T: Real>(
    lms: &LimitMomentumSet<T>,
    model: &HamiltonianModel<T>,
    start: Vector<T>,
    max_iter: usize,
) -> Vector<T> {
    let mut v = start;
    let mut f = lhat(lms, model, &v);
    let (mut best_v, mut best_f) = (v, f);
    let mut delta = f * lit(0.5) + T::epsilon();
    let mut stall = 0;
    for _ in 0..max_iter {
        let g = branch_gaps(lms, model, &v);
        let i = (0..g.len()).max_by(|&a, &b| g[a].partial_cmp(&g[b]).unwrap()).unwrap();
        let s = model.momentum_of_velocity(&v) - lms.entries[i].p;
        let s2 = s.norm_sq();
        if s2 == T::zero() || !s2.is_finite() {
            break;
        }
        let target = (best_f - delta).max(T::zero());
        v -= s * ((f - target) / s2);
        f = lhat(lms, model, &v);
        if f.is_finite() && f < best_f - lit::<T>(1e-3) * delta {
            best_v = v;
            best_f = f;
            stall = 0;
        } else {
            stall += 1;
            if stall >= 20 {
                delta = delta * lit(0.5);
                v = best_v;
                f = best_f;
                stall = 0;
            }
        }
        if delta <= T::epsilon() * (T::one() + best_f) {
            break;
        }
    }
    best_v
}

/// Minimizes `L(v) - p_a . v` over the affine set where every branch of `set`
/// has the same rate; `None` when the tie equations are inconsistent.
fn minimize_on_tie_set<T: Real>(
    lms: &LimitMomentumSet<T>,
    model: &HamiltonianModel<T>,
    set: &[usize],
    start: &Vector<T>,
) -> Option<Vector<T>> {
    let dim = lms.dim();
    let anchor = &lms.entries[set[0]];
    let rows: Vec<Vector<T>> = set[1..].iter().map(|&j| lms.entries[j].p - anchor.p).collect();
    let rhs: Vec<T> = set[1..].iter().map(|&j| lms.entries[j].h - anchor.h).collect();

    // particular solution from a maximal independent subset of the rows
    let tol = lit::<T>(1e-10);
    let mut ortho: Vec<Vector<T>> = Vec::new();
    let mut picked: Vec<usize> = Vec::new();
    for (r, row) in rows.iter().enumerate() {
        if let Some(u) = orthonormalize(row, &ortho, tol) {
            ortho.push(u);
            picked.push(r);
        }
    }
    let v0 = if picked.is_empty() {
        Vector::zeros(dim)
    } else {
        let m = picked.len();
        let mut gram = SmallMatrix::zeros(m);
        let mut b = Vector::zeros(m);
        for (a, &ra) in picked.iter().enumerate() {
            for (c, &rc) in picked.iter().enumerate() {
                gram.set(a, c, rows[ra].dot(&rows[rc]));
            }
            b[a] = rhs[ra];
        }
        let coef = gram.solve(&b)?;
        let mut v0 = Vector::zeros(dim);
        for (a, &ra) in picked.iter().enumerate() {
            v0 += rows[ra] * coef[a];
        }
        v0
    };
    for (row, &b) in rows.iter().zip(&rhs) {
        let scale = T::one() + b.abs() + row.norm() * v0.norm();
        if (row.dot(&v0) - b).abs() > lit::<T>(1e-9) * scale {
            return None;
        }
    }

    let basis = null_space_basis(&rows, dim);
    if basis.is_empty() {
        return Some(v0);
    }
    let n = basis.len();
    let at = |z: &[T]| -> Vector<T> {
        let mut v = v0;
        for (b, &zi) in basis.iter().zip(z) {
            v += *b * zi;
        }
        v
    };
    let objective = |v: &Vector<T>| model.lagrangian(v) - anchor.p.dot(v);
    let d0 = *start - v0;
    let mut z: Vec<T> = basis.iter().map(|b| b.dot(&d0)).collect();
    let p_scale = T::one() + lms.entries.iter().map(|e| e.p.norm()).fold(T::zero(), T::max);
    let gradient = |v: &Vector<T>| -> Vec<T> {
        let r = model.momentum_of_velocity(v) - anchor.p;
        basis.iter().map(|b| b.dot(&r)).collect()
    };
    let norm = |g: &[T]| g.iter().map(|x| *x * *x).sum::<T>().sqrt();
    for _ in 0..200 {
        let v = at(&z);
        let grad = gradient(&v);
        let gnorm = norm(&grad);
        if gnorm <= lit::<T>(1e-14) * p_scale {
            break;
        }
        let lh = model.lagrangian_hessian(&v);
        let mut hess = SmallMatrix::zeros(n);
        for a in 0..n {
            let col = lh.mul_vec(&basis[a]);
            for c in 0..n {
                hess.set(c, a, basis[c].dot(&col));
            }
        }
        let gvec = Vector::from_slice(&grad);
        let mut step = hess.solve(&gvec).filter(|s| s.is_finite() && s.dot(&gvec) > T::zero()).unwrap_or(gvec);
        let f0 = objective(&v);
        let mut moved = false;
        for attempt in 0..2 {
            let slope = step.dot(&gvec);
            let mut alpha = T::one();
            for _ in 0..60 {
                let trial: Vec<T> = z.iter().zip(step.iter()).map(|(zi, si)| *zi - alpha * *si).collect();
                let f1 = objective(&at(&trial));
                let sufficient = f1 <= f0 - lit::<T>(1e-4) * alpha * slope;
                // below rounding the objective cannot rank steps; the gradient still can
                let flat = alpha == T::one()
                    && (f1 - f0).abs() <= lit::<T>(8.0) * T::epsilon() * (T::one() + f0.abs())
                    && norm(&gradient(&at(&trial))) < gnorm;
                if f1.is_finite() && (sufficient || flat) {
                    z = trial;
                    moved = true;
                    break;
                }
                alpha = alpha * lit(0.5);
            }
            if moved || attempt == 1 {
                break;
            }
            step = gvec;
        }
        if !moved {
            break;
        }
    }
    Some(at(&z))
}
