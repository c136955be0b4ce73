//! Limit momenta of the smooth branches meeting at a point.
//!
//! At a point `(t, x)` with minimizers `y_i`, the branch velocities are
//! `v_i = (x - y_i) / t` and the momenta `p_i = grad L(v_i)`. The superdifferential
//! of `phi` is the polytope with vertices `(-H(p_i), p_i)`.

use crate::error::{Error, Result};
use crate::hopf_lax::HopfLaxSolver;
use crate::initial::InitialCondition;
use crate::legendre::HamiltonianModel;
use crate::scalar::{count, lit, Real};
use crate::vector::Vector;

/// One branch of the solution at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimitEntry<T> {
    pub p: Vector<T>,
    pub h: T,
    pub v: Vector<T>,
    /// Minimizing preimage, when the entry comes from the variational solver.
    pub preimage: Option<Vector<T>>,
}

/// Branch data `(p_i, H_i, v_i)` at a point, `k >= 1` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitMomentumSet<T> {
    pub t: T,
    pub x: Vector<T>,
    pub entries: Vec<LimitEntry<T>>,
}

/// Momentum distance below which two branches are merged.
pub const DEFAULT_MOMENTUM_TOL: f64 = 1e-3;

impl<T: Real> LimitMomentumSet<T> {
    /// Builds a set directly from momenta, computing `H_i` and `v_i` from the model.
    /// The point is the origin at `t = 0`.
    pub fn from_momenta(model: &HamiltonianModel<T>, momenta: &[Vector<T>]) -> Result<Self> {
        if momenta.is_empty() {
            return Err(Error::config("momenta", "at least one momentum is required"));
        }
        if momenta.iter().any(|p| p.dim() != model.dim() || !p.is_finite()) {
            return Err(Error::config("momenta", "momenta must be finite and match the model dimension"));
        }
        let entries = momenta
            .iter()
            .map(|p| LimitEntry { p: *p, h: model.hamiltonian(p), v: model.velocity_of_momentum(p), preimage: None })
            .collect();
        Ok(Self { t: T::zero(), x: Vector::zeros(model.dim()), entries })
    }

    /// Builds a set from branch velocities.
    pub fn from_velocities(model: &HamiltonianModel<T>, velocities: &[Vector<T>]) -> Result<Self> {
        let momenta: Vec<Vector<T>> = velocities.iter().map(|v| model.momentum_of_velocity(v)).collect();
        Self::from_momenta(model, &momenta)
    }

    pub fn k(&self) -> usize {
        self.entries.len()
    }

    pub fn dim(&self) -> usize {
        self.entries[0].p.dim()
    }

    pub fn momenta(&self) -> Vec<Vector<T>> {
        self.entries.iter().map(|e| e.p).collect()
    }

    pub fn velocities(&self) -> Vec<Vector<T>> {
        self.entries.iter().map(|e| e.v).collect()
    }

    pub fn is_shock(&self) -> bool {
        self.k() >= 2
    }

    /// Vertices `(-H_i, p_i)` of the superdifferential.
    pub fn superdifferential_vertices(&self) -> Vec<(T, Vector<T>)> {
        self.entries.iter().map(|e| (-e.h, e.p)).collect()
    }

    /// `-H_i + p_i . v` for every branch.
    pub fn branch_rates(&self, v: &Vector<T>) -> Vec<T> {
        self.entries.iter().map(|e| e.p.dot(v) - e.h).collect()
    }
}

/// Free-function form of [`LimitMomentumSet::is_shock`].
pub fn is_shock<T: Real>(lms: &LimitMomentumSet<T>) -> bool {
    lms.is_shock()
}

/// Free-function form of [`LimitMomentumSet::superdifferential_vertices`].
pub fn superdifferential_vertices<T: Real>(lms: &LimitMomentumSet<T>) -> Vec<(T, Vector<T>)> {
    lms.superdifferential_vertices()
}

/// Tolerances used when extracting limit data from the variational solver.
#[derive(Clone, Debug)]
pub struct LimitDataOptions<T> {
    pub solver: HopfLaxSolver<T>,
    /// Preimage clustering distance; `None` selects `min(1e-4 * box width, 1e-3 * t)`.
    pub cluster_tol: Option<T>,
    pub momentum_tol: T,
}

impl<T: Real> Default for LimitDataOptions<T> {
    fn default() -> Self {
        Self { solver: HopfLaxSolver::default(), cluster_tol: None, momentum_tol: lit(DEFAULT_MOMENTUM_TOL) }
    }
}

impl<T: Real> LimitDataOptions<T> {
    pub fn cluster_tol_at(&self, ic: &InitialCondition<T>, model: &HamiltonianModel<T>, t: T) -> T {
        self.cluster_tol.unwrap_or_else(|| self.solver.default_cluster_tol(ic, model, t).min(lit::<T>(1e-3) * t))
    }

    pub fn limit_data(
        &self,
        ic: &InitialCondition<T>,
        model: &HamiltonianModel<T>,
        t: T,
        x: &Vector<T>,
    ) -> Result<LimitMomentumSet<T>> {
        let tol = self.cluster_tol_at(ic, model, t);
        let r = self.solver.solve_clustered(ic, model, t, x, tol)?;
        let raw: Vec<(Vector<T>, Vector<T>)> = r.minimizers.iter().zip(&r.velocities).map(|(y, v)| (*y, *v)).collect();
        Ok(LimitMomentumSet { t, x: *x, entries: merge_in_momentum(model, &raw, self.momentum_tol) })
    }
}

/// Greedy clustering of `(preimage, velocity)` pairs by momentum distance; each
/// cluster is replaced by its mean velocity. Entries are sorted by momentum.
fn merge_in_momentum<T: Real>(
    model: &HamiltonianModel<T>,
    raw: &[(Vector<T>, Vector<T>)],
    momentum_tol: T,
) -> Vec<LimitEntry<T>> {
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let momenta: Vec<Vector<T>> = raw.iter().map(|(_, v)| model.momentum_of_velocity(v)).collect();
    for i in 0..raw.len() {
        match clusters.iter_mut().find(|c| momenta[c[0]].distance(&momenta[i]) < momentum_tol) {
            Some(c) => c.push(i),
            None => clusters.push(vec![i]),
        }
    }
    let mut entries: Vec<LimitEntry<T>> = clusters
        .into_iter()
        .map(|c| {
            let n = count::<T>(c.len());
            let mut v = Vector::zeros(raw[0].1.dim());
            let mut y = Vector::zeros(raw[0].0.dim());
            for &i in &c {
                v += raw[i].1;
                y += raw[i].0;
            }
            let v = v / n;
            let p = model.momentum_of_velocity(&v);
            LimitEntry { p, h: model.hamiltonian(&p), v, preimage: Some(y / n) }
        })
        .collect();
    entries.sort_by(|a, b| a.p.as_slice().partial_cmp(b.p.as_slice()).unwrap_or(std::cmp::Ordering::Equal));
    entries
}

/// Limit momenta at `(t, x)` with default tolerances.
pub fn limit_data<T: Real>(
    ic: &InitialCondition<T>,
    model: &HamiltonianModel<T>,
    t: T,
    x: &Vector<T>,
) -> Result<LimitMomentumSet<T>> {
    LimitDataOptions::default().limit_data(ic, model, t, x)
}
