//! Parabolic regularization `phi_t + H(grad phi) = mu lap phi` on the periodic
//! box `[-pi, pi]^d`, `d <= 2`.
//!
//! The grid stores a periodic part `psi` and a constant background momentum
//! `pbar`, with `phi = psi + pbar . x`. Data whose end-to-end increments are
//! affine (such as `-|x| + 0.2 x`) are periodized this way without altering
//! them near the origin.

use crate::error::{Error, Result};
use crate::flow::ParticleTrajectory;
use crate::hopf_lax::speed_bound;
use crate::hull::hull_distance;
use crate::initial::InitialCondition;
use crate::legendre::HamiltonianModel;
use crate::scalar::{count, lit, to_f64, Real};
use crate::superdiff::LimitMomentumSet;
use crate::vector::Vector;

/// Snapshot of `phi^mu` on a uniform periodic grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField<T> {
    pub dim: usize,
    /// Nodes per axis.
    pub n: usize,
    pub h: T,
    /// Periodic part, row-major with axis 0 slowest.
    pub values: Vec<T>,
    pub background: Vector<T>,
    pub time: T,
    pub mu: T,
}

fn wrap<T: Real>(x: T) -> T {
    let two_pi = T::PI() + T::PI();
    let y = (x + T::PI()) % two_pi;
    let y = if y < T::zero() { y + two_pi } else { y };
    y - T::PI()
}

impl<T: Real> GridField<T> {
    /// Coordinate of node `i` along any axis.
    pub fn coordinate(&self, i: usize) -> T {
        -T::PI() + self.h * count::<T>(i)
    }

    fn index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    fn shifted(&self, idx: &[usize; 2], axis: usize, delta: isize) -> usize {
        let mut j = *idx;
        j[axis] = ((idx[axis] as isize + delta).rem_euclid(self.n as isize)) as usize;
        self.index(&j[..self.dim])
    }

    fn nodes(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    fn unflatten(&self, mut flat: usize) -> [usize; 2] {
        let mut idx = [0usize; 2];
        for k in (0..self.dim).rev() {
            idx[k] = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    /// Central-difference gradient of `phi` at a node.
    pub fn node_gradient(&self, flat: usize) -> Vector<T> {
        let idx = self.unflatten(flat);
        let mut g = self.background;
        let two_h = self.h + self.h;
        for k in 0..self.dim {
            g[k] = g[k] + (self.values[self.shifted(&idx, k, 1)] - self.values[self.shifted(&idx, k, -1)]) / two_h;
        }
        g
    }

    /// Five-point (three-point in 1D) Laplacian at a node.
    pub fn node_laplacian(&self, flat: usize) -> T {
        let idx = self.unflatten(flat);
        let c = self.values[flat];
        let mut acc = T::zero();
        for k in 0..self.dim {
            acc = acc + self.values[self.shifted(&idx, k, 1)] - c - c + self.values[self.shifted(&idx, k, -1)];
        }
        acc / (self.h * self.h)
    }

    /// Multilinear interpolation of a node quantity at `x` (wrapped into the box).
    fn interpolate<R>(&self, x: &Vector<T>, node: impl Fn(usize) -> R, zero: R, axpy: impl Fn(R, T, R) -> R) -> R
    where
        R: Copy,
    {
        let mut base = [0usize; 2];
        let mut frac = [T::zero(); 2];
        for k in 0..self.dim {
            let s = (wrap(x[k]) + T::PI()) / self.h;
            let fl = s.floor();
            frac[k] = s - fl;
            base[k] = fl.to_usize().unwrap_or(0) % self.n;
        }
        let mut acc = zero;
        for corner in 0..(1usize << self.dim) {
            let mut w = T::one();
            let mut idx = base;
            for k in 0..self.dim {
                if corner & (1 << k) != 0 {
                    w = w * frac[k];
                    idx[k] = (idx[k] + 1) % self.n;
                } else {
                    w = w * (T::one() - frac[k]);
                }
            }
            if w != T::zero() {
                acc = axpy(acc, w, node(self.index(&idx[..self.dim])));
            }
        }
        acc
    }

    pub fn value_at(&self, x: &Vector<T>) -> T {
        let psi = self.interpolate(x, |i| self.values[i], T::zero(), |a, w, v| a + w * v);
        psi + self.background.dot(x)
    }

    pub fn gradient_at(&self, x: &Vector<T>) -> Vector<T> {
        self.interpolate(x, |i| self.node_gradient(i), Vector::zeros(self.dim), |a, w, v| a + v * w)
    }

    pub fn laplacian_at(&self, x: &Vector<T>) -> T {
        self.interpolate(x, |i| self.node_laplacian(i), T::zero(), |a, w, v| a + w * v)
    }

    /// Node coordinates of flat index `flat`.
    pub fn node_position(&self, flat: usize) -> Vector<T> {
        let idx = self.unflatten(flat);
        let mut x = Vector::zeros(self.dim);
        for k in 0..self.dim {
            x[k] = self.coordinate(idx[k]);
        }
        x
    }

    /// `max |phi(node) - reference(node)|` over nodes inside `|x|_inf <= window`.
    pub fn max_deviation(&self, window: T, mut reference: impl FnMut(&Vector<T>) -> Result<T>) -> Result<T> {
        let mut worst = T::zero();
        for flat in 0..self.nodes() {
            let x = self.node_position(flat);
            if x.max_abs() > window {
                continue;
            }
            let phi = self.values[flat] + self.background.dot(&x);
            worst = worst.max((phi - reference(&x)?).abs());
        }
        Ok(worst)
    }

    /// Sampled profile along axis 0 at the other coordinates zero: `(x1, phi)`.
    pub fn profile(&self) -> Vec<(T, T)> {
        (0..self.n)
            .map(|i| {
                let mut x = Vector::zeros(self.dim);
                x[0] = self.coordinate(i);
                (x[0], self.value_at(&x))
            })
            .collect()
    }
}

/// Time series of grid snapshots of one viscous solve.
#[derive(Clone, Debug)]
pub struct FieldSeries<T> {
    pub frames: Vec<GridField<T>>,
    pub mu: T,
    pub dt: T,
}

impl<T: Real> FieldSeries<T> {
    pub fn start(&self) -> T {
        self.frames[0].time
    }

    pub fn end(&self) -> T {
        self.frames.last().expect("non-empty series").time
    }

    /// Bracketing frames and the interpolation weight of the later one; the flag
    /// is set when `t` lies past the last frame.
    fn locate(&self, t: T) -> (usize, usize, T, bool) {
        let n = self.frames.len();
        if t >= self.end() {
            let past = t > self.end() + lit::<T>(1e-12) * (T::one() + t.abs());
            return (n - 1, n - 1, T::zero(), past);
        }
        if t <= self.start() || n == 1 {
            return (0, 0, T::zero(), false);
        }
        let k = self.frames.partition_point(|f| f.time <= t) - 1;
        let (a, b) = (&self.frames[k], &self.frames[k + 1]);
        (k, k + 1, (t - a.time) / (b.time - a.time), false)
    }

    /// `grad phi^mu(t, x)`, and whether `t` was past the last frame.
    pub fn gradient(&self, t: T, x: &Vector<T>) -> (Vector<T>, bool) {
        let (a, b, w, past) = self.locate(t);
        let ga = self.frames[a].gradient_at(x);
        if a == b {
            return (ga, past);
        }
        (ga + (self.frames[b].gradient_at(x) - ga) * w, past)
    }

    pub fn laplacian(&self, t: T, x: &Vector<T>) -> T {
        let (a, b, w, _) = self.locate(t);
        let la = self.frames[a].laplacian_at(x);
        if a == b {
            return la;
        }
        la + (self.frames[b].laplacian_at(x) - la) * w
    }

    pub fn value(&self, t: T, x: &Vector<T>) -> T {
        let (a, b, w, _) = self.locate(t);
        let va = self.frames[a].value_at(x);
        if a == b {
            return va;
        }
        va + (self.frames[b].value_at(x) - va) * w
    }

    /// `phi_t` from the bracketing frames (central difference across the
    /// neighbouring frames where available).
    pub fn time_derivative(&self, t: T, x: &Vector<T>) -> T {
        let n = self.frames.len();
        if n < 2 {
            return T::zero();
        }
        let (a, _, _, _) = self.locate(t);
        let lo = a.saturating_sub(1).min(n - 2);
        let hi = (a + 1).min(n - 1).max(lo + 1);
        let (fa, fb) = (&self.frames[lo], &self.frames[hi]);
        (fb.value_at(x) - fa.value_at(x)) / (fb.time - fa.time)
    }

    /// Snapshot closest to `t`.
    pub fn frame_at(&self, t: T) -> &GridField<T> {
        self.frames
            .iter()
            .min_by(|a, b| (a.time - t).abs().partial_cmp(&(b.time - t).abs()).unwrap())
            .expect("non-empty series")
    }
}

/// Settings of the explicit scheme.
#[derive(Clone, Debug)]
pub struct ViscousSolver<T> {
    pub mu: T,
    pub n: usize,
    /// Time step; `None` picks 90% of the stability bound.
    pub dt: Option<T>,
    /// Time between stored frames.
    pub frame_interval: T,
}

impl<T: Real> ViscousSolver<T> {
    pub fn new(mu: T, n: usize) -> Self {
        Self { mu, n, dt: None, frame_interval: lit(0.01) }
    }

    /// `0.25 min(h^2 / (2 d mu), h / V_max)`.
    pub fn stability_bound(&self, dim: usize, v_max: T) -> T {
        let h = grid_spacing::<T>(self.n);
        let diffusive = h * h / (lit::<T>(2.0) * count::<T>(dim) * self.mu);
        let advective = if v_max > T::zero() { h / v_max } else { T::infinity() };
        lit::<T>(0.25) * diffusive.min(advective)
    }

    /// Periodized initial grid.
    pub fn initial_field(&self, ic: &InitialCondition<T>) -> Result<GridField<T>> {
        let dim = ic.dim();
        if dim > 2 {
            return Err(Error::config("fixture", "the viscous solver supports one and two dimensions"));
        }
        if self.n < 8 {
            return Err(Error::config("N", "grid needs at least 8 nodes per axis"));
        }
        let h = grid_spacing::<T>(self.n);
        let two_pi = T::PI() + T::PI();
        let mut background = Vector::zeros(dim);
        for k in 0..dim {
            let hi = Vector::unit(dim, k) * T::PI();
            background[k] = (ic.value(&hi) - ic.value(&(-hi))) / two_pi;
        }
        let total = self.n.pow(dim as u32);
        let mut field =
            GridField { dim, n: self.n, h, values: vec![T::zero(); total], background, time: T::zero(), mu: self.mu };
        for flat in 0..total {
            let x = field.node_position(flat);
            field.values[flat] = ic.value(&x) - background.dot(&x);
        }
        // the periodic part must agree on opposite faces
        let scale = T::one() + field.values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        for flat in 0..total {
            let x = field.node_position(flat);
            let idx = field.unflatten(flat);
            for k in (0..dim).filter(|&k| idx[k] == 0) {
                let mut far = x;
                far[k] = far[k] + two_pi;
                let psi_far = ic.value(&far) - background.dot(&far);
                if (psi_far - field.values[flat]).abs() > lit::<T>(1e-9) * scale {
                    return Err(Error::config(
                        "fixture",
                        format!("{} is not periodic up to an affine term on [-pi, pi]^{dim}", ic.name()),
                    ));
                }
            }
        }
        Ok(field)
    }

    /// Advances the periodized `ic` to `horizon`, storing frames.
    pub fn solve(&self, ic: &InitialCondition<T>, model: &HamiltonianModel<T>, horizon: T) -> Result<FieldSeries<T>> {
        if !(self.mu > T::zero()) || !self.mu.is_finite() {
            return Err(Error::config("mu", format!("viscosity must be positive, got {}", self.mu)));
        }
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(Error::config("T", "horizon must be positive"));
        }
        if ic.dim() != model.dim() {
            return Err(Error::config("dim", "fixture and Hamiltonian dimensions differ"));
        }
        let mut field = self.initial_field(ic)?;
        let v_max = speed_bound(ic, model);
        let bound = self.stability_bound(field.dim, v_max);
        let dt = match self.dt {
            Some(dt) if !(dt > T::zero()) => return Err(Error::config("dt", "step must be positive")),
            Some(dt) if dt > bound => {
                return Err(Error::config("dt", format!("step {dt} exceeds the stability bound {bound}")))
            }
            Some(dt) => dt,
            None => bound * lit(0.9),
        };
        let steps = (horizon / dt).ceil().to_usize().unwrap_or(1).max(1);
        let dt = horizon / count::<T>(steps);
        let save_every = (self.frame_interval / dt).round().to_usize().unwrap_or(1).max(1);

        let mut frames = vec![field.clone()];
        let mut next = field.values.clone();
        for step in 1..=steps {
            advance(&field, model, dt, &mut next);
            if let Some(bad) = next.iter().position(|v| !v.is_finite()) {
                let _ = bad;
                return Err(Error::NonFinite { step, t: to_f64(field.time + dt) });
            }
            std::mem::swap(&mut field.values, &mut next);
            field.time = dt * count::<T>(step);
            if step % save_every == 0 || step == steps {
                frames.push(field.clone());
            }
        }
        Ok(FieldSeries { frames, mu: self.mu, dt })
    }
}

fn grid_spacing<T: Real>(n: usize) -> T {
    (T::PI() + T::PI()) / count::<T>(n)
}

/// One explicit step: local Lax-Friedrichs Hamiltonian plus centred viscosity.
fn advance<T: Real>(field: &GridField<T>, model: &HamiltonianModel<T>, dt: T, out: &mut [T]) {
    let dim = field.dim;
    let h = field.h;
    let half = lit::<T>(0.5);
    for flat in 0..field.values.len() {
        let idx = field.unflatten(flat);
        let c = field.values[flat];
        let mut minus = field.background;
        let mut plus = field.background;
        let mut lap = T::zero();
        for k in 0..dim {
            let l = field.values[field.shifted(&idx, k, -1)];
            let r = field.values[field.shifted(&idx, k, 1)];
            minus[k] = minus[k] + (c - l) / h;
            plus[k] = plus[k] + (r - c) / h;
            lap = lap + l - c - c + r;
        }
        let mean = (minus + plus) * half;
        // largest |dH/dp_k| over the corners of the box spanned by the one-sided differences
        let mut alpha = [T::zero(); 2];
        for corner in 0..(1usize << dim) {
            let mut p = minus;
            for k in 0..dim {
                if corner & (1 << k) != 0 {
                    p[k] = plus[k];
                }
            }
            let g = model.velocity_of_momentum(&p);
            for k in 0..dim {
                alpha[k] = alpha[k].max(g[k].abs());
            }
        }
        let mut numerical = model.hamiltonian(&mean);
        for k in 0..dim {
            numerical = numerical - half * alpha[k] * (plus[k] - minus[k]);
        }
        out[flat] = c - dt * numerical + dt * field.mu * lap / (h * h);
    }
}

/// `phi^mu` from `ic` to `horizon` with the stability-limited default step.
pub fn solve_viscous<T: Real>(
    ic: &InitialCondition<T>,
    model: &HamiltonianModel<T>,
    mu: T,
    horizon: T,
    n: usize,
    dt: Option<T>,
) -> Result<FieldSeries<T>> {
    ViscousSolver { dt, ..ViscousSolver::new(mu, n) }.solve(ic, model, horizon)
}

/// Trajectory of `x' = grad H(grad phi^mu(t, x))`.
#[derive(Clone, Debug)]
pub struct RegularizedTrajectory<T> {
    pub trajectory: ParticleTrajectory<T>,
    /// Set when some step needed the field past its last frame.
    pub extrapolated: bool,
}

/// Euler integration of the regularized flow over the span of `series`.
pub fn integrate_regularized_flow<T: Real>(
    series: &FieldSeries<T>,
    model: &HamiltonianModel<T>,
    seed: &Vector<T>,
    dt: T,
) -> Result<RegularizedTrajectory<T>> {
    if !(dt > T::zero()) {
        return Err(Error::config("dt", "step must be positive"));
    }
    let horizon = series.end() - series.start();
    let steps = (horizon / dt).round().to_usize().unwrap_or(0).max(1);
    let mut x = *seed;
    let mut traj = ParticleTrajectory {
        id: 0,
        seed: *seed,
        times: Vec::with_capacity(steps + 1),
        positions: Vec::with_capacity(steps + 1),
        on_shock: Vec::with_capacity(steps + 1),
        shock_entry: None,
        merged_into: None,
        merged_at: None,
    };
    let mut extrapolated = false;
    for n in 0..=steps {
        let t = series.start() + dt * count::<T>(n);
        traj.times.push(t);
        traj.positions.push(x);
        traj.on_shock.push(false);
        if n == steps {
            break;
        }
        let (g, past) = series.gradient(t, &x);
        extrapolated |= past;
        let v = model.velocity_of_momentum(&g);
        x += v * dt;
        if !x.is_finite() {
            return Err(Error::NonFinite { step: n + 1, t: to_f64(t + dt) });
        }
    }
    Ok(RegularizedTrajectory { trajectory: traj, extrapolated })
}

/// Anomaly sample along a trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnomalySample<T> {
    pub t: T,
    /// `mu lap phi^mu`.
    pub value: T,
    /// `phi^mu_t + H(grad phi^mu)`.
    pub crosscheck: T,
}

/// `mu lap phi^mu` along a trajectory, with the equation residual as a cross-check.
pub fn anomaly_along<T: Real>(
    series: &FieldSeries<T>,
    model: &HamiltonianModel<T>,
    trajectory: &ParticleTrajectory<T>,
) -> Vec<AnomalySample<T>> {
    trajectory
        .times
        .iter()
        .zip(&trajectory.positions)
        .filter(|(t, _)| **t <= series.end())
        .map(|(&t, x)| {
            let (g, _) = series.gradient(t, x);
            AnomalySample {
                t,
                value: series.mu * series.laplacian(t, x),
                crosscheck: series.time_derivative(t, x) + model.hamiltonian(&g),
            }
        })
        .collect()
}

/// Mean of the anomaly samples with `t` in `[from, to]`.
pub fn plateau<T: Real>(samples: &[AnomalySample<T>], from: T, to: T) -> Option<T> {
    let sel: Vec<T> = samples.iter().filter(|s| s.t >= from && s.t <= to).map(|s| s.value).collect();
    (!sel.is_empty()).then(|| sel.iter().copied().sum::<T>() / count::<T>(sel.len()))
}

/// Distance from `grad phi^mu(t, x)` to the momentum hull of `lms`, one entry
/// per series of the ladder.
pub fn gradient_limit_check<T: Real>(
    ladder: &[FieldSeries<T>],
    lms: &LimitMomentumSet<T>,
    t: T,
    x: &Vector<T>,
) -> Vec<T> {
    let hull = lms.momenta();
    ladder.iter().map(|s| hull_distance(&s.gradient(t, x).0, &hull)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_data_decreases_uniformly() {
        let ic = InitialCondition::Affine { slope: Vector::scalar(0.0), offset: 2.0 };
        let m = HamiltonianModel::<f64>::cosh_sum(1).unwrap();
        let s = solve_viscous(&ic, &m, 0.05, 0.5, 64, None).unwrap();
        let last = s.frames.last().unwrap();
        assert!(last.values.iter().all(|v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn linear_data_keeps_slope() {
        let ic = InitialCondition::Affine { slope: Vector::scalar(0.5), offset: 0.0 };
        let m = HamiltonianModel::<f64>::quadratic(1).unwrap();
        let s = solve_viscous(&ic, &m, 0.05, 0.5, 128, None).unwrap();
        let x = Vector::scalar(0.3);
        assert!((s.value(0.5, &x) - (0.15 - 0.0625)).abs() < 1e-10);
        assert!((s.gradient(0.5, &x).0[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_unstable_step_and_bad_mu() {
        let ic = InitialCondition::NegAbs { dim: 1, tilt: 0.0 };
        let m = HamiltonianModel::<f64>::quadratic(1).unwrap();
        assert!(solve_viscous(&ic, &m, 0.01, 0.1, 256, Some(1.0)).unwrap_err().is_config());
        match solve_viscous(&ic, &m, -0.01, 0.1, 256, None).unwrap_err() {
            Error::Config { key, .. } => assert_eq!(key, "mu"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_periodic_data_rejected() {
        let ic = InitialCondition::NegPower { dim: 1 };
        let m = HamiltonianModel::<f64>::quadratic(1).unwrap();
        assert!(solve_viscous(&ic, &m, 0.05, 0.1, 64, None).is_ok());
        let ic = InitialCondition::Cosine { dim: 2, amplitude: 1.0 };
        let m = HamiltonianModel::<f64>::quadratic(2).unwrap();
        assert!(solve_viscous(&ic, &m, 0.05, 0.05, 16, None).is_ok());
        let ic = InitialCondition::min_affine(
            vec![Vector::from_slice(&[1.0, 0.0]), Vector::from_slice(&[-1.0, 0.0]), Vector::from_slice(&[0.0, 1.5])],
            vec![0.0, 0.0, 0.0],
        )
        .unwrap();
        assert!(solve_viscous(&ic, &m, 0.05, 0.05, 16, None).unwrap_err().is_config());
    }
}
