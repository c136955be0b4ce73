//! Convex Hamiltonians `H(p)` and the Legendre duality between momenta and velocities.
//!
//! Every shipped [`HamiltonianKind`] has a closed-form Lagrangian and closed-form
//! inverse of `p -> grad H(p)`. [`LagrangianView`] computes the same quantities by
//! maximizing `p.v - H(p)` numerically; it is kept as an independent route for
//! cross-checking and for models without a closed form.

use crate::error::{Error, Result};
use crate::linalg::SmallMatrix;
use crate::scalar::{lit, Real};
use crate::vector::{Vector, MAX_DIM};

/// The four families of strictly convex, superlinear Hamiltonians.
#[derive(Clone, Debug, PartialEq)]
pub enum HamiltonianKind<T> {
    /// `|p|^2 / 2`; the Legendre map is the identity.
    Quadratic,
    /// `p^T A p / 2` with `A` symmetric positive definite.
    AnisotropicQuadratic { matrix: SmallMatrix<T> },
    /// `|p|^a / a` with `a > 1`.
    PowerLaw { exponent: T },
    /// `sum_k (cosh p_k - 1)`.
    CoshSum,
}

impl<T> HamiltonianKind<T> {
    pub fn name(&self) -> &'static str {
        match self {
            HamiltonianKind::Quadratic => "quadratic",
            HamiltonianKind::AnisotropicQuadratic { .. } => "anisotropic",
            HamiltonianKind::PowerLaw { .. } => "power-law",
            HamiltonianKind::CoshSum => "cosh-sum",
        }
    }
}

/// A Hamiltonian `H(p)` on `R^d` together with its Legendre structure.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianModel<T> {
    kind: HamiltonianKind<T>,
    dim: usize,
    // cached for the anisotropic kind
    inverse: Option<SmallMatrix<T>>,
    cholesky: Option<SmallMatrix<T>>,
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&dim) {
        Ok(())
    } else {
        Err(Error::config("hamiltonian.dim", format!("dimension {dim} not in 1..=3")))
    }
}

impl<T: Real> HamiltonianModel<T> {
    pub fn quadratic(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self { kind: HamiltonianKind::Quadratic, dim, inverse: None, cholesky: None })
    }

    pub fn anisotropic(matrix: SmallMatrix<T>) -> Result<Self> {
        let dim = matrix.dim();
        check_dim(dim)?;
        if !matrix.is_symmetric(lit::<T>(1e-12) * (T::one() + matrix.frobenius())) {
            return Err(Error::config("hamiltonian.matrix", "matrix is not symmetric"));
        }
        let cholesky =
            matrix.cholesky().ok_or_else(|| Error::config("hamiltonian.matrix", "matrix is not positive definite"))?;
        let inverse = matrix.inverse().ok_or_else(|| Error::config("hamiltonian.matrix", "matrix is singular"))?;
        Ok(Self {
            kind: HamiltonianKind::AnisotropicQuadratic { matrix },
            dim,
            inverse: Some(inverse),
            cholesky: Some(cholesky),
        })
    }

    pub fn power_law(dim: usize, exponent: T) -> Result<Self> {
        check_dim(dim)?;
        if !(exponent > T::one()) || !exponent.is_finite() {
            return Err(Error::config("hamiltonian.exponent", "exponent must be finite and > 1"));
        }
        Ok(Self { kind: HamiltonianKind::PowerLaw { exponent }, dim, inverse: None, cholesky: None })
    }

    pub fn cosh_sum(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self { kind: HamiltonianKind::CoshSum, dim, inverse: None, cholesky: None })
    }

    pub fn kind(&self) -> &HamiltonianKind<T> {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True when the Lagrangian is a quadratic form, so Bregman divergences are
    /// (half) squared distances in a fixed metric.
    pub fn is_quadratic_form(&self) -> bool {
        matches!(self.kind, HamiltonianKind::Quadratic | HamiltonianKind::AnisotropicQuadratic { .. })
    }

    /// Lower Cholesky factor `C` with `A = C C^T` (identity for the quadratic kind).
    pub fn metric_factor(&self) -> Option<SmallMatrix<T>> {
        match self.kind {
            HamiltonianKind::Quadratic => Some(SmallMatrix::identity(self.dim)),
            HamiltonianKind::AnisotropicQuadratic { .. } => self.cholesky,
            _ => None,
        }
    }

    pub fn hamiltonian(&self, p: &Vector<T>) -> T {
        debug_assert_eq!(p.dim(), self.dim);
        let half = lit::<T>(0.5);
        match &self.kind {
            HamiltonianKind::Quadratic => half * p.norm_sq(),
            HamiltonianKind::AnisotropicQuadratic { matrix } => half * matrix.quadratic_form(p),
            HamiltonianKind::PowerLaw { exponent } => p.norm().powf(*exponent) / *exponent,
            HamiltonianKind::CoshSum => p.iter().map(|&x| x.cosh() - T::one()).sum(),
        }
    }

    /// `grad_p H(p)`: the velocity carried by momentum `p`.
    pub fn velocity_of_momentum(&self, p: &Vector<T>) -> Vector<T> {
        match &self.kind {
            HamiltonianKind::Quadratic => *p,
            HamiltonianKind::AnisotropicQuadratic { matrix } => matrix.mul_vec(p),
            HamiltonianKind::PowerLaw { exponent } => {
                let r = p.norm();
                if r == T::zero() {
                    Vector::zeros(self.dim)
                } else {
                    *p * r.powf(*exponent - lit(2.0))
                }
            }
            HamiltonianKind::CoshSum => p.map(|x| x.sinh()),
        }
    }

    /// `grad_p^2 H(p)`. For the power law with `a < 2` the Hessian blows up at
    /// `p = 0`; the returned matrix is then evaluated at `|p| = tiny`.
    pub fn hessian(&self, p: &Vector<T>) -> SmallMatrix<T> {
        match &self.kind {
            HamiltonianKind::Quadratic => SmallMatrix::identity(self.dim),
            HamiltonianKind::AnisotropicQuadratic { matrix } => *matrix,
            HamiltonianKind::PowerLaw { exponent } => radial_power_hessian(p, *exponent),
            HamiltonianKind::CoshSum => SmallMatrix::diagonal(&p.map(|x| x.cosh())),
        }
    }

    /// Inverse Legendre map `v -> grad_v L(v)`, in closed form.
    pub fn momentum_of_velocity(&self, v: &Vector<T>) -> Vector<T> {
        match &self.kind {
            HamiltonianKind::Quadratic => *v,
            HamiltonianKind::AnisotropicQuadratic { .. } => self.inverse.as_ref().expect("cached inverse").mul_vec(v),
            HamiltonianKind::PowerLaw { exponent } => {
                let r = v.norm();
                if r == T::zero() {
                    Vector::zeros(self.dim)
                } else {
                    let dual = *exponent / (*exponent - T::one());
                    *v * r.powf(dual - lit(2.0))
                }
            }
            HamiltonianKind::CoshSum => v.map(|x| x.asinh()),
        }
    }

    /// `L(v) = max_p [p.v - H(p)]`, in closed form.
    pub fn lagrangian(&self, v: &Vector<T>) -> T {
        let half = lit::<T>(0.5);
        match &self.kind {
            HamiltonianKind::Quadratic => half * v.norm_sq(),
            HamiltonianKind::AnisotropicQuadratic { .. } => {
                half * self.inverse.as_ref().expect("cached inverse").quadratic_form(v)
            }
            HamiltonianKind::PowerLaw { exponent } => {
                let dual = *exponent / (*exponent - T::one());
                v.norm().powf(dual) / dual
            }
            HamiltonianKind::CoshSum => v.iter().map(|&x| x * x.asinh() - (T::one() + x * x).sqrt() + T::one()).sum(),
        }
    }

    /// `grad_v^2 L(v)`, the inverse of the Hessian of `H` at the paired momentum.
    pub fn lagrangian_hessian(&self, v: &Vector<T>) -> SmallMatrix<T> {
        match &self.kind {
            HamiltonianKind::Quadratic => SmallMatrix::identity(self.dim),
            HamiltonianKind::AnisotropicQuadratic { .. } => *self.inverse.as_ref().expect("cached inverse"),
            HamiltonianKind::PowerLaw { exponent } => radial_power_hessian(v, *exponent / (*exponent - T::one())),
            HamiltonianKind::CoshSum => SmallMatrix::diagonal(&v.map(|x| T::one() / (T::one() + x * x).sqrt())),
        }
    }

    /// `L(v) + H(p) - p.v`; nonnegative, zero exactly on Legendre pairs.
    pub fn young_gap(&self, p: &Vector<T>, v: &Vector<T>) -> T {
        self.lagrangian(v) + self.hamiltonian(p) - p.dot(v)
    }

    /// `L(v) - L(v_i) - grad L(v_i).(v - v_i)`.
    pub fn bregman_divergence(&self, v: &Vector<T>, v_i: &Vector<T>) -> T {
        let half = lit::<T>(0.5);
        let dv = *v - *v_i;
        match &self.kind {
            HamiltonianKind::Quadratic => half * dv.norm_sq(),
            HamiltonianKind::AnisotropicQuadratic { .. } => {
                half * self.inverse.as_ref().expect("cached inverse").quadratic_form(&dv)
            }
            _ => self.lagrangian(v) - self.lagrangian(v_i) - self.momentum_of_velocity(v_i).dot(&dv),
        }
    }

    /// `sup { |grad H(p)| : |p| <= momentum_bound }`.
    pub fn max_speed(&self, momentum_bound: T) -> T {
        let b = momentum_bound.abs();
        match &self.kind {
            HamiltonianKind::Quadratic => b,
            HamiltonianKind::AnisotropicQuadratic { matrix } => matrix.frobenius() * b,
            HamiltonianKind::PowerLaw { exponent } => b.powf(*exponent - T::one()),
            // sinh^2(sqrt(s)) is convex in s, so the sup sits on a coordinate axis
            HamiltonianKind::CoshSum => b.sinh(),
        }
    }

    pub fn lagrangian_view(&self) -> LagrangianView<'_, T> {
        LagrangianView::new(self)
    }
}

/// Hessian of `|x|^q / q`: `|x|^{q-2} I + (q-2) |x|^{q-4} x x^T`.
fn radial_power_hessian<T: Real>(x: &Vector<T>, q: T) -> SmallMatrix<T> {
    let dim = x.dim();
    let r = x.norm().max(lit(1e-150));
    let two = lit::<T>(2.0);
    let iso = SmallMatrix::identity(dim).scaled(r.powf(q - two));
    let radial = SmallMatrix::outer(x).scaled((q - two) * r.powf(q - lit(4.0)));
    iso.add(&radial)
}

/// Numerical Legendre transform: maximizes the strictly concave `p.v - H(p)`
/// by safeguarded Newton iteration.
///
/// In one dimension Newton is safeguarded by bisection on the monotone map
/// `p -> H'(p)`; in higher dimensions by Levenberg damping and backtracking.
#[derive(Clone, Debug)]
pub struct LagrangianView<'a, T> {
    model: &'a HamiltonianModel<T>,
    /// Residual tolerance `|grad H(p) - v| <= tolerance * (1 + |v|)`.
    pub tolerance: T,
    pub max_iter: usize,
}

impl<'a, T: Real> LagrangianView<'a, T> {
    pub fn new(model: &'a HamiltonianModel<T>) -> Self {
        Self { model, tolerance: lit(1e-12), max_iter: 200 }
    }

    pub fn model(&self) -> &HamiltonianModel<T> {
        self.model
    }

    pub fn momentum_of_velocity(&self, v: &Vector<T>) -> Result<Vector<T>> {
        if !v.is_finite() {
            return Err(Error::numerical("legendre inversion", "non-finite velocity"));
        }
        if self.model.dim == 1 {
            self.invert_1d(v[0]).map(Vector::scalar)
        } else {
            self.invert_nd(v)
        }
    }

    pub fn lagrangian(&self, v: &Vector<T>) -> Result<T> {
        let p = self.momentum_of_velocity(v)?;
        Ok(p.dot(v) - self.model.hamiltonian(&p))
    }

    pub fn young_gap(&self, p: &Vector<T>, v: &Vector<T>) -> Result<T> {
        Ok(self.lagrangian(v)? + self.model.hamiltonian(p) - p.dot(v))
    }

    fn invert_1d(&self, v: T) -> Result<T> {
        let m = self.model;
        let deriv = |p: T| m.velocity_of_momentum(&Vector::scalar(p))[0];
        let target_tol = self.tolerance * (T::one() + v.abs());
        // bracket the root of H'(p) = v; H' is increasing
        let (mut lo, mut hi) = (-T::one(), T::one());
        let mut expansions = 0;
        while deriv(lo) > v || deriv(hi) < v {
            lo = lo + lo;
            hi = hi + hi;
            expansions += 1;
            if expansions > 2000 || !lo.is_finite() {
                return Err(Error::numerical("legendre inversion", "failed to bracket root"));
            }
        }
        let mut p = if v == T::zero() { T::zero() } else { (lo + hi) * lit(0.5) };
        for _ in 0..self.max_iter {
            let r = deriv(p) - v;
            if r.abs() <= target_tol {
                return Ok(p);
            }
            if r > T::zero() {
                hi = p;
            } else {
                lo = p;
            }
            let h2 = m.hessian(&Vector::scalar(p)).get(0, 0);
            let newton = p - r / h2;
            p = if h2 > T::zero() && newton > lo && newton < hi { newton } else { (lo + hi) * lit(0.5) };
            if hi - lo <= T::epsilon() * (T::one() + p.abs()) {
                return Ok(p);
            }
        }
        Err(Error::numerical("legendre inversion", format!("no convergence for v = {v}")))
    }

    // solve u.grad H(s u) = |v| along u = v/|v|; a good starting point for Newton
    fn radial_start(&self, v: &Vector<T>) -> Result<Vector<T>> {
        let m = self.model;
        let r = v.norm();
        if r == T::zero() {
            return Ok(Vector::zeros(m.dim));
        }
        let u = *v / r;
        let f = |s: T| u.dot(&m.velocity_of_momentum(&(u * s))) - r;
        let (mut lo, mut hi) = (T::zero(), T::one());
        let mut expansions = 0;
        while f(hi) < T::zero() {
            lo = hi;
            hi = hi + hi;
            expansions += 1;
            if expansions > 2000 || !hi.is_finite() {
                return Err(Error::numerical("legendre inversion", "failed to bracket root"));
            }
        }
        for _ in 0..200 {
            let mid = (lo + hi) * lit(0.5);
            if f(mid) < T::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= T::epsilon() * hi {
                break;
            }
        }
        Ok(u * ((lo + hi) * lit(0.5)))
    }

    fn invert_nd(&self, v: &Vector<T>) -> Result<Vector<T>> {
        let m = self.model;
        let dim = m.dim;
        let objective = |p: &Vector<T>| p.dot(v) - m.hamiltonian(p);
        let target_tol = self.tolerance * (T::one() + v.norm());
        let mut p = self.radial_start(v)?;
        for _ in 0..self.max_iter {
            let g = *v - m.velocity_of_momentum(&p);
            if g.norm() <= target_tol {
                return Ok(p);
            }
            let mut hess = m.hessian(&p);
            let damping = lit::<T>(1e-12) * (T::one() + g.norm());
            for k in 0..dim {
                hess.set(k, k, hess.get(k, k) + damping);
            }
            let step = hess.solve(&g).unwrap_or(g);
            let f0 = objective(&p);
            let slope = g.dot(&step);
            let mut alpha = T::one();
            let mut accepted = false;
            for _ in 0..60 {
                let trial = p + step * alpha;
                let f1 = objective(&trial);
                if f1.is_finite() && f1 >= f0 + lit::<T>(1e-4) * alpha * slope {
                    p = trial;
                    accepted = true;
                    break;
                }
                alpha = alpha * lit(0.5);
            }
            if !accepted {
                // at the precision floor of the objective; accept if the residual is small
                if g.norm() <= lit::<T>(1e3) * target_tol {
                    return Ok(p);
                }
                return Err(Error::numerical("legendre inversion", "line search stalled"));
            }
        }
        Err(Error::numerical("legendre inversion", format!("no convergence for v = {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v1(x: f64) -> Vector<f64> {
        Vector::scalar(x)
    }

    /// Brute-force conjugate on a uniform grid, refined once around the best node.
    fn grid_conjugate(h: impl Fn(f64) -> f64, v: f64, lo: f64, hi: f64) -> f64 {
        let n = 200_000;
        let step = (hi - lo) / n as f64;
        let (mut best_p, mut best) = (lo, f64::NEG_INFINITY);
        for i in 0..=n {
            let p = lo + step * i as f64;
            let val = p * v - h(p);
            if val > best {
                best = val;
                best_p = p;
            }
        }
        let fine = step / 1000.0;
        for i in -1000..=1000 {
            let p = best_p + fine * i as f64;
            best = best.max(p * v - h(p));
        }
        best
    }

    #[test]
    fn quadratic_lagrangian_is_half_square() {
        let m = HamiltonianModel::<f64>::quadratic(2).unwrap();
        assert_eq!(m.lagrangian(&Vector::from_slice(&[3.0, 4.0])), 12.5);
        assert_eq!(m.velocity_of_momentum(&Vector::from_slice(&[1.0, 2.0])).as_slice(), &[1.0, 2.0]);
        assert_eq!(m.momentum_of_velocity(&Vector::from_slice(&[1.0, 2.0])).as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn power_law_values_match_grid_oracle() {
        let m = HamiltonianModel::power_law(1, 4.0).unwrap();
        let oracle = grid_conjugate(|p| p.powi(4) / 4.0, 8.0, -5.0, 5.0);
        assert!((oracle - 12.0).abs() < 1e-8, "oracle {oracle}");
        assert!((m.lagrangian(&v1(8.0)) - 12.0).abs() < 1e-12);

        // central difference of H at p = 2
        let h = |p: f64| p.powi(4) / 4.0;
        let fd = (h(2.0 + 1e-5) - h(2.0 - 1e-5)) / 2e-5;
        assert!((fd - 8.0).abs() < 1e-8);
        assert!((m.velocity_of_momentum(&v1(2.0))[0] - 8.0).abs() < 1e-12);

        // bisection on H'(p) = 8
        let (mut lo, mut hi) = (0.0f64, 10.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid.powi(3) < 8.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((lo - 2.0).abs() < 1e-12);
        assert!((m.momentum_of_velocity(&v1(8.0))[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn young_gap_examples() {
        let q = HamiltonianModel::<f64>::quadratic(2).unwrap();
        let gap = q.young_gap(&Vector::from_slice(&[1.0, 0.0]), &Vector::from_slice(&[0.0, 1.0]));
        assert!((gap - 1.0).abs() < 1e-15);

        let m = HamiltonianModel::power_law(1, 4.0).unwrap();
        let l0 = grid_conjugate(|p| p.powi(4) / 4.0, 0.0, -5.0, 5.0);
        assert!(l0.abs() < 1e-12);
        assert!((m.young_gap(&v1(1.0), &v1(0.0)) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn bregman_examples() {
        let q = HamiltonianModel::<f64>::quadratic(2).unwrap();
        let b = q.bregman_divergence(&Vector::from_slice(&[1.0, 1.0]), &Vector::zeros(2));
        assert!((b - 1.0).abs() < 1e-15);

        let m = HamiltonianModel::power_law(1, 4.0).unwrap();
        // L(1) = 3/4 and L(0) = 0 from the grid oracle, grad L(0) = 0
        let l1 = grid_conjugate(|p| p.powi(4) / 4.0, 1.0, -5.0, 5.0);
        assert!((l1 - 0.75).abs() < 1e-9);
        assert!((m.bregman_divergence(&v1(1.0), &v1(0.0)) - 0.75).abs() < 1e-12);
        assert_eq!(m.bregman_divergence(&v1(0.7), &v1(0.7)), 0.0);
    }

    #[test]
    fn cosh_gradient_vanishes_at_origin() {
        let m = HamiltonianModel::<f64>::cosh_sum(3).unwrap();
        assert_eq!(m.velocity_of_momentum(&Vector::zeros(3)).norm(), 0.0);
    }

    #[test]
    fn anisotropic_rejects_indefinite() {
        let bad = SmallMatrix::from_row_major(&[1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(HamiltonianModel::<f64>::anisotropic(bad).unwrap_err().is_config());
        assert!(HamiltonianModel::<f64>::power_law(1, 1.0).is_err());
        assert!(HamiltonianModel::<f64>::quadratic(4).is_err());
    }

    #[test]
    fn numeric_view_agrees_with_closed_form() {
        let aniso = SmallMatrix::from_row_major(&[2.0, 0.3, 0.3, 1.0]).unwrap();
        let models = [
            HamiltonianModel::<f64>::quadratic(2).unwrap(),
            HamiltonianModel::anisotropic(aniso).unwrap(),
            HamiltonianModel::power_law(2, 3.0).unwrap(),
            HamiltonianModel::power_law(1, 1.5).unwrap(),
            HamiltonianModel::cosh_sum(3).unwrap(),
        ];
        for m in &models {
            let view = m.lagrangian_view();
            for s in [0.3, -1.7, 4.0] {
                let v = Vector::filled(m.dim(), s);
                let p_num = view.momentum_of_velocity(&v).unwrap();
                let p_exact = m.momentum_of_velocity(&v);
                assert!((p_num - p_exact).norm() < 1e-9 * (1.0 + p_exact.norm()), "{:?}", m.kind());
                let l_num = view.lagrangian(&v).unwrap();
                assert!((l_num - m.lagrangian(&v)).abs() < 1e-9 * (1.0 + l_num.abs()));
            }
        }
    }

    #[test]
    fn single_precision_round_trip() {
        let m = HamiltonianModel::<f32>::cosh_sum(2).unwrap();
        let p = Vector::from_slice(&[0.5f32, -1.25]);
        let back = m.momentum_of_velocity(&m.velocity_of_momentum(&p));
        assert!((back - p).norm() < 1e-5);
    }
}
