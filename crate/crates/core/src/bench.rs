//! Random shock configurations and a brute-force grid minimizer of `lhat`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::admissible::lhat;
use crate::error::Result;
use crate::legendre::HamiltonianModel;
use crate::linalg::SmallMatrix;
use crate::scalar::{count, lit, Real};
use crate::superdiff::LimitMomentumSet;
use crate::vector::Vector;

pub const KINDS: [&str; 4] = ["quadratic", "anisotropic", "power-law", "cosh-sum"];

/// One random configuration.
#[derive(Clone, Debug)]
pub struct BenchInstance<T> {
    pub id: usize,
    pub model: HamiltonianModel<T>,
    pub lms: LimitMomentumSet<T>,
}

/// Model of family `kind` in dimension `dim` with randomized parameters.
pub fn random_model<T: Real>(rng: &mut impl Rng, kind: &str, dim: usize) -> Result<HamiltonianModel<T>> {
    match kind {
        "quadratic" => HamiltonianModel::quadratic(dim),
        "anisotropic" => {
            let mut b = SmallMatrix::<T>::zeros(dim);
            for i in 0..dim {
                for j in 0..dim {
                    b.set(i, j, lit(rng.random_range(-1.0..1.0)));
                }
            }
            let mut a = SmallMatrix::identity(dim).scaled(lit(0.5));
            for i in 0..dim {
                for j in 0..dim {
                    let mut s = a.get(i, j);
                    for k in 0..dim {
                        s = s + b.get(i, k) * b.get(j, k);
                    }
                    a.set(i, j, s);
                }
            }
            HamiltonianModel::anisotropic(a)
        }
        "power-law" => HamiltonianModel::power_law(dim, lit(rng.random_range(1.5..4.0))),
        _ => HamiltonianModel::cosh_sum(dim),
    }
}

/// `k` momenta drawn uniformly from the ball `|p| <= radius`.
pub fn random_momenta<T: Real>(rng: &mut impl Rng, dim: usize, k: usize, radius: f64) -> Vec<Vector<T>> {
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let p: Vec<f64> = (0..dim).map(|_| rng.random_range(-radius..radius)).collect();
        if p.iter().map(|x| x * x).sum::<f64>().sqrt() <= radius {
            out.push(Vector::from_f64(&p));
        }
    }
    out
}

/// `n` instances cycling through the four families, `d` in 1..=3, `k` in 2..=6,
/// momenta with `|p| <= 2`.
pub fn random_instances<T: Real>(n: usize, seed: u64) -> Result<Vec<BenchInstance<T>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|id| {
            let kind = KINDS[id % KINDS.len()];
            let dim = rng.random_range(1..=3);
            let k = rng.random_range(2..=6);
            let model = random_model(&mut rng, kind, dim)?;
            let lms = LimitMomentumSet::from_momenta(&model, &random_momenta(&mut rng, dim, k, 2.0))?;
            Ok(BenchInstance { id, model, lms })
        })
        .collect()
}

/// Grid step of the oracle: `1e-3` in 1D, `5e-3` otherwise.
pub fn oracle_step<T: Real>(dim: usize) -> T {
    if dim == 1 {
        lit(1e-3)
    } else {
        lit(5e-3)
    }
}

/// Grid minimizer of `lhat`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleResult<T> {
    pub v: Vector<T>,
    pub value: T,
    pub step: T,
}

/// Coarse-to-fine grid search for `argmin lhat` over a box around the branch
/// velocities; the last level has spacing `step`.
pub fn grid_oracle<T: Real>(lms: &LimitMomentumSet<T>, model: &HamiltonianModel<T>, step: T) -> OracleResult<T> {
    let dim = lms.dim();
    let velocities = lms.velocities();
    let mut lo = velocities[0];
    let mut hi = velocities[0];
    for v in &velocities {
        for c in 0..dim {
            lo[c] = lo[c].min(v[c]);
            hi[c] = hi[c].max(v[c]);
        }
    }
    let mut center = (lo + hi) * lit(0.5);
    let mut half_width = (0..dim).fold(T::zero(), |m, c| m.max(hi[c] - lo[c])) * lit(0.625) + lit(0.1);
    let per_axis = 61usize;
    let mut best = OracleResult { v: center, value: lhat(lms, model, &center), step };
    loop {
        let mut h = (half_width + half_width) / count::<T>(per_axis - 1);
        let last = h <= step;
        let mut n = per_axis;
        if last {
            h = step;
            n = ((half_width + half_width) / step).ceil().to_usize().unwrap_or(per_axis) + 1;
        }
        let origin = center - Vector::filled(dim, h * count::<T>(n - 1) * lit(0.5));
        let total = n.pow(dim as u32);
        for flat in 0..total {
            let mut rest = flat;
            let mut v = origin;
            for c in 0..dim {
                v[c] = v[c] + h * count::<T>(rest % n);
                rest /= n;
            }
            let value = lhat(lms, model, &v);
            if value < best.value {
                best = OracleResult { v, value, step: h };
            }
        }
        if last {
            best.step = step;
            return best;
        }
        center = best.v;
        half_width = h * lit(15.0);
    }
}
