//! Initial data `phi_0(y)` for the Cauchy problem.

use crate::error::{Error, Result};
use crate::scalar::{count, lit, Real};
use crate::vector::Vector;

/// Tabulated initial data on a uniform grid (1D or 2D), multilinear in between
/// and clamped to the box outside.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledTable<T> {
    lower: Vector<T>,
    upper: Vector<T>,
    shape: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> SampledTable<T> {
    /// `values` are row-major with the last axis fastest.
    pub fn new(lower: Vector<T>, upper: Vector<T>, shape: Vec<usize>, values: Vec<T>) -> Result<Self> {
        let dim = lower.dim();
        if upper.dim() != dim || shape.len() != dim || dim > 2 {
            return Err(Error::config("fixture.table", "table must be 1D or 2D with matching bounds"));
        }
        if shape.iter().any(|&n| n < 2) || shape.iter().product::<usize>() != values.len() {
            return Err(Error::config("fixture.table", "shape does not match value count"));
        }
        if (0..dim).any(|k| !(upper[k] > lower[k])) {
            return Err(Error::config("fixture.table", "empty box"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("fixture.table", "non-finite sample"));
        }
        Ok(Self { lower, upper, shape, values })
    }

    /// Samples `f` on the box.
    pub fn from_fn(lower: Vector<T>, upper: Vector<T>, shape: Vec<usize>, f: impl Fn(&Vector<T>) -> T) -> Result<Self> {
        let dim = lower.dim();
        let total: usize = shape.iter().product();
        let mut values = Vec::with_capacity(total);
        for flat in 0..total {
            let idx = unflatten(flat, &shape);
            let mut y = Vector::zeros(dim);
            for k in 0..dim {
                y[k] = lower[k] + (upper[k] - lower[k]) * count::<T>(idx[k]) / count::<T>(shape[k] - 1);
            }
            values.push(f(&y));
        }
        Self::new(lower, upper, shape, values)
    }

    pub fn dim(&self) -> usize {
        self.lower.dim()
    }

    fn spacing(&self, k: usize) -> T {
        (self.upper[k] - self.lower[k]) / count::<T>(self.shape[k] - 1)
    }

    fn at(&self, idx: &[usize]) -> T {
        let flat = idx.iter().zip(&self.shape).fold(0, |acc, (&i, &n)| acc * n + i);
        self.values[flat]
    }

    pub fn value(&self, y: &Vector<T>) -> T {
        let dim = self.dim();
        let mut base = [0usize; 2];
        let mut frac = [T::zero(); 2];
        for k in 0..dim {
            let h = self.spacing(k);
            let s = ((y[k].max(self.lower[k]).min(self.upper[k])) - self.lower[k]) / h;
            let i = s.floor().to_usize().unwrap_or(0).min(self.shape[k] - 2);
            base[k] = i;
            frac[k] = s - count::<T>(i);
        }
        let mut acc = T::zero();
        for corner in 0..(1usize << dim) {
            let mut w = T::one();
            let mut idx = [0usize; 2];
            for k in 0..dim {
                let up = corner >> k & 1 == 1;
                idx[k] = base[k] + usize::from(up);
                w = w * if up { frac[k] } else { T::one() - frac[k] };
            }
            acc = acc + w * self.at(&idx[..dim]);
        }
        acc
    }

    /// Largest difference quotient along grid axes, scaled to a Euclidean bound.
    pub fn lipschitz_bound(&self) -> T {
        let dim = self.dim();
        let mut best = T::zero();
        let total: usize = self.shape.iter().product();
        for flat in 0..total {
            let idx = unflatten(flat, &self.shape);
            for k in 0..dim {
                if idx[k] + 1 < self.shape[k] {
                    let mut next = idx.clone();
                    next[k] += 1;
                    let q = (self.at(&next) - self.at(&idx)).abs() / self.spacing(k);
                    best = best.max(q);
                }
            }
        }
        best * count::<T>(dim).sqrt()
    }
}

fn unflatten(mut flat: usize, shape: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for k in (0..shape.len()).rev() {
        idx[k] = flat % shape[k];
        flat /= shape[k];
    }
    idx
}

/// Catalog of initial conditions.
///
/// Forms that depend on a single coordinate use `y_1` and are constant in the
/// remaining ones, so a 2D `NegAbs` is a planar shock sheet.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialCondition<T> {
    Zero {
        dim: usize,
    },
    /// `slope . y + offset`.
    Affine {
        slope: Vector<T>,
        offset: T,
    },
    /// `-|y_1| + tilt * y_1`.
    NegAbs {
        dim: usize,
        tilt: T,
    },
    /// `-(4/3) |y_1|^{3/2}`: a preshock at the origin at `t = 0`.
    NegPower {
        dim: usize,
    },
    /// `amplitude * sum_k cos(y_k)`.
    Cosine {
        dim: usize,
        amplitude: T,
    },
    /// Continuous piecewise-linear profile in `y_1` through `(knots[i], values[i])`,
    /// extended linearly beyond the end knots.
    PiecewiseLinear {
        dim: usize,
        knots: Vec<T>,
        values: Vec<T>,
    },
    /// `min_i (slopes[i] . y + offsets[i])`: concave, piecewise affine.
    MinAffine {
        slopes: Vec<Vector<T>>,
        offsets: Vec<T>,
    },
    Sampled(SampledTable<T>),
}

impl<T: Real> InitialCondition<T> {
    pub fn piecewise_linear(dim: usize, knots: Vec<T>, values: Vec<T>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != values.len() {
            return Err(Error::config("fixture.knots", "need at least two knots with matching values"));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config("fixture.knots", "knots must be strictly increasing"));
        }
        Ok(InitialCondition::PiecewiseLinear { dim, knots, values })
    }

    pub fn min_affine(slopes: Vec<Vector<T>>, offsets: Vec<T>) -> Result<Self> {
        if slopes.is_empty() || slopes.len() != offsets.len() {
            return Err(Error::config("fixture.slopes", "need matching non-empty slopes and offsets"));
        }
        let dim = slopes[0].dim();
        if slopes.iter().any(|s| s.dim() != dim) {
            return Err(Error::config("fixture.slopes", "slopes of mixed dimension"));
        }
        Ok(InitialCondition::MinAffine { slopes, offsets })
    }

    pub fn dim(&self) -> usize {
        match self {
            InitialCondition::Zero { dim }
            | InitialCondition::NegAbs { dim, .. }
            | InitialCondition::NegPower { dim }
            | InitialCondition::Cosine { dim, .. }
            | InitialCondition::PiecewiseLinear { dim, .. } => *dim,
            InitialCondition::Affine { slope, .. } => slope.dim(),
            InitialCondition::MinAffine { slopes, .. } => slopes[0].dim(),
            InitialCondition::Sampled(table) => table.dim(),
        }
    }

    pub fn value(&self, y: &Vector<T>) -> T {
        match self {
            InitialCondition::Zero { .. } => T::zero(),
            InitialCondition::Affine { slope, offset } => slope.dot(y) + *offset,
            InitialCondition::NegAbs { tilt, .. } => -y[0].abs() + *tilt * y[0],
            InitialCondition::NegPower { .. } => -lit::<T>(4.0 / 3.0) * y[0].abs().powf(lit(1.5)),
            InitialCondition::Cosine { amplitude, .. } => *amplitude * y.iter().map(|x| x.cos()).sum::<T>(),
            InitialCondition::PiecewiseLinear { knots, values, .. } => {
                let s = y[0];
                let n = knots.len();
                let seg = if s <= knots[0] {
                    0
                } else if s >= knots[n - 1] {
                    n - 2
                } else {
                    knots.partition_point(|&k| k <= s) - 1
                };
                let w = (s - knots[seg]) / (knots[seg + 1] - knots[seg]);
                values[seg] + w * (values[seg + 1] - values[seg])
            }
            InitialCondition::MinAffine { slopes, offsets } => {
                slopes.iter().zip(offsets).map(|(s, &c)| s.dot(y) + c).fold(T::infinity(), T::min)
            }
            InitialCondition::Sampled(table) => table.value(y),
        }
    }

    /// Gradient where `phi_0` is differentiable; `None` for tabulated data or
    /// exactly at a kink.
    pub fn gradient(&self, y: &Vector<T>) -> Option<Vector<T>> {
        let dim = self.dim();
        let along_first = |g: T| {
            let mut v = Vector::zeros(dim);
            v[0] = g;
            v
        };
        match self {
            InitialCondition::Zero { .. } => Some(Vector::zeros(dim)),
            InitialCondition::Affine { slope, .. } => Some(*slope),
            InitialCondition::NegAbs { tilt, .. } => (y[0] != T::zero()).then(|| along_first(-y[0].signum() + *tilt)),
            InitialCondition::NegPower { .. } => Some(along_first(-lit::<T>(2.0) * y[0].signum() * y[0].abs().sqrt())),
            InitialCondition::Cosine { amplitude, .. } => Some(y.map(|x| -*amplitude * x.sin())),
            InitialCondition::PiecewiseLinear { knots, values, .. } => {
                let s = y[0];
                if knots.contains(&s) {
                    return None;
                }
                let n = knots.len();
                let seg = if s < knots[0] {
                    0
                } else if s > knots[n - 1] {
                    n - 2
                } else {
                    knots.partition_point(|&k| k <= s) - 1
                };
                Some(along_first((values[seg + 1] - values[seg]) / (knots[seg + 1] - knots[seg])))
            }
            InitialCondition::MinAffine { slopes, offsets } => {
                let vals: Vec<T> = slopes.iter().zip(offsets).map(|(s, &c)| s.dot(y) + c).collect();
                let min = vals.iter().copied().fold(T::infinity(), T::min);
                let mut hits = vals.iter().enumerate().filter(|(_, &v)| v == min);
                let (i, _) = hits.next()?;
                hits.next().is_none().then_some(slopes[i])
            }
            InitialCondition::Sampled(_) => None,
        }
    }

    /// Upper bound on `|grad phi_0|` over the evaluation box `[-pi, pi]^d`.
    pub fn lipschitz_bound(&self) -> T {
        match self {
            InitialCondition::Zero { .. } => T::zero(),
            InitialCondition::Affine { slope, .. } => slope.norm(),
            InitialCondition::NegAbs { tilt, .. } => T::one() + tilt.abs(),
            InitialCondition::NegPower { .. } => lit::<T>(2.0) * T::PI().sqrt(),
            InitialCondition::Cosine { dim, amplitude } => amplitude.abs() * count::<T>(*dim).sqrt(),
            InitialCondition::PiecewiseLinear { knots, values, .. } => knots
                .windows(2)
                .zip(values.windows(2))
                .map(|(k, v)| ((v[1] - v[0]) / (k[1] - k[0])).abs())
                .fold(T::zero(), T::max),
            InitialCondition::MinAffine { slopes, .. } => slopes.iter().map(|s| s.norm()).fold(T::zero(), T::max),
            InitialCondition::Sampled(table) => table.lipschitz_bound(),
        }
    }

    /// Affine pieces `(slope, offset)` with `phi_0 = min_i (slope_i . y + offset_i)`,
    /// when the data is concave piecewise affine.
    pub fn affine_branches(&self) -> Option<Vec<(Vector<T>, T)>> {
        let dim = self.dim();
        let along_first = |g: T| {
            let mut v = Vector::zeros(dim);
            v[0] = g;
            v
        };
        match self {
            InitialCondition::Zero { .. } => Some(vec![(Vector::zeros(dim), T::zero())]),
            InitialCondition::Affine { slope, offset } => Some(vec![(*slope, *offset)]),
            InitialCondition::NegAbs { tilt, .. } => {
                Some(vec![(along_first(T::one() + *tilt), T::zero()), (along_first(-T::one() + *tilt), T::zero())])
            }
            InitialCondition::MinAffine { slopes, offsets } => {
                Some(slopes.iter().copied().zip(offsets.iter().copied()).collect())
            }
            InitialCondition::PiecewiseLinear { knots, values, .. } => {
                let slopes: Vec<T> =
                    knots.windows(2).zip(values.windows(2)).map(|(k, v)| (v[1] - v[0]) / (k[1] - k[0])).collect();
                // concave iff slopes are non-increasing
                if slopes.windows(2).any(|w| w[1] > w[0]) {
                    return None;
                }
                Some(slopes.iter().enumerate().map(|(i, &s)| (along_first(s), values[i] - s * knots[i])).collect())
            }
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InitialCondition::Zero { .. } => "zero",
            InitialCondition::Affine { .. } => "affine",
            InitialCondition::NegAbs { .. } => "neg-abs",
            InitialCondition::NegPower { .. } => "neg-power",
            InitialCondition::Cosine { .. } => "cosine",
            InitialCondition::PiecewiseLinear { .. } => "piecewise-linear",
            InitialCondition::MinAffine { .. } => "min-affine",
            InitialCondition::Sampled(_) => "sampled",
        }
    }
}
