//! Fixed-capacity vectors of dimension 1 to 3.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::scalar::{to_f64, Real};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// A stack-allocated vector in `R^d`, `1 <= d <= 3`.
#[derive(Clone, Copy, PartialEq)]
pub struct Vector<T> {
    data: [T; MAX_DIM],
    dim: usize,
}

impl<T: Real> Vector<T> {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} out of range 1..=3");
        Self { data: [T::zero(); MAX_DIM], dim }
    }

    pub fn from_slice(xs: &[T]) -> Self {
        let mut v = Self::zeros(xs.len());
        v.data[..xs.len()].copy_from_slice(xs);
        v
    }

    pub fn from_f64(xs: &[f64]) -> Self {
        let mut v = Self::zeros(xs.len());
        for (slot, &x) in v.data.iter_mut().zip(xs) {
            *slot = crate::scalar::lit(x);
        }
        v
    }

    pub fn scalar(x: T) -> Self {
        Self::from_slice(&[x])
    }

    /// Unit vector along `axis`.
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut v = Self::zeros(dim);
        v[axis] = T::one();
        v
    }

    pub fn filled(dim: usize, x: T) -> Self {
        let mut v = Self::zeros(dim);
        v.data[..dim].fill(x);
        v
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data[..self.dim]
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data[..self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.as_slice().iter()
    }

    #[inline]
    pub fn dot(&self, other: &Self) -> T {
        debug_assert_eq!(self.dim, other.dim);
        let mut acc = T::zero();
        for k in 0..self.dim {
            acc = acc + self.data[k] * other.data[k];
        }
        acc
    }

    #[inline]
    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    /// Max-norm.
    pub fn max_abs(&self) -> T {
        self.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    #[inline]
    pub fn distance(&self, other: &Self) -> T {
        (*self - *other).norm()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        let mut out = *self;
        for x in out.as_mut_slice() {
            *x = f(*x);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.iter().map(|&x| to_f64(x)).collect()
    }
}

impl<T: Real> Index<usize> for Vector<T> {
    type Output = T;
    #[inline]
    fn index(&self, k: usize) -> &T {
        debug_assert!(k < self.dim);
        &self.data[k]
    }
}

impl<T: Real> IndexMut<usize> for Vector<T> {
    #[inline]
    fn index_mut(&mut self, k: usize) -> &mut T {
        debug_assert!(k < self.dim);
        &mut self.data[k]
    }
}

impl<T: Real> Add for Vector<T> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<T: Real> AddAssign for Vector<T> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        debug_assert_eq!(self.dim, rhs.dim);
        for k in 0..self.dim {
            self.data[k] = self.data[k] + rhs.data[k];
        }
    }
}

impl<T: Real> Sub for Vector<T> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl<T: Real> SubAssign for Vector<T> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        debug_assert_eq!(self.dim, rhs.dim);
        for k in 0..self.dim {
            self.data[k] = self.data[k] - rhs.data[k];
        }
    }
}

impl<T: Real> Neg for Vector<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.map(|x| -x)
    }
}

impl<T: Real> Mul<T> for Vector<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        self.map(|x| x * s)
    }
}

impl<T: Real> Div<T> for Vector<T> {
    type Output = Self;
    #[inline]
    fn div(self, s: T) -> Self {
        self.map(|x| x / s)
    }
}

impl<T: fmt::Debug> fmt::Debug for Vector<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.data[..self.dim]).finish()
    }
}

impl<T: fmt::Display> fmt::Display for Vector<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, x) in self.data[..self.dim].iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}
