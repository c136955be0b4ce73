//! Dense linear algebra for the tiny systems that appear in shock analysis
//! (at most `d + k <= 11` unknowns).

use crate::scalar::Real;
use crate::vector::{Vector, MAX_DIM};

/// Square matrix of size `dim <= 3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallMatrix<T> {
    data: [[T; MAX_DIM]; MAX_DIM],
    dim: usize,
}

impl<T: Real> SmallMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim));
        Self { data: [[T::zero(); MAX_DIM]; MAX_DIM], dim }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&Vector::filled(dim, T::one()))
    }

    pub fn diagonal(d: &Vector<T>) -> Self {
        let mut m = Self::zeros(d.dim());
        for k in 0..d.dim() {
            m.data[k][k] = d[k];
        }
        m
    }

    /// Builds from row-major entries; `entries.len()` must be a square of 1, 2 or 3.
    pub fn from_row_major(entries: &[T]) -> Option<Self> {
        let dim = match entries.len() {
            1 => 1,
            4 => 2,
            9 => 3,
            _ => return None,
        };
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i][j] = entries[i * dim + j];
            }
        }
        Some(m)
    }

    /// `a a^T` for a vector `a`.
    pub fn outer(a: &Vector<T>) -> Self {
        let mut m = Self::zeros(a.dim());
        for i in 0..a.dim() {
            for j in 0..a.dim() {
                m.data[i][j] = a[i] * a[j];
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i][j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, x: T) {
        self.data[i][j] = x;
    }

    pub fn mul_vec(&self, v: &Vector<T>) -> Vector<T> {
        debug_assert_eq!(self.dim, v.dim());
        let mut out = Vector::zeros(self.dim);
        for i in 0..self.dim {
            let mut acc = T::zero();
            for j in 0..self.dim {
                acc = acc + self.data[i][j] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn quadratic_form(&self, v: &Vector<T>) -> T {
        v.dot(&self.mul_vec(v))
    }

    pub fn scaled(&self, s: T) -> Self {
        let mut m = *self;
        for row in m.data.iter_mut().take(self.dim) {
            for x in row.iter_mut().take(self.dim) {
                *x = *x * s;
            }
        }
        m
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut m = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.data[i][j] = m.data[i][j] + other.data[i][j];
            }
        }
        m
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| (self.data[i][j] - self.data[j][i]).abs() <= tol))
    }

    /// Frobenius norm, an upper bound of the spectral norm.
    pub fn frobenius(&self) -> T {
        let mut acc = T::zero();
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc = acc + self.data[i][j] * self.data[i][j];
            }
        }
        acc.sqrt()
    }

    /// Lower Cholesky factor; `None` unless symmetric positive definite.
    pub fn cholesky(&self) -> Option<Self> {
        let n = self.dim;
        let mut l = Self::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.data[i][j];
                for k in 0..j {
                    s = s - l.data[i][k] * l.data[j][k];
                }
                if i == j {
                    if s <= T::zero() || !s.is_finite() {
                        return None;
                    }
                    l.data[i][i] = s.sqrt();
                } else {
                    l.data[i][j] = s / l.data[j][j];
                }
            }
        }
        Some(l)
    }

    /// Solves `L y = b` for lower-triangular `self`.
    pub fn forward_substitute(&self, b: &Vector<T>) -> Vector<T> {
        let mut y = *b;
        for i in 0..self.dim {
            let mut s = y[i];
            for k in 0..i {
                s = s - self.data[i][k] * y[k];
            }
            y[i] = s / self.data[i][i];
        }
        y
    }

    pub fn solve(&self, b: &Vector<T>) -> Option<Vector<T>> {
        let n = self.dim;
        let mut a = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = self.data[i][j];
            }
        }
        let x = a.solve(b.as_slice())?;
        Some(Vector::from_slice(&x))
    }

    pub fn inverse(&self) -> Option<Self> {
        let n = self.dim;
        let mut inv = Self::zeros(n);
        for j in 0..n {
            let col = self.solve(&Vector::unit(n, j))?;
            for i in 0..n {
                inv.data[i][j] = col[i];
            }
        }
        Some(inv)
    }
}

/// Row-major dense matrix with heap storage.
#[derive(Clone, Debug)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.rows).map(|i| (0..self.cols).map(|j| self[(i, j)] * x[j]).sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                out[(i, j)] = (0..self.cols).map(|k| self[(i, k)] * other[(k, j)]).sum();
            }
        }
        out
    }

    /// Gaussian elimination with partial pivoting. Returns `None` when the
    /// matrix is numerically singular relative to its largest entry.
    pub fn solve(&self, b: &[T]) -> Option<Vec<T>> {
        assert_eq!(self.rows, self.cols);
        assert_eq!(b.len(), self.rows);
        let n = self.rows;
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        if scale == T::zero() || !scale.is_finite() {
            return None;
        }
        let eps = T::epsilon() * crate::scalar::lit(64.0) * scale;
        for col in 0..n {
            let pivot =
                (col..n).max_by(|&i, &j| a[i * n + col].abs().partial_cmp(&a[j * n + col].abs()).unwrap()).unwrap();
            if a[pivot * n + col].abs() <= eps {
                return None;
            }
            if pivot != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot * n + j);
                }
                x.swap(col, pivot);
            }
            let d = a[col * n + col];
            for i in col + 1..n {
                let f = a[i * n + col] / d;
                if f == T::zero() {
                    continue;
                }
                for j in col..n {
                    a[i * n + j] = a[i * n + j] - f * a[col * n + j];
                }
                x[i] = x[i] - f * x[col];
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s = s - a[i * n + j] * x[j];
            }
            x[i] = s / a[i * n + i];
        }
        x.iter().all(|v| v.is_finite()).then_some(x)
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Orthonormal basis of the null space of the rows `rows` (each of length `dim`).
/// Computed by Gram-Schmidt on the row space followed by completion with unit vectors.
pub fn null_space_basis<T: Real>(rows: &[Vector<T>], dim: usize) -> Vec<Vector<T>> {
    let tol = crate::scalar::lit::<T>(1e-10);
    let mut row_basis: Vec<Vector<T>> = Vec::new();
    for r in rows {
        if let Some(u) = orthonormalize(r, &row_basis, tol) {
            row_basis.push(u);
        }
    }
    let mut null = Vec::new();
    for axis in 0..dim {
        let e = Vector::unit(dim, axis);
        let mut all = row_basis.clone();
        all.extend(null.iter().copied());
        if let Some(u) = orthonormalize(&e, &all, tol) {
            null.push(u);
        }
        if row_basis.len() + null.len() == dim {
            break;
        }
    }
    null
}

/// Gram-Schmidt step; `None` when `v` lies in the span of `basis` (relative tolerance).
pub fn orthonormalize<T: Real>(v: &Vector<T>, basis: &[Vector<T>], tol: T) -> Option<Vector<T>> {
    let scale = v.norm();
    if scale == T::zero() {
        return None;
    }
    let mut u = *v;
    for _ in 0..2 {
        for b in basis {
            u = u - *b * u.dot(b);
        }
    }
    let n = u.norm();
    (n > tol * scale).then(|| u / n)
}
