//! Convex hulls of a handful of points in `R^d`, `d <= 3`.

use crate::linalg::{orthonormalize, DenseMatrix};
use crate::scalar::{lit, Real};
use crate::vector::Vector;

/// Closest point of `conv(points)` to the origin with its barycentric weights.
#[derive(Clone, Debug, PartialEq)]
pub struct MinNormPoint<T> {
    pub point: Vector<T>,
    pub weights: Vec<T>,
}

impl<T: Real> MinNormPoint<T> {
    pub fn distance(&self) -> T {
        self.point.norm()
    }
}

/// Wolfe's active-set method for `min |sum_j w_j q_j|` over the simplex.
pub fn min_norm_point<T: Real>(points: &[Vector<T>]) -> MinNormPoint<T> {
    assert!(!points.is_empty(), "min_norm_point needs at least one point");
    let k = points.len();
    let scale = points.iter().map(|q| q.norm_sq()).fold(T::zero(), T::max);
    let eps = lit::<T>(1e-13);
    let combine = |idx: &[usize], w: &[T]| {
        let mut x = Vector::zeros(points[0].dim());
        for (&i, &wi) in idx.iter().zip(w) {
            x += points[i] * wi;
        }
        x
    };

    let first = (0..k).min_by(|&a, &b| points[a].norm_sq().partial_cmp(&points[b].norm_sq()).unwrap()).unwrap();
    let mut set = vec![first];
    let mut lambda = vec![T::one()];
    let mut x = points[first];

    for _ in 0..(50 * k + 50) {
        let (j, xq) = (0..k).map(|j| (j, x.dot(&points[j]))).min_by(|a, b| a.1.partial_cmp(&b.1).unwrap()).unwrap();
        if x.norm_sq() - xq <= eps * scale || set.contains(&j) {
            break;
        }
        set.push(j);
        lambda.push(T::zero());

        loop {
            let Some(mu) = affine_minimizer(points, &set) else {
                // affinely dependent support: keep the last convex iterate
                set.pop();
                lambda.pop();
                return finish(points, &set, &lambda, k);
            };
            if mu.iter().all(|&m| m > eps) {
                lambda = mu;
                x = combine(&set, &lambda);
                break;
            }
            let mut theta = T::one();
            for (l, m) in lambda.iter().zip(&mu) {
                if *m <= eps {
                    let denom = *l - *m;
                    if denom > T::zero() {
                        theta = theta.min(*l / denom);
                    }
                }
            }
            for (l, m) in lambda.iter_mut().zip(&mu) {
                *l = *l + theta * (*m - *l);
            }
            let mut keep_set = Vec::new();
            let mut keep_lambda = Vec::new();
            for (&i, &l) in set.iter().zip(&lambda) {
                if l > eps {
                    keep_set.push(i);
                    keep_lambda.push(l);
                }
            }
            let total: T = keep_lambda.iter().copied().sum();
            set = keep_set;
            lambda = keep_lambda.into_iter().map(|l| l / total).collect();
        }
    }
    finish(points, &set, &lambda, k)
}

fn finish<T: Real>(points: &[Vector<T>], set: &[usize], lambda: &[T], k: usize) -> MinNormPoint<T> {
    let mut weights = vec![T::zero(); k];
    let mut point = Vector::zeros(points[0].dim());
    for (&i, &l) in set.iter().zip(lambda) {
        weights[i] = l;
        point += points[i] * l;
    }
    MinNormPoint { point, weights }
}

/// Minimizer of `|sum mu_i q_i|` subject to `sum mu_i = 1` over `set`.
fn affine_minimizer<T: Real>(points: &[Vector<T>], set: &[usize]) -> Option<Vec<T>> {
    let m = set.len();
    if m == 1 {
        return Some(vec![T::one()]);
    }
    let mut a = DenseMatrix::zeros(m + 1, m + 1);
    for (r, &i) in set.iter().enumerate() {
        for (c, &j) in set.iter().enumerate() {
            a[(r, c)] = points[i].dot(&points[j]);
        }
        a[(r, m)] = T::one();
        a[(m, r)] = T::one();
    }
    let mut rhs = vec![T::zero(); m + 1];
    rhs[m] = T::one();
    let sol = a.solve(&rhs)?;
    Some(sol[..m].to_vec())
}

/// Distance from `target` to `conv(points)` and the weights of the closest point.
pub fn hull_projection<T: Real>(target: &Vector<T>, points: &[Vector<T>]) -> MinNormPoint<T> {
    let shifted: Vec<Vector<T>> = points.iter().map(|q| *q - *target).collect();
    let mut r = min_norm_point(&shifted);
    r.point += *target;
    r
}

pub fn hull_distance<T: Real>(target: &Vector<T>, points: &[Vector<T>]) -> T {
    hull_projection(target, points).point.distance(target)
}

/// Orthonormal basis of the affine hull directions of `points`, relative to `points[0]`.
pub fn affine_basis<T: Real>(points: &[Vector<T>], tol: T) -> Vec<Vector<T>> {
    let mut basis: Vec<Vector<T>> = Vec::new();
    let scale = points.iter().map(|q| q.distance(&points[0])).fold(T::zero(), T::max);
    if scale == T::zero() {
        return basis;
    }
    for q in &points[1..] {
        let d = *q - points[0];
        if d.norm() <= tol * scale {
            continue;
        }
        if let Some(u) = orthonormalize(&d, &basis, tol) {
            basis.push(u);
        }
    }
    basis
}

/// Distance from `target` to the relative boundary of `conv(points)`, measured
/// within the affine hull by facet enumeration. Negative when `target` is
/// outside the hull (the value is then minus its distance to the hull). For a
/// single point (zero-dimensional hull) the result is zero.
pub fn relative_boundary_distance<T: Real>(target: &Vector<T>, points: &[Vector<T>]) -> T {
    let outside = hull_distance(target, points);
    let basis = affine_basis(points, lit(1e-10));
    let r = basis.len();
    if r == 0 {
        return -outside;
    }
    let coords = |q: &Vector<T>| -> Vec<T> {
        let d = *q - points[0];
        basis.iter().map(|b| b.dot(&d)).collect()
    };
    let pts: Vec<Vec<T>> = points.iter().map(coords).collect();
    let tgt = coords(target);
    let scale = points.iter().map(|q| q.distance(&points[0])).fold(T::zero(), T::max);
    let side_tol = lit::<T>(1e-10) * scale;

    let mut best = T::infinity();
    for subset in subsets_of_size(points.len(), r) {
        let Some(normal) = facet_normal(&pts, &subset, r) else { continue };
        let anchor = &pts[subset[0]];
        let offset = |q: &[T]| -> T { (0..r).map(|a| normal[a] * (q[a] - anchor[a])).sum() };
        let signs: Vec<T> = pts.iter().map(|q| offset(q)).collect();
        let all_le = signs.iter().all(|&s| s <= side_tol);
        let all_ge = signs.iter().all(|&s| s >= -side_tol);
        if all_le || all_ge {
            best = best.min(offset(&tgt).abs());
        }
    }
    if outside > side_tol {
        -outside
    } else {
        best
    }
}

/// Unit normal (in affine coordinates) of the hyperplane through the given points,
/// `None` when they are affinely dependent.
fn facet_normal<T: Real>(pts: &[Vec<T>], subset: &[usize], r: usize) -> Option<Vec<T>> {
    let tol = lit::<T>(1e-12);
    let diff = |a: usize, b: usize| -> Vec<T> { (0..r).map(|c| pts[subset[a]][c] - pts[subset[b]][c]).collect() };
    let n = match r {
        1 => vec![T::one()],
        2 => {
            let d = diff(1, 0);
            vec![-d[1], d[0]]
        }
        3 => {
            let a = diff(1, 0);
            let b = diff(2, 0);
            vec![a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
        }
        _ => unreachable!("affine dimension above 3"),
    };
    let norm = n.iter().map(|x| *x * *x).sum::<T>().sqrt();
    let scale = (1..subset.len()).map(|a| diff(a, 0).iter().map(|x| *x * *x).sum::<T>().sqrt()).fold(T::one(), T::max);
    (norm > tol * scale.powi(r as i32 - 1)).then(|| n.into_iter().map(|x| x / norm).collect())
}

/// All `size`-element subsets of `0..n` in lexicographic order.
pub fn subsets_of_size(n: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(size);
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, size, cur, out);
            cur.pop();
        }
    }
    rec(0, n, size, &mut cur, &mut out);
    out
}
