//! Smallest enclosing ball of a finite point set (Welzl's recursion).

use crate::linalg::DenseMatrix;
use crate::scalar::{lit, Real};
use crate::vector::Vector;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ball<T> {
    pub center: Vector<T>,
    pub radius: T,
}

impl<T: Real> Ball<T> {
    pub fn contains(&self, q: &Vector<T>, slack: T) -> bool {
        q.distance(&self.center) <= self.radius + slack
    }
}

/// Smallest ball through all points of `support` (they lie on its sphere);
/// `None` for affinely dependent supports.
pub fn circumball<T: Real>(support: &[Vector<T>]) -> Option<Ball<T>> {
    let m = support.len();
    let base = support[0];
    if m == 1 {
        return Some(Ball { center: base, radius: T::zero() });
    }
    // center = base + sum_i a_i d_i with 2 d_i . d_j a_j = |d_i|^2
    let d: Vec<Vector<T>> = support[1..].iter().map(|q| *q - base).collect();
    let mut a = DenseMatrix::zeros(m - 1, m - 1);
    let mut rhs = vec![T::zero(); m - 1];
    for i in 0..m - 1 {
        for j in 0..m - 1 {
            a[(i, j)] = lit::<T>(2.0) * d[i].dot(&d[j]);
        }
        rhs[i] = d[i].norm_sq();
    }
    let coef = a.solve(&rhs)?;
    let mut center = base;
    for (di, ci) in d.iter().zip(&coef) {
        center += *di * *ci;
    }
    let radius = support.iter().map(|q| q.distance(&center)).fold(T::zero(), T::max);
    Some(Ball { center, radius })
}

/// Ball with every point of `support` on its sphere; for affinely dependent
/// supports, the smallest ball containing them, found over sub-supports.
fn ball_of_support<T: Real>(support: &[Vector<T>]) -> Ball<T> {
    if let Some(b) = circumball(support) {
        return b;
    }
    let slack = slack_for(support);
    let mut best: Option<Ball<T>> = None;
    let m = support.len();
    for mask in 1u32..(1 << m) {
        let sub: Vec<Vector<T>> = (0..m).filter(|i| mask & (1 << i) != 0).map(|i| support[i]).collect();
        if let Some(b) = circumball(&sub) {
            if support.iter().all(|q| b.contains(q, slack)) && best.is_none_or(|c| b.radius < c.radius) {
                best = Some(b);
            }
        }
    }
    best.expect("a pair of extreme points always encloses a degenerate support")
}

fn slack_for<T: Real>(points: &[Vector<T>]) -> T {
    let scale = points.iter().map(|q| q.max_abs()).fold(T::one(), T::max);
    lit::<T>(1e-12) * scale
}

/// Smallest enclosing ball of `points`.
pub fn min_enclosing_ball<T: Real>(points: &[Vector<T>]) -> Ball<T> {
    assert!(!points.is_empty(), "min_enclosing_ball needs at least one point");
    let dim = points[0].dim();
    let slack = slack_for(points);
    let mut boundary = Vec::with_capacity(dim + 1);
    welzl(points, points.len(), &mut boundary, dim, slack)
}

fn welzl<T: Real>(points: &[Vector<T>], n: usize, boundary: &mut Vec<Vector<T>>, dim: usize, slack: T) -> Ball<T> {
    if n == 0 || boundary.len() == dim + 1 {
        return if boundary.is_empty() {
            Ball { center: points[0], radius: T::zero() }
        } else {
            ball_of_support(boundary)
        };
    }
    let q = points[n - 1];
    let ball = welzl(points, n - 1, boundary, dim, slack);
    if ball.contains(&q, slack) {
        return ball;
    }
    boundary.push(q);
    let ball = welzl(points, n - 1, boundary, dim, slack);
    boundary.pop();
    ball
}
