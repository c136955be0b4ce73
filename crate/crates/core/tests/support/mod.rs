//! Reference computations shared by the integration tests. They use plain
//! `f64` slices and nothing from the crate beyond the vector type.

#![allow(dead_code, clippy::needless_range_loop)]

use shockflow_core::vector::Vector;

/// Gaussian elimination with partial pivoting on a dense row-major system.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Centre of the smallest sphere through `support`, inside its affine hull.
pub fn circumcenter(support: &[Vec<f64>]) -> Option<Vec<f64>> {
    let base = &support[0];
    let m = support.len() - 1;
    if m == 0 {
        return Some(base.clone());
    }
    let diffs: Vec<Vec<f64>> = support[1..].iter().map(|q| q.iter().zip(base).map(|(a, b)| a - b).collect()).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let gram: Vec<Vec<f64>> = diffs.iter().map(|a| diffs.iter().map(|b| 2.0 * dot(a, b)).collect()).collect();
    let rhs: Vec<f64> = diffs.iter().map(|a| dot(a, a)).collect();
    let lambda = gauss_solve(gram, rhs)?;
    let mut c = base.clone();
    for (l, d) in lambda.iter().zip(&diffs) {
        for (ci, di) in c.iter_mut().zip(d) {
            *ci += l * di;
        }
    }
    Some(c)
}

/// Smallest enclosing ball by enumerating every support set of size up to `d + 1`.
pub fn meb_by_enumeration(points: &[Vector<f64>]) -> (Vec<f64>, f64) {
    let pts: Vec<Vec<f64>> = points.iter().map(|p| p.as_slice().to_vec()).collect();
    let d = pts[0].len();
    let n = pts.len();
    let scale = pts.iter().map(|p| p.iter().map(|x| x.abs()).fold(0.0, f64::max)).fold(1.0, f64::max);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for mask in 1u32..(1 << n) {
        if mask.count_ones() as usize > d + 1 {
            continue;
        }
        let support: Vec<Vec<f64>> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| pts[i].clone()).collect();
        let Some(c) = circumcenter(&support) else { continue };
        let r = dist(&c, &support[0]);
        if pts.iter().all(|p| dist(p, &c) <= r + 1e-10 * scale) && best.as_ref().is_none_or(|b| r < b.1) {
            best = Some((c, r));
        }
    }
    best.expect("some support set encloses the points")
}
