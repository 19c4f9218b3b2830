#![allow(dead_code)]

//! Test-side oracles. Nothing here calls into the solver or the linear
//! algebra of the crate under test.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Row-major random Gaussian design and response `X b + noise`, both
/// column-centered.
pub fn random_problem(rng: &mut ChaCha8Rng, n: usize, p: usize, sparsity: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let beta: Vec<f64> = (0..p)
        .map(|j| if j < sparsity { rng.random_range(-2.0..2.0) } else { 0.0 })
        .collect();
    let mut y: Vec<f64> = x
        .iter()
        .map(|r| r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + rng.sample::<f64, _>(StandardNormal))
        .collect();
    center(&mut x, &mut y);
    (x, y)
}

pub fn center(x: &mut [Vec<f64>], y: &mut [f64]) {
    let n = x.len() as f64;
    let p = x[0].len();
    for j in 0..p {
        let m = x.iter().map(|r| r[j]).sum::<f64>() / n;
        x.iter_mut().for_each(|r| r[j] -= m);
    }
    let m = y.iter().sum::<f64>() / n;
    y.iter_mut().for_each(|v| *v -= m);
}

pub fn soft(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Largest eigenvalue of `X' diag(w) X` by power iteration.
fn top_eigenvalue(x: &[Vec<f64>], w: &[f64]) -> f64 {
    let p = x[0].len();
    let mut v = vec![1.0 / (p as f64).sqrt(); p];
    let mut lam = 0.0;
    for _ in 0..500 {
        let xv: Vec<f64> = x.iter().map(|r| r.iter().zip(&v).map(|(a, b)| a * b).sum()).collect();
        let mut u = vec![0.0; p];
        for (i, r) in x.iter().enumerate() {
            for j in 0..p {
                u[j] += w[i] * r[j] * xv[i];
            }
        }
        let norm = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lam = norm;
        v = u.into_iter().map(|a| a / norm).collect();
    }
    lam
}

/// Objective `sum_i w_i (y_i - x_i'b)^2 + lambda sum_j v_j |b_j|`.
pub fn objective(x: &[Vec<f64>], y: &[f64], w: &[f64], v: &[f64], lambda: f64, b: &[f64]) -> f64 {
    let loss: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((r, yi), wi)| wi * (yi - r.iter().zip(b).map(|(a, c)| a * c).sum::<f64>()).powi(2))
        .sum();
    loss + lambda * b.iter().zip(v).map(|(a, c)| c * a.abs()).sum::<f64>()
}

/// Accelerated proximal gradient with adaptive restart, iterated to a
/// fixed point.
pub fn fista(x: &[Vec<f64>], y: &[f64], w: &[f64], v: &[f64], lambda: f64) -> Vec<f64> {
    let p = x[0].len();
    let step = 1.0 / (2.0 * top_eigenvalue(x, w) * 1.01);
    let grad = |b: &[f64]| -> Vec<f64> {
        let mut g = vec![0.0; p];
        for (i, r) in x.iter().enumerate() {
            let res = y[i] - r.iter().zip(b).map(|(a, c)| a * c).sum::<f64>();
            for j in 0..p {
                g[j] -= 2.0 * w[i] * r[j] * res;
            }
        }
        g
    };
    let mut b = vec![0.0; p];
    let mut z = b.clone();
    let mut t = 1.0f64;
    for _ in 0..2_000_000 {
        let g = grad(&z);
        let next: Vec<f64> = (0..p)
            .map(|j| soft(z[j] - step * g[j], step * lambda * v[j]))
            .collect();
        let change = next.iter().zip(&b).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
        // restart momentum when it points uphill
        let uphill: f64 = (0..p).map(|j| (z[j] - next[j]) * (next[j] - b[j])).sum();
        let t_next = if uphill > 0.0 { 1.0 } else { (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0 };
        z = (0..p)
            .map(|j| next[j] + (t - 1.0) / t_next * (next[j] - b[j]))
            .collect();
        if uphill > 0.0 {
            z = next.clone();
        }
        t = t_next;
        b = next;
        if change < 1e-14 {
            break;
        }
    }
    b
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
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

/// Exact standard LASSO `||y - Xb||^2 + lambda ||b||_1` by enumerating
/// every sign pattern and keeping the one that satisfies the optimality
/// conditions. Only for small `p`.
pub fn lasso_by_enumeration(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Vec<f64> {
    let p = x[0].len();
    let xty: Vec<f64> = (0..p).map(|j| x.iter().zip(y).map(|(r, yi)| r[j] * yi).sum()).collect();
    let gram: Vec<Vec<f64>> = (0..p)
        .map(|a| (0..p).map(|b| x.iter().map(|r| r[a] * r[b]).sum()).collect())
        .collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for code in 0..3usize.pow(p as u32) {
        let mut c = code;
        let signs: Vec<i32> = (0..p)
            .map(|_| {
                let s = (c % 3) as i32 - 1;
                c /= 3;
                s
            })
            .collect();
        let act: Vec<usize> = (0..p).filter(|&j| signs[j] != 0).collect();
        let mut b = vec![0.0; p];
        if !act.is_empty() {
            let a: Vec<Vec<f64>> = act.iter().map(|&i| act.iter().map(|&j| gram[i][j]).collect()).collect();
            let rhs: Vec<f64> = act.iter().map(|&j| xty[j] - lambda / 2.0 * signs[j] as f64).collect();
            let Some(sol) = gauss_solve(a, rhs) else { continue };
            if act.iter().zip(&sol).any(|(&j, v)| v * signs[j] as f64 <= 0.0) {
                continue;
            }
            for (k, &j) in act.iter().enumerate() {
                b[j] = sol[k];
            }
        }
        let ok = (0..p).filter(|&j| signs[j] == 0).all(|j| {
            let g: f64 = xty[j] - (0..p).map(|k| gram[j][k] * b[k]).sum::<f64>();
            2.0 * g.abs() <= lambda * (1.0 + 1e-9) + 1e-9
        });
        if ok {
            let f = objective(x, y, &vec![1.0; x.len()], &vec![1.0; p], lambda, &b);
            if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                best = Some((f, b));
            }
        }
    }
    best.expect("some sign pattern is optimal").1
}

/// Exact `1/2 * integral |F_a - F_b|` over `[lo, hi]` for two ecdfs.
pub fn half_l1_exact(a: &[f64], b: &[f64], lo: f64, hi: f64) -> f64 {
    let cdf = |s: &[f64], t: f64| s.iter().filter(|&&v| v <= t).count() as f64 / s.len() as f64;
    let mut knots: Vec<f64> = a.iter().chain(b).copied().filter(|&t| t > lo && t < hi).collect();
    knots.push(lo);
    knots.push(hi);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    knots
        .windows(2)
        .map(|w| (w[1] - w[0]) * (cdf(a, w[0]) - cdf(b, w[0])).abs())
        .sum::<f64>()
        / 2.0
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-22 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// Weighted least squares on all columns via the normal equations.
pub fn weighted_ols(x: &[Vec<f64>], y: &[f64], w: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let a: Vec<Vec<f64>> = (0..p)
        .map(|r| (0..p).map(|c| x.iter().zip(w).map(|(row, wi)| wi * row[r] * row[c]).sum()).collect())
        .collect();
    let b: Vec<f64> = (0..p).map(|r| x.iter().zip(y).zip(w).map(|((row, yi), wi)| wi * row[r] * yi).sum()).collect();
    gauss_solve(a, b).expect("full rank")
}
