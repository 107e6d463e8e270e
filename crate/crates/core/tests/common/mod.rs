//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` atoms uniform in [0,1]^d with weights in [0.5, 1.5).
pub fn random_cloud(n: usize, d: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut r = rng(seed);
    let pts = (0..n).map(|_| (0..d).map(|_| r.gen::<f64>()).collect()).collect();
    let w = (0..n).map(|_| 0.5 + r.gen::<f64>()).collect();
    (pts, w)
}

/// Distance from `y − x` to the line spanned by the unit vector `v`.
pub fn dist_to_line(diff: &[f64], v: &[f64]) -> f64 {
    let t: f64 = diff.iter().zip(v).map(|(a, b)| a * b).sum();
    diff.iter().zip(v).map(|(a, b)| (a - t * b).powi(2)).sum::<f64>().sqrt()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn unit(angle: f64) -> Vec<f64> {
    vec![angle.cos(), angle.sin()]
}

/// In-cone distances and weights seen from `x` along the line `v`.
pub fn cone_hits(pts: &[Vec<f64>], w: &[f64], x: &[f64], v: &[f64], alpha: f64) -> Vec<(f64, f64)> {
    let mut hits: Vec<(f64, f64)> = pts
        .iter()
        .zip(w)
        .filter_map(|(y, &wy)| {
            let diff: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
            let rho = norm(&diff);
            (rho > 0.0 && dist_to_line(&diff, v) < alpha * rho).then_some((rho, wy))
        })
        .collect();
    hits.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    hits
}

/// Composite Simpson rule on `m` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for k in 1..m {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// ∫_a^b (μ(K(x,r))/r^n)^p dr/r by Simpson quadrature in log r, split at the
/// jump radii so that every piece is smooth.
pub fn energy_quadrature(hits: &[(f64, f64)], n: i32, p: f64, a: f64, b: f64) -> f64 {
    let mut knots: Vec<f64> = hits.iter().map(|h| h.0).filter(|&r| r > a && r < b).collect();
    knots.insert(0, a.max(1e-300));
    let top = if b.is_finite() { b } else { hits.last().map_or(1.0, |h| h.0) * 1e12 };
    knots.push(top);
    let mass = |r: f64| hits.iter().filter(|h| h.0 < r).map(|h| h.1).sum::<f64>();
    let mut total = 0.0;
    for win in knots.windows(2) {
        let (lo, hi) = (win[0], win[1]);
        if hi <= lo {
            continue;
        }
        let c = mass(0.5 * (lo + hi));
        if c == 0.0 {
            continue;
        }
        total += simpson(|t: f64| (c / t.exp().powi(n)).powf(p), lo.ln(), hi.ln(), 2000);
    }
    total
}

/// Eigenvalues of a symmetric matrix (row-major, n×n) by cyclic Jacobi.
pub fn jacobi_eigenvalues(mut a: Vec<f64>, n: usize) -> Vec<f64> {
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i * n + j].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}
