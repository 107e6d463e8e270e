//! Truncated singular integral operators with odd kernels on atomic
//! measures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dist2, norm, symmetric_eigen};
use crate::measure::DiscreteMeasure;
use crate::scalar::{exact_sum, lit, Real};
use crate::synth::{generate, GeneratorSpec};

/// An odd vector-valued kernel k : R^d \ {0} → R^c of order n.
pub trait Kernel<T: Real>: Send + Sync {
    fn name(&self) -> String;
    fn dim_param(&self) -> usize;
    fn ambient_dim(&self) -> usize;
    fn components(&self) -> usize;
    fn eval(&self, x: &[T], out: &mut [T]);
    /// Declared C_k with |∇^j k(x)| ≤ C_k / |x|^{n+j}, j = 0, 1, 2
    /// (Frobenius norms).
    fn constant(&self) -> T;
}

/// k(x) = (x₁, −x₂) / |x|², i.e. 1/z on C.
#[derive(Clone, Copy, Debug, Default)]
pub struct Cauchy;

impl<T: Real> Kernel<T> for Cauchy {
    fn name(&self) -> String {
        "cauchy".into()
    }
    fn dim_param(&self) -> usize {
        1
    }
    fn ambient_dim(&self) -> usize {
        2
    }
    fn components(&self) -> usize {
        2
    }
    fn eval(&self, x: &[T], out: &mut [T]) {
        let r2 = x[0] * x[0] + x[1] * x[1];
        out[0] = x[0] / r2;
        out[1] = -x[1] / r2;
    }
    fn constant(&self) -> T {
        lit(4.0)
    }
}

/// k(x) = x / |x|^{n+1} on R^d.
#[derive(Clone, Copy, Debug)]
pub struct Riesz {
    pub n: usize,
    pub d: usize,
}

impl Riesz {
    pub fn new(n: usize, d: usize) -> Result<Self> {
        if n == 0 || n >= d {
            return Err(Error::InvalidParams(format!("riesz kernel needs 0 < n < d, got n={n}, d={d}")));
        }
        Ok(Self { n, d })
    }

    /// Frobenius norms of |x|^{n+j} ∇^j k on the unit sphere.
    pub fn derivative_constants(&self) -> [f64; 3] {
        let m = (self.n + 1) as f64;
        let d = self.d as f64;
        [1.0, (d + m * m - 2.0 * m).sqrt(), m * (3.0 * d + m * m - 2.0 * m - 2.0).sqrt()]
    }
}

impl<T: Real> Kernel<T> for Riesz {
    fn name(&self) -> String {
        format!("riesz(n={},d={})", self.n, self.d)
    }
    fn dim_param(&self) -> usize {
        self.n
    }
    fn ambient_dim(&self) -> usize {
        self.d
    }
    fn components(&self) -> usize {
        self.d
    }
    fn eval(&self, x: &[T], out: &mut [T]) {
        let r = norm(x);
        let s = r.powi(self.n as i32 + 1);
        for (o, &c) in out.iter_mut().zip(x) {
            *o = c / s;
        }
    }
    fn constant(&self) -> T {
        lit(self.derivative_constants().into_iter().fold(0.0, f64::max))
    }
}

/// Parses "cauchy" or "riesz" (with the measure's n and d).
pub fn builtin_kernel<T: Real>(name: &str, n: usize, d: usize) -> Result<Box<dyn Kernel<T>>> {
    match name {
        "cauchy" => {
            if n != 1 || d != 2 {
                return Err(Error::InvalidParams("cauchy kernel requires n=1, d=2".into()));
            }
            Ok(Box::new(Cauchy))
        }
        "riesz" => Ok(Box::new(Riesz::new(n, d)?)),
        other => Err(Error::InvalidParams(format!("unknown kernel {other}"))),
    }
}

fn eval_vec<T: Real, K: Kernel<T> + ?Sized>(k: &K, x: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); k.components()];
    k.eval(x, &mut out);
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelValidation {
    pub kernel: String,
    pub samples: usize,
    /// max |k(−x) + k(x)| / |k(x)|.
    pub oddness_error: f64,
    /// max over samples of |x|^{n+j} |∇^j k(x)|, j = 0, 1, 2.
    pub measured: [f64; 3],
    pub declared: f64,
    pub odd_ok: bool,
    pub decay_ok: bool,
}

impl KernelValidation {
    pub fn passes(&self) -> bool {
        self.odd_ok && self.decay_ok
    }
}

/// Checks oddness and the decay of k, ∇k, ∇²k (central differences) on
/// random directions at log-spaced radii 10^-3..10^3.
pub fn validate_kernel<K: Kernel<f64> + ?Sized>(k: &K, directions: usize, seed: u64) -> KernelValidation {
    let d = k.ambient_dim();
    let c = k.components();
    let n = k.dim_param() as i32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut odd: f64 = 0.0;
    let mut measured = [0.0f64; 3];
    let mut samples = 0;
    let radii: Vec<f64> = (0..13).map(|i| 10f64.powf(-3.0 + 0.5 * i as f64)).collect();
    for _ in 0..directions.max(1) {
        let mut u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let un = norm(&u);
        u.iter_mut().for_each(|v| *v /= un);
        for &r in &radii {
            samples += 1;
            let x: Vec<f64> = u.iter().map(|v| v * r).collect();
            let kx = eval_vec(k, &x);
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            let kn = eval_vec(k, &neg);
            let size = norm(&kx);
            let err = kx.iter().zip(&kn).map(|(a, b)| (a + b) * (a + b)).sum::<f64>().sqrt();
            odd = odd.max(if size > 0.0 { err / size } else { err });
            measured[0] = measured[0].max(size * r.powi(n));
            let h1 = 1e-5 * r;
            let mut grad2 = 0.0;
            for i in 0..d {
                let mut p = x.clone();
                let mut q = x.clone();
                p[i] += h1;
                q[i] -= h1;
                let (kp, kq) = (eval_vec(k, &p), eval_vec(k, &q));
                for comp in 0..c {
                    let g = (kp[comp] - kq[comp]) / (2.0 * h1);
                    grad2 += g * g;
                }
            }
            measured[1] = measured[1].max(grad2.sqrt() * r.powi(n + 1));
            let h2 = 1e-3 * r;
            let mut hess2 = 0.0;
            for i in 0..d {
                for j in 0..d {
                    let shifted = |si: f64, sj: f64| {
                        let mut p = x.clone();
                        p[i] += si * h2;
                        p[j] += sj * h2;
                        eval_vec(k, &p)
                    };
                    let (pp, pm, mp, mm) = (shifted(1.0, 1.0), shifted(1.0, -1.0), shifted(-1.0, 1.0), shifted(-1.0, -1.0));
                    for comp in 0..c {
                        let h = (pp[comp] - pm[comp] - mp[comp] + mm[comp]) / (4.0 * h2 * h2);
                        hess2 += h * h;
                    }
                }
            }
            measured[2] = measured[2].max(hess2.sqrt() * r.powi(n + 2));
        }
    }
    let declared = k.constant();
    KernelValidation {
        kernel: k.name(),
        samples,
        oddness_error: odd,
        measured,
        declared,
        odd_ok: odd <= 1e-12,
        decay_ok: measured.iter().all(|&v| v <= declared * 1.05),
    }
}

fn check_kernel<T: Real, K: Kernel<T> + ?Sized>(m: &DiscreteMeasure<T>, k: &K) -> Result<()> {
    if k.ambient_dim() != m.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: m.ambient_dim(), found: k.ambient_dim() });
    }
    Ok(())
}

/// T_ε μ(x) = Σ_{|y−x|>ε} w_y k(y − x).
pub fn truncated_transform<T: Real, K: Kernel<T> + ?Sized>(m: &DiscreteMeasure<T>, k: &K, eps: T, x: &[T]) -> Result<Vec<T>> {
    check_kernel(m, k)?;
    if x.len() != m.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: m.ambient_dim(), found: x.len() });
    }
    if !(eps > T::zero()) {
        return Err(Error::InvalidParams("epsilon must be positive".into()));
    }
    let c = k.components();
    let mut terms: Vec<Vec<T>> = vec![Vec::new(); c];
    let mut buf = vec![T::zero(); c];
    let mut diff = vec![T::zero(); x.len()];
    let e2 = eps * eps;
    for (i, y) in m.points().enumerate() {
        if dist2(y, x) > e2 {
            for a in 0..x.len() {
                diff[a] = y[a] - x[a];
            }
            k.eval(&diff, &mut buf);
            for comp in 0..c {
                terms[comp].push(m.weight(i) * buf[comp]);
            }
        }
    }
    Ok(terms.iter().map(|t| exact_sum(t)).collect())
}

/// Strictly increasing positive truncation levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationGrid<T> {
    values: Vec<T>,
}

/// Grids with at most this many pairs keep every breakpoint.
pub const BREAKPOINT_PAIR_LIMIT: usize = 2_000_000;

impl<T: Real> TruncationGrid<T> {
    pub fn new(mut values: Vec<T>) -> Result<Self> {
        values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        values.dedup();
        if values.is_empty() || values.iter().any(|v| !(*v > T::zero() && v.is_finite())) {
            return Err(Error::InvalidParams("truncation grid needs positive finite values".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Half the minimal distance followed by every distinct interatomic
    /// distance below the diameter; T_ε is constant between consecutive
    /// entries.
    pub fn breakpoints(m: &DiscreteMeasure<T>) -> Result<Self> {
        let n = m.len();
        let pairs = n * n.saturating_sub(1) / 2;
        if pairs > 50 * BREAKPOINT_PAIR_LIMIT {
            return Err(Error::TooLarge { n, limit: 10_000 });
        }
        let mut d: Vec<T> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| dist2(m.point(i), m.point(j)).sqrt())
            .filter(|v| *v > T::zero())
            .collect();
        d.par_sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        d.dedup();
        let Some(&first) = d.first() else {
            return Self::new(vec![T::one()]);
        };
        d.pop();
        let mut values = vec![first / lit(2.0)];
        values.extend(d);
        Self::new(values)
    }

    /// At most `count` breakpoints chosen at evenly spaced ranks, always
    /// keeping the first.
    pub fn truncated(m: &DiscreteMeasure<T>, count: usize) -> Result<Self> {
        let full = Self::breakpoints(m)?;
        let v = full.values;
        if count == 0 {
            return Err(Error::InvalidParams("grid size must be positive".into()));
        }
        if v.len() <= count {
            return Self::new(v);
        }
        let picks = (0..count).map(|k| v[k * (v.len() - 1) / (count - 1).max(1)]).collect();
        Self::new(picks)
    }

    /// All breakpoints when the pair count allows, else 64 of them.
    pub fn auto(m: &DiscreteMeasure<T>) -> Result<Self> {
        let n = m.len();
        if n * n.saturating_sub(1) / 2 <= BREAKPOINT_PAIR_LIMIT {
            Self::breakpoints(m)
        } else {
            Self::truncated(m, 64)
        }
    }
}

/// sup over the grid of |T_ε μ(x)|.
pub fn maximal_transform<T: Real, K: Kernel<T> + ?Sized>(
    m: &DiscreteMeasure<T>,
    k: &K,
    grid: &TruncationGrid<T>,
    x: &[T],
) -> Result<T> {
    let (dists, vals) = sorted_contributions(m, k, x)?;
    let c = k.components();
    let mut best = T::zero();
    let mut acc = vec![T::zero(); c];
    let mut next = 0;
    for &eps in grid.values().iter().rev() {
        while next < dists.len() && dists[next] > eps {
            for comp in 0..c {
                acc[comp] = acc[comp] + vals[next * c + comp];
            }
            next += 1;
        }
        best = best.max(norm(&acc));
    }
    Ok(best)
}

/// sup over all ε > 0 of |T_ε μ(x)|, using the distances from x.
pub fn maximal_transform_exact<T: Real, K: Kernel<T> + ?Sized>(m: &DiscreteMeasure<T>, k: &K, x: &[T]) -> Result<T> {
    let (dists, vals) = sorted_contributions(m, k, x)?;
    let c = k.components();
    let mut best = T::zero();
    let mut acc = vec![T::zero(); c];
    for i in 0..dists.len() {
        for comp in 0..c {
            acc[comp] = acc[comp] + vals[i * c + comp];
        }
        if i + 1 == dists.len() || dists[i + 1] < dists[i] {
            best = best.max(norm(&acc));
        }
    }
    Ok(best)
}

fn sorted_contributions<T: Real, K: Kernel<T> + ?Sized>(m: &DiscreteMeasure<T>, k: &K, x: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    check_kernel(m, k)?;
    if x.len() != m.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: m.ambient_dim(), found: x.len() });
    }
    let c = k.components();
    let mut items: Vec<(T, Vec<T>)> = m
        .points()
        .enumerate()
        .filter_map(|(i, y)| {
            let r = dist2(y, x).sqrt();
            (r > T::zero()).then(|| {
                let diff: Vec<T> = y.iter().zip(x).map(|(a, b)| *a - *b).collect();
                let v = eval_vec(k, &diff).into_iter().map(|v| v * m.weight(i)).collect();
                (r, v)
            })
        })
        .collect();
    items.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let dists = items.iter().map(|t| t.0).collect();
    let mut vals = Vec::with_capacity(items.len() * c);
    for (_, v) in items {
        vals.extend(v);
    }
    Ok((dists, vals))
}

pub const OPERATOR_ATOM_LIMIT: usize = 20_000;
pub const POWER_TOLERANCE: f64 = 1e-6;
pub const POWER_MAX_ITERATIONS: usize = 5_000;

/// Upper-triangular pairs of √(w_i w_j) k(y_j − y_i), each row sorted by
/// decreasing distance so that the pairs with |y_i − y_j| > ε form a prefix.
pub struct InteractionMatrix<T> {
    n: usize,
    c: usize,
    row_start: Vec<usize>,
    cols: Vec<u32>,
    dists: Vec<T>,
    vals: Vec<T>,
}

impl<T: Real> InteractionMatrix<T> {
    pub fn build<K: Kernel<T> + ?Sized>(m: &DiscreteMeasure<T>, k: &K) -> Result<Self> {
        check_kernel(m, k)?;
        let n = m.len();
        if n > OPERATOR_ATOM_LIMIT {
            return Err(Error::TooLarge { n, limit: OPERATOR_ATOM_LIMIT });
        }
        let c = k.components();
        let rows: Vec<Vec<(T, u32, Vec<T>)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let x = m.point(i);
                let mut row: Vec<(T, u32, Vec<T>)> = (i + 1..n)
                    .filter_map(|j| {
                        let y = m.point(j);
                        let r = dist2(x, y).sqrt();
                        (r > T::zero()).then(|| {
                            let diff: Vec<T> = y.iter().zip(x).map(|(a, b)| *a - *b).collect();
                            let s = (m.weight(i) * m.weight(j)).sqrt();
                            (r, j as u32, eval_vec(k, &diff).into_iter().map(|v| v * s).collect())
                        })
                    })
                    .collect();
                row.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
                row
            })
            .collect();
        let mut row_start = Vec::with_capacity(n + 1);
        let total: usize = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(total);
        let mut dists = Vec::with_capacity(total);
        let mut vals = Vec::with_capacity(total * c);
        row_start.push(0);
        for row in rows {
            for (r, j, v) in row {
                dists.push(r);
                cols.push(j);
                vals.extend(v);
            }
            row_start.push(cols.len());
        }
        Ok(Self { n, c, row_start, cols, dists, vals })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Per-row prefix ends for pairs with distance > ε.
    pub fn active(&self, eps: T) -> Vec<usize> {
        (0..self.n)
            .map(|i| {
                let (a, b) = (self.row_start[i], self.row_start[i + 1]);
                a + self.dists[a..b].partition_point(|&d| d > eps)
            })
            .collect()
    }

    /// g = A f, stacked by component: g[comp * n + i].
    pub fn apply(&self, active: &[usize], f: &[T], g: &mut [T]) {
        let (n, c) = (self.n, self.c);
        g.iter_mut().for_each(|v| *v = T::zero());
        for i in 0..n {
            let fi = f[i];
            for e in self.row_start[i]..active[i] {
                let j = self.cols[e] as usize;
                let v = &self.vals[e * c..e * c + c];
                for comp in 0..c {
                    g[comp * n + i] = g[comp * n + i] + v[comp] * f[j];
                    g[comp * n + j] = g[comp * n + j] - v[comp] * fi;
                }
            }
        }
    }

    /// h = Aᵀ g.
    pub fn apply_transpose(&self, active: &[usize], g: &[T], h: &mut [T]) {
        let (n, c) = (self.n, self.c);
        h.iter_mut().for_each(|v| *v = T::zero());
        for i in 0..n {
            for e in self.row_start[i]..active[i] {
                let j = self.cols[e] as usize;
                let v = &self.vals[e * c..e * c + c];
                for comp in 0..c {
                    h[j] = h[j] + v[comp] * g[comp * n + i];
                    h[i] = h[i] - v[comp] * g[comp * n + j];
                }
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormEstimate<T> {
    pub eps: T,
    pub norm: T,
    pub iterations: usize,
    pub converged: bool,
}

/// Fixed start vector: all ones with a small deterministic perturbation
/// that breaks the symmetry of self-similar inputs.
fn start_vector<T: Real>(n: usize) -> Vec<T> {
    let golden = 0.618_033_988_749_894_9_f64;
    let v: Vec<T> = (0..n).map(|i| lit(1.0 + 0.1 * ((i as f64 + 1.0) * golden).fract())).collect();
    let s = norm(&v);
    v.into_iter().map(|x| x / s).collect()
}

/// Krylov subspace size per restart.
const KRYLOV: usize = 24;

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (p, q)| s + *p * *q)
}

fn tridiagonal<T: Real>(alpha: &[T], beta: &[T]) -> Vec<T> {
    let k = alpha.len();
    let mut t = vec![T::zero(); k * k];
    for i in 0..k {
        t[i * k + i] = alpha[i];
        if i + 1 < k {
            t[i * k + i + 1] = beta[i];
            t[(i + 1) * k + i] = beta[i];
        }
    }
    t
}

/// Top Ritz value of the Lanczos tridiagonal and the last component of its
/// eigenvector.
fn top_ritz<T: Real>(alpha: &[T], beta: &[T]) -> (T, T) {
    let k = alpha.len();
    let (vals, vecs) = symmetric_eigen(&tridiagonal(alpha, beta), k);
    (vals[k - 1], vecs[k - 1][k - 1])
}

/// Largest eigenpair of AᵀA by explicitly restarted Lanczos with full
/// reorthogonalization, each cycle restarted from the top Ritz vector. Stops
/// once ‖AᵀAu − λu‖ ≤ tol·λ for the Ritz pair (λ, u); `iterations` counts
/// products with AᵀA.
fn power_iteration<T: Real>(a: &InteractionMatrix<T>, eps: T, start: &[T]) -> (NormEstimate<T>, Vec<T>) {
    let n = a.len();
    let active = a.active(eps);
    let mut g = vec![T::zero(); n * a.c];
    let products = std::cell::Cell::new(0usize);
    let mut normal = |v: &[T]| {
        let mut h = vec![T::zero(); n];
        a.apply(&active, v, &mut g);
        a.apply_transpose(&active, &g, &mut h);
        products.set(products.get() + 1);
        h
    };
    let s0 = norm(start);
    let mut u: Vec<T> = start.iter().map(|x| *x / s0).collect();
    let tol = lit::<T>(POWER_TOLERANCE);
    let mut lambda = T::zero();
    let done = |lambda: T, it: usize, converged: bool| NormEstimate {
        eps,
        norm: lambda.max(T::zero()).sqrt(),
        iterations: it,
        converged,
    };
    while products.get() < POWER_MAX_ITERATIONS {
        let mut basis: Vec<Vec<T>> = vec![u.clone()];
        let mut alpha: Vec<T> = Vec::new();
        let mut beta: Vec<T> = Vec::new();
        let mut au: Option<Vec<T>> = None;
        for j in 0..KRYLOV.min(n) {
            let mut w = normal(&basis[j]);
            if j == 0 {
                au = Some(w.clone());
            }
            alpha.push(dot(&basis[j], &w));
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &w);
                    w.iter_mut().zip(v).for_each(|(x, y)| *x = *x - c * *y);
                }
            }
            let b = norm(&w);
            let scale = alpha[0].abs().max(T::min_positive_value());
            if !(b > lit::<T>(1e-12) * scale) || j + 1 == KRYLOV.min(n) {
                break;
            }
            let (theta, last) = top_ritz(&alpha, &beta);
            if theta > T::zero() && b * last.abs() <= lit::<T>(0.1) * tol * theta {
                break;
            }
            beta.push(b);
            basis.push(w.into_iter().map(|x| x / b).collect());
        }
        let (theta, _) = top_ritz(&alpha, &beta);
        if !(theta > T::zero()) && au.as_deref().map_or(true, |v| norm(v) == T::zero()) {
            return (done(T::zero(), products.get(), true), u);
        }
        let k = alpha.len();
        let (_, vecs) = symmetric_eigen(&tridiagonal(&alpha, &beta), k);
        let mut next = vec![T::zero(); n];
        for (v, c) in basis.iter().zip(&vecs[k - 1]) {
            next.iter_mut().zip(v).for_each(|(x, y)| *x = *x + *c * *y);
        }
        let s = norm(&next);
        next.iter_mut().for_each(|x| *x = *x / s);
        u = next;
        let h = normal(&u);
        lambda = dot(&u, &h);
        if !(lambda > T::zero()) {
            return (done(T::zero(), products.get(), true), u);
        }
        let residual = u.iter().zip(&h).fold(T::zero(), |s, (p, q)| s + (*q - lambda * *p).powi(2)).sqrt();
        if residual <= tol * lambda {
            return (done(lambda, products.get(), true), u);
        }
    }
    (done(lambda, products.get(), false), u)
}

/// ‖T_{μ,ε}‖ on L²(μ) from the top eigenvalue of AᵀA.
pub fn operator_norm<T: Real, K: Kernel<T> + ?Sized>(m: &DiscreteMeasure<T>, k: &K, eps: T) -> Result<NormEstimate<T>> {
    if !(eps > T::zero()) {
        return Err(Error::InvalidParams("epsilon must be positive".into()));
    }
    let a = InteractionMatrix::build(m, k)?;
    Ok(power_iteration(&a, eps, &start_vector(m.len())).0)
}

/// Norms for every grid value, ascending in ε, each from the fixed start.
pub fn operator_norms<T: Real, K: Kernel<T> + ?Sized>(
    m: &DiscreteMeasure<T>,
    k: &K,
    grid: &TruncationGrid<T>,
) -> Result<Vec<NormEstimate<T>>> {
    let a = InteractionMatrix::build(m, k)?;
    let start = start_vector::<T>(m.len());
    Ok(grid.values().iter().map(|&eps| power_iteration(&a, eps, &start).0).collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormRow<T> {
    pub label: String,
    pub atoms: usize,
    pub sup_norm: T,
    pub eps_at_sup: T,
    pub grid_size: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormTable<T> {
    pub kernel: String,
    pub rows: Vec<NormRow<T>>,
    pub strictly_increasing: bool,
    pub max_over_min: T,
}

/// Sup-over-grid norms for each generated measure; grids keep at most
/// `grid_limit` breakpoints.
pub fn norm_vs_generation<T: Real, K: Kernel<T> + ?Sized>(
    specs: &[GeneratorSpec],
    k: &K,
    grid_limit: usize,
) -> Result<NormTable<T>> {
    let mut rows = Vec::new();
    for spec in specs {
        let g = generate::<T>(spec)?;
        let grid = TruncationGrid::truncated(&g.measure, grid_limit)?;
        let norms = operator_norms(&g.measure, k, &grid)?;
        let best = norms
            .iter()
            .fold(None::<&NormEstimate<T>>, |b, e| match b {
                Some(b) if b.norm >= e.norm => Some(b),
                _ => Some(e),
            })
            .expect("grid is non-empty");
        rows.push(NormRow {
            label: serde_json::to_string(spec).unwrap_or_default(),
            atoms: g.measure.len(),
            sup_norm: best.norm,
            eps_at_sup: best.eps,
            grid_size: grid.values().len(),
            converged: norms.iter().all(|e| e.converged),
        });
    }
    let strictly_increasing = rows.windows(2).all(|w| w[1].sup_norm > w[0].sup_norm);
    let (lo, hi) = rows
        .iter()
        .fold((T::infinity(), T::zero()), |(lo, hi), r| (lo.min(r.sup_norm), hi.max(r.sup_norm)));
    let max_over_min = if rows.is_empty() { T::one() } else { hi / lo };
    Ok(NormTable { kernel: k.name(), rows, strictly_increasing, max_over_min })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        let mut out = [0.0; 2];
        Kernel::<f64>::eval(&Cauchy, &[1.0, 0.0], &mut out);
        assert_eq!(out, [1.0, 0.0]);
        Kernel::<f64>::eval(&Riesz::new(1, 2).unwrap(), &[0.0, 2.0], &mut out);
        assert_eq!(out, [0.0, 0.5]);
    }

    #[test]
    fn builtins_validate() {
        let c = validate_kernel(&Cauchy, 20, 1);
        assert!(c.passes(), "{c:?}");
        assert!((c.measured[2] - 4.0).abs() < 1e-3);
        let r = validate_kernel(&Riesz::new(2, 3).unwrap(), 20, 1);
        assert!(r.passes(), "{r:?}");
    }

    #[test]
    fn two_atom_norm() {
        let m = DiscreteMeasure::new(&[vec![0.0, 0.0], vec![1.0, 0.0]], vec![0.5, 0.5], 1).unwrap();
        let e: NormEstimate<f64> = operator_norm(&m, &Cauchy, 0.5).unwrap();
        assert!((e.norm - 0.5).abs() < 1e-9);
        assert!(operator_norm(&m, &Cauchy, 1.0).unwrap().norm == 0.0);
    }
}
