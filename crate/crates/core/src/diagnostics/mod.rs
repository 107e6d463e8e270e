//! β₂ numbers, tangent-plane convergence, conical density profiles and the
//! checks around big pieces of Lipschitz graphs.

pub mod bplg;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Cone, Plane};
use crate::linalg::{dist, dist2, symmetric_eigen};
use crate::measure::DiscreteMeasure;
use crate::scalar::{from_usize, lit, pairwise_sum, Real};

pub use bplg::*;

/// Affine plane `point + plane`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct AffinePlane<T> {
    pub point: Vec<T>,
    pub plane: Plane<T>,
}

impl<T: Real> AffinePlane<T> {
    pub fn new(point: Vec<T>, plane: Plane<T>) -> Result<Self> {
        if point.len() != plane.ambient_dim() {
            return Err(Error::DimensionMismatch { expected: plane.ambient_dim(), found: point.len() });
        }
        Ok(Self { point, plane })
    }

    pub fn dist(&self, y: &[T]) -> T {
        let diff: Vec<T> = y.iter().zip(&self.point).map(|(a, b)| *a - *b).collect();
        self.plane.perp_dist2(&diff).sqrt()
    }

    /// Closest point of the plane to `y`.
    pub fn foot(&self, y: &[T]) -> Vec<T> {
        let diff: Vec<T> = y.iter().zip(&self.point).map(|(a, b)| *a - *b).collect();
        let along = self.plane.proj(&diff);
        self.point.iter().zip(&along).map(|(a, b)| *a + *b).collect()
    }

    /// The disk (center, radius) cut out of the closed ball B̄(x, r).
    pub fn ball_section(&self, x: &[T], r: T) -> Option<(Vec<T>, T)> {
        let c = self.foot(x);
        let h2 = dist2(&c, x);
        (h2 <= r * r).then(|| (c, (r * r - h2).max(T::zero()).sqrt()))
    }
}

const CIRCLE_SAMPLES: usize = 4096;

/// Points of the relative boundary of the disk (c, s) in `plane`: the two
/// endpoints for lines, a dense circle for 2-planes.
fn disk_boundary<T: Real>(c: &[T], s: T, plane: &Plane<T>) -> Result<Vec<Vec<T>>> {
    let basis = plane.basis();
    let along = |coef: &[T]| -> Vec<T> {
        let mut p = c.to_vec();
        for (b, &k) in basis.iter().zip(coef) {
            for (pa, ba) in p.iter_mut().zip(b) {
                *pa = *pa + k * s * *ba;
            }
        }
        p
    };
    match plane.dim() {
        1 => Ok(vec![along(&[T::one()]), along(&[-T::one()])]),
        2 => Ok((0..CIRCLE_SAMPLES)
            .map(|k| {
                let t = T::TAU() * from_usize::<T>(k) / from_usize::<T>(CIRCLE_SAMPLES);
                along(&[t.cos(), t.sin()])
            })
            .collect()),
        n => Err(Error::UnsupportedDimension(n)),
    }
}

fn dist_to_disk<T: Real>(a: &[T], c: &[T], s: T, plane: &Plane<T>) -> T {
    let diff: Vec<T> = a.iter().zip(c).map(|(x, y)| *x - *y).collect();
    let h2 = plane.perp_dist2(&diff);
    let q = plane.along_dist2(&diff).sqrt();
    let out = (q - s).max(T::zero());
    (h2 + out * out).sqrt()
}

/// Hausdorff distance between L ∩ B̄(x, r) and W ∩ B̄(x, r); `None` if one
/// section is empty. Exact for lines, circle-sampled for 2-planes.
pub fn section_hausdorff<T: Real>(l: &AffinePlane<T>, w: &AffinePlane<T>, x: &[T], r: T) -> Result<Option<T>> {
    if l.plane.dim() != w.plane.dim() {
        return Err(Error::DimensionMismatch { expected: w.plane.dim(), found: l.plane.dim() });
    }
    let (Some((cl, sl)), Some((cw, sw))) = (l.ball_section(x, r), w.ball_section(x, r)) else {
        return Ok(None);
    };
    let one_way = |from: &[T], fs: T, fp: &Plane<T>, to: &[T], ts: T, tp: &Plane<T>| -> Result<T> {
        Ok(disk_boundary(from, fs, fp)?
            .iter()
            .fold(T::zero(), |m, a| m.max(dist_to_disk(a, to, ts, tp))))
    };
    let a = one_way(&cl, sl, &l.plane, &cw, sw, &w.plane)?;
    let b = one_way(&cw, sw, &w.plane, &cl, sl, &l.plane)?;
    Ok(Some(a.max(b)))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BetaResult<T> {
    pub center: Vec<T>,
    pub radius: T,
    pub beta: T,
    pub mass: T,
    /// Minimizing plane through the in-ball centroid.
    pub plane: AffinePlane<T>,
    /// The n-th and (n+1)-th moment eigenvalues coincide; the minimizer is
    /// not unique.
    pub degenerate: bool,
}

/// β_{μ,2}(x, r) with its minimizing n-plane (weighted total least squares).
pub fn beta2<T: Real>(m: &DiscreteMeasure<T>, x: &[T], r: T) -> Result<BetaResult<T>> {
    let d = m.ambient_dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: x.len() });
    }
    if !(r > T::zero()) {
        return Err(Error::InvalidParams("radius must be positive".into()));
    }
    let n = m.dim_param();
    let idx = m.ball_indices(x, r);
    let ws: Vec<T> = idx.iter().map(|&i| m.weight(i)).collect();
    let mass = pairwise_sum(&ws);
    if idx.is_empty() || !(mass > T::zero()) {
        return Err(Error::EmptyBall);
    }
    let mut centroid = vec![T::zero(); d];
    for &i in &idx {
        for (c, y) in centroid.iter_mut().zip(m.point(i)) {
            *c = *c + m.weight(i) * *y;
        }
    }
    centroid.iter_mut().for_each(|c| *c = *c / mass);
    let mut cov = vec![T::zero(); d * d];
    for &i in &idx {
        let y = m.point(i);
        let w = m.weight(i);
        for a in 0..d {
            let da = y[a] - centroid[a];
            for b in 0..d {
                cov[a * d + b] = cov[a * d + b] + w * da * (y[b] - centroid[b]);
            }
        }
    }
    let (vals, vecs) = symmetric_eigen(&cov, d);
    let trace = vals.iter().fold(T::zero(), |s, v| s + *v);
    let top: Vec<Vec<T>> = vecs[d - n..].to_vec();
    let gap = vals[d - n] - vals[d - n - 1];
    let degenerate = gap.abs() <= lit::<T>(1e-12) * trace.max(T::one());
    let plane = AffinePlane::new(centroid, Plane::new(&top)?)?;
    let resid: Vec<T> = idx
        .iter()
        .map(|&i| {
            let t = plane.dist(m.point(i)) / r;
            m.weight(i) * t * t
        })
        .collect();
    let beta = (pairwise_sum(&resid) / r.powi(n as i32)).max(T::zero()).sqrt();
    Ok(BetaResult { center: x.to_vec(), radius: r, beta, mass, plane, degenerate })
}

/// r0, r0/2, …, r0/2^{count−1}.
pub fn dyadic_scales<T: Real>(r0: T, count: usize) -> Vec<T> {
    (0..count).map(|k| r0 / lit::<T>(2.0).powi(k as i32)).collect()
}

fn check_decreasing<T: Real>(scales: &[T], min_len: usize) -> Result<()> {
    if scales.len() < min_len {
        return Err(Error::InvalidParams(format!("need at least {min_len} scales")));
    }
    if scales.iter().any(|s| !(*s > T::zero())) || scales.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParams("scales must be positive and strictly decreasing".into()));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BetaSquareReport<T> {
    pub scales: Vec<T>,
    pub beta_squared: Vec<T>,
    /// Δ log r attached to each scale.
    pub weights: Vec<T>,
    pub sum: T,
}

/// Σ_k β²(x, r_k) Δlog r_k over a decreasing grid; the last scale reuses
/// the previous spacing.
pub fn beta_square_function<T: Real>(m: &DiscreteMeasure<T>, x: &[T], scales: &[T]) -> Result<BetaSquareReport<T>> {
    check_decreasing(scales, 1)?;
    let beta_squared = scales
        .iter()
        .map(|&r| beta2(m, x, r).map(|b| b.beta * b.beta))
        .collect::<Result<Vec<T>>>()?;
    let mut weights: Vec<T> = scales.windows(2).map(|w| (w[0] / w[1]).ln()).collect();
    weights.push(weights.last().copied().unwrap_or_else(|| lit::<T>(2.0).ln()));
    let terms: Vec<T> = beta_squared.iter().zip(&weights).map(|(b, w)| *b * *w).collect();
    Ok(BetaSquareReport { scales: scales.to_vec(), beta_squared, weights, sum: pairwise_sum(&terms) })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TangentProfile<T> {
    pub scales: Vec<T>,
    /// dist_H(L_{x,r} ∩ B̄(x,r), W_x ∩ B̄(x,r)) / r.
    pub values: Vec<T>,
    /// Scale of the minimizer used as W_x.
    pub surrogate_scale: T,
    pub surrogate: AffinePlane<T>,
    /// Value at the finest scale above the surrogate over the coarsest value.
    pub trend: T,
}

pub fn tangent_convergence<T: Real>(m: &DiscreteMeasure<T>, x: &[T], scales: &[T]) -> Result<TangentProfile<T>> {
    check_decreasing(scales, 3)?;
    if m.dim_param() > 2 {
        return Err(Error::UnsupportedDimension(m.dim_param()));
    }
    let fits = scales.iter().map(|&r| beta2(m, x, r)).collect::<Result<Vec<_>>>()?;
    let w = fits.last().expect("checked length").plane.clone();
    let mut values = Vec::with_capacity(scales.len());
    for (fit, &r) in fits.iter().zip(scales) {
        let h = section_hausdorff(&fit.plane, &w, x, r)?.unwrap_or(T::infinity());
        values.push(h / r);
    }
    let k = values.len() - 2;
    let trend = if values[0] > T::zero() { values[k] / values[0] } else { T::zero() };
    Ok(TangentProfile {
        scales: scales.to_vec(),
        values,
        surrogate_scale: *scales.last().expect("checked length"),
        surrogate: w,
        trend,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConicalDensityProfile<T> {
    pub scales: Vec<T>,
    /// μ(K(x, W^⊥, α, r)) / r^n.
    pub values: Vec<T>,
    /// Finest value over coarsest value.
    pub trend: T,
    /// max over the grid of μ(B(x, r)) / r^n.
    pub upper_density: T,
    /// α^n ε(n) times the upper density, when ε(n) is supplied.
    pub threshold: Option<T>,
    pub finest_below_threshold: Option<bool>,
}

pub fn conical_density_profile<T: Real>(
    m: &DiscreteMeasure<T>,
    x: &[T],
    w: &Plane<T>,
    alpha: T,
    scales: &[T],
    eps_n: Option<T>,
) -> Result<ConicalDensityProfile<T>> {
    check_decreasing(scales, 1)?;
    if w.dim() != m.dim_param() {
        return Err(Error::DimensionMismatch { expected: m.dim_param(), found: w.dim() });
    }
    let n = m.dim_param() as i32;
    let v = w.complement();
    let mut values = Vec::with_capacity(scales.len());
    let mut upper = T::zero();
    for &r in scales {
        let cone = Cone::new(x.to_vec(), v.clone(), alpha, T::zero(), r)?;
        values.push(m.cone_mass(&cone)? / r.powi(n));
        upper = upper.max(m.theta(x, r)?);
    }
    let first = values[0];
    let last = *values.last().expect("non-empty");
    let trend = if first > T::zero() { last / first } else { T::zero() };
    let threshold = eps_n.map(|e| alpha.powi(n) * e * upper);
    Ok(ConicalDensityProfile {
        scales: scales.to_vec(),
        values,
        trend,
        upper_density: upper,
        finest_below_threshold: threshold.map(|t| last < t),
        threshold,
    })
}

/// ∫_{r_min}^{r_max} (μ(B(x, r)) / r^n)^p dr / r in closed form.
pub fn ball_density_energy<T: Real>(m: &DiscreteMeasure<T>, x: &[T], r_min: T, r_max: T, p: T) -> Result<T> {
    if x.len() != m.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: m.ambient_dim(), found: x.len() });
    }
    if !(r_min > T::zero() && r_max > r_min) {
        return Err(Error::InvalidRange);
    }
    let np = from_usize::<T>(m.dim_param()) * p;
    let mut hits: Vec<(T, T)> = m.ball_indices(x, r_max).into_iter().map(|i| (dist(m.point(i), x), m.weight(i))).collect();
    hits.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // μ(B(x, r)) on (a, b] counts atoms at distance < b, i.e. ≤ a.
    let mut mass = T::zero();
    let mut k = 0;
    while k < hits.len() && hits[k].0 <= r_min {
        mass = mass + hits[k].1;
        k += 1;
    }
    let mut lo = r_min;
    let mut terms = Vec::new();
    let mut piece = |mass: T, a: T, b: T| {
        if mass > T::zero() && b > a {
            terms.push(mass.powf(p) * (a.powf(-np) - b.powf(-np)) / np);
        }
    };
    while k < hits.len() {
        let r = hits[k].0;
        piece(mass, lo, r);
        while k < hits.len() && hits[k].0 == r {
            mass = mass + hits[k].1;
            k += 1;
        }
        lo = r;
    }
    piece(mass, lo, r_max);
    Ok(pairwise_sum(&terms))
}
