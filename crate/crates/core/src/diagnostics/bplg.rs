use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{section_hausdorff, AffinePlane};
use crate::corona::LipschitzGraph;
use crate::error::{Error, Result};
use crate::geometry::{in_cone_diff, Plane};
use crate::linalg::{dist, dist2, norm, sub};
use crate::measure::DiscreteMeasure;
use crate::scalar::{from_usize, lit, Real};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TubeCheck<T> {
    pub eta: T,
    /// dist_H(L ∩ B̄(x,r), W ∩ B̄(x,r)) / r.
    pub hausdorff: T,
    pub samples: usize,
    pub pass: bool,
    /// min over samples of dist(y, L) − ηr.
    pub min_margin: T,
    pub witness: Option<Vec<T>>,
}

/// Samples the shell K(x, W^⊥, α, r, 2r) and checks that it avoids the open
/// ηr-neighbourhood of L, η = 1 − α − 3ε, after verifying that L is ε-close
/// to x + W inside B(x, r).
#[allow(clippy::too_many_arguments)]
pub fn cone_outside_tube_check<T: Real>(
    x: &[T],
    r: T,
    w: &Plane<T>,
    l: &AffinePlane<T>,
    alpha: T,
    eps: T,
    samples: usize,
    seed: u64,
) -> Result<TubeCheck<T>> {
    let d = w.ambient_dim();
    if x.len() != d || l.plane.ambient_dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: x.len() });
    }
    if !(r > T::zero()) || !(alpha > T::zero() && alpha < T::one()) || !(eps >= T::zero()) {
        return Err(Error::InvalidParams("need r > 0, alpha in (0,1), eps >= 0".into()));
    }
    let eta = T::one() - alpha - lit::<T>(3.0) * eps;
    if !(eta > T::zero()) {
        return Err(Error::InvalidEta(eta.to_f64().unwrap_or(f64::NAN)));
    }
    let wx = AffinePlane::new(x.to_vec(), w.clone())?;
    let h = section_hausdorff(l, &wx, x, r)?.unwrap_or(T::infinity()) / r;
    if h > eps {
        return Err(Error::HypothesisViolated {
            found: h.to_f64().unwrap_or(f64::INFINITY),
            bound: eps.to_f64().unwrap_or(f64::NAN),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = |basis: &[Vec<T>], rng: &mut ChaCha8Rng| -> Vec<T> {
        loop {
            let coef: Vec<T> = basis.iter().map(|_| lit::<T>(rng.sample::<f64, _>(StandardNormal))).collect();
            let nc = norm(&coef);
            if nc > T::zero() {
                let mut v = vec![T::zero(); d];
                for (b, c) in basis.iter().zip(&coef) {
                    for (va, ba) in v.iter_mut().zip(b) {
                        *va = *va + *c / nc * *ba;
                    }
                }
                return v;
            }
        }
    };
    let slack = lit::<T>(1e-12) * r;
    let mut min_margin = T::infinity();
    let mut witness = None;
    for _ in 0..samples {
        let u = unit(w.perp_basis(), &mut rng);
        let s = unit(w.basis(), &mut rng);
        let b = alpha * lit::<T>(rng.gen::<f64>());
        let rho = r * (T::one() + lit::<T>(rng.gen::<f64>()));
        let a = (T::one() - b * b).sqrt();
        let y: Vec<T> = (0..d).map(|k| x[k] + rho * (a * u[k] + b * s[k])).collect();
        let margin = l.dist(&y) - eta * r;
        if margin < min_margin {
            min_margin = margin;
        }
        if margin < -slack && witness.is_none() {
            witness = Some(y);
        }
    }
    Ok(TubeCheck { eta, hausdorff: h, samples, pass: witness.is_none(), min_margin, witness })
}

/// The j with 2^{−j} ≤ ρ < 2^{−j+1}.
pub fn dyadic_shell<T: Real>(rho: T) -> i32 {
    let two = lit::<T>(2.0);
    let mut j = (-rho.log2()).ceil().to_i32().unwrap_or(0);
    while rho < two.powi(-j) {
        j += 1;
    }
    while rho >= two.powi(-j + 1) {
        j -= 1;
    }
    j
}

/// For each point, the sorted shells j whose cone K(x, V, θ, 2^{−j}, 2^{−j+1})
/// meets the other points.
pub fn theta_m_shells<T: Real>(points: &[Vec<T>], v: &Plane<T>, theta: T) -> Result<Vec<Vec<i32>>> {
    if !(theta > T::zero() && theta <= T::one()) {
        return Err(Error::InvalidParams("theta must lie in (0,1]".into()));
    }
    if let Some(p) = points.iter().find(|p| p.len() != v.ambient_dim()) {
        return Err(Error::DimensionMismatch { expected: v.ambient_dim(), found: p.len() });
    }
    Ok(points
        .par_iter()
        .map(|x| {
            let mut shells: Vec<i32> = points
                .iter()
                .filter_map(|y| {
                    let diff = sub(y, x);
                    let rho = norm(&diff);
                    (rho > T::zero() && in_cone_diff(&diff, v, theta)).then(|| dyadic_shell(rho))
                })
                .collect();
            shells.sort_unstable();
            shells.dedup();
            shells
        })
        .collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThetaMReport {
    pub max: usize,
    pub per_point: Option<Vec<usize>>,
    /// Shell range in which intersections are possible.
    pub j_min: i32,
    pub j_max: i32,
}

pub fn theta_m_property<T: Real>(points: &[Vec<T>], v: &Plane<T>, theta: T, per_point: bool) -> Result<ThetaMReport> {
    let shells = theta_m_shells(points, v, theta)?;
    let counts: Vec<usize> = shells.iter().map(Vec::len).collect();
    let mut diam = T::zero();
    let mut min = T::infinity();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = dist(&points[i], &points[j]);
            diam = diam.max(d);
            if d > T::zero() {
                min = min.min(d);
            }
        }
    }
    let (j_min, j_max) = if min.is_finite() {
        ((-diam.log2()).ceil().to_i32().unwrap_or(0), (-min.log2()).floor().to_i32().unwrap_or(0) + 1)
    } else {
        (0, 0)
    };
    Ok(ThetaMReport {
        max: counts.iter().copied().max().unwrap_or(0),
        per_point: per_point.then_some(counts),
        j_min,
        j_max,
    })
}

fn check_eps<T: Real>(eps: T) -> Result<()> {
    if !(eps > T::zero()) {
        return Err(Error::InvalidParams("epsilon must be positive".into()));
    }
    Ok(())
}

/// Atoms x with μ(B(x, r)) ≤ ε r^n for some 0 < r ≤ 1. Every radius at which
/// the open-ball mass jumps is tried, so the search is exact.
pub fn f_epsilon_set<T: Real>(m: &DiscreteMeasure<T>, eps: T) -> Result<Vec<usize>> {
    check_eps(eps)?;
    let n = m.dim_param() as i32;
    let member: Vec<bool> = (0..m.len())
        .into_par_iter()
        .map(|i| {
            let x = m.point(i);
            let mut hits: Vec<(T, T)> = m
                .ball_indices(x, T::one())
                .into_iter()
                .map(|j| (dist(m.point(j), x), m.weight(j)))
                .collect();
            hits.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let mut mass = T::zero();
            let mut k = 0;
            while k < hits.len() {
                let r = hits[k].0;
                if r > T::zero() && mass <= eps * r.powi(n) {
                    return true;
                }
                while k < hits.len() && hits[k].0 == r {
                    mass = mass + hits[k].1;
                    k += 1;
                }
            }
            mass <= eps
        })
        .collect();
    Ok((0..m.len()).filter(|&i| member[i]).collect())
}

/// F_ε restricted to radii from `grid` ⊂ (0, 1].
pub fn f_epsilon_set_on_grid<T: Real>(m: &DiscreteMeasure<T>, eps: T, grid: &[T]) -> Result<Vec<usize>> {
    check_eps(eps)?;
    if grid.iter().any(|r| !(*r > T::zero() && *r <= T::one())) {
        return Err(Error::InvalidParams("grid radii must lie in (0,1]".into()));
    }
    let n = m.dim_param() as i32;
    Ok((0..m.len())
        .filter(|&i| grid.iter().any(|&r| m.ball_mass_unchecked(m.point(i), r) <= eps * r.powi(n)))
        .collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoverBall<T> {
    pub atom: usize,
    pub center: Vec<T>,
    pub radius: T,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoverReport<T> {
    pub lipschitz: T,
    pub theta: T,
    pub alpha: T,
    pub on_graph: usize,
    pub off_graph: usize,
    pub balls: Vec<CoverBall<T>>,
    pub sum_radii_n: T,
    pub sum_mass: T,
    /// Σ r_j^n / Σ μ(B_j).
    pub ratio: T,
    pub disjoint_ok: bool,
    pub coverage_ok: bool,
    /// Cover balls whose 6-dilate contains a graph sample.
    pub kj_violations: usize,
    pub graph_samples: usize,
}

pub const ON_GRAPH_TOLERANCE: f64 = 1e-9;

/// Dense samples of Γ over the base box of `points`, widened by 10%.
pub fn graph_samples<T: Real>(graph: &LipschitzGraph<T>, points: &[&[T]], per_axis: usize) -> Result<Vec<Vec<T>>> {
    let v = &graph.direction;
    let n = v.perp_basis().len();
    if n > 2 {
        return Err(Error::UnsupportedDimension(n));
    }
    let mut lo = vec![T::infinity(); n];
    let mut hi = vec![T::neg_infinity(); n];
    for p in points.iter().map(|p| v.perp_coords(p)).chain(graph.base.iter().cloned()) {
        for k in 0..n {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    if !lo.iter().all(|x| x.is_finite()) {
        return Ok(Vec::new());
    }
    for k in 0..n {
        let pad = (hi[k] - lo[k]) * lit(0.1) + lit(1e-6);
        lo[k] = lo[k] - pad;
        hi[k] = hi[k] + pad;
    }
    let steps = per_axis.max(2);
    let coord = |k: usize, i: usize| lo[k] + (hi[k] - lo[k]) * from_usize::<T>(i) / from_usize::<T>(steps - 1);
    let zs: Vec<Vec<T>> = if n == 1 {
        (0..steps).map(|i| vec![coord(0, i)]).collect()
    } else {
        (0..steps).flat_map(|i| (0..steps).map(move |j| (i, j))).map(|(i, j)| vec![coord(0, i), coord(1, j)]).collect()
    };
    Ok(zs
        .par_iter()
        .map(|z| {
            let f = graph.eval(z);
            let mut y = v.lift(&f);
            for (b, c) in v.perp_basis().iter().zip(z) {
                for (ya, ba) in y.iter_mut().zip(b) {
                    *ya = *ya + *c * *ba;
                }
            }
            y
        })
        .collect())
}

/// Vitali cover of the off-graph atoms by B(x, 0.01 dist(x, Γ)), with the
/// disjointness, 5-dilate coverage and 6-dilate graph avoidance checks.
pub fn necessary_bplg_cover<T: Real>(
    m: &DiscreteMeasure<T>,
    graph: &LipschitzGraph<T>,
    alpha: Option<T>,
) -> Result<CoverReport<T>> {
    if graph.ambient_dim() != m.ambient_dim() {
        return Err(Error::GraphAmbientMismatch { graph: graph.ambient_dim(), measure: m.ambient_dim() });
    }
    let n = graph.direction.perp_basis().len();
    if n != m.dim_param() {
        return Err(Error::DimensionMismatch { expected: m.dim_param(), found: n });
    }
    let l = graph.lipschitz;
    let theta = T::one() / (T::one() + l * l).sqrt();
    let quarter = if l > T::zero() { T::one() / (lit::<T>(4.0) * l) } else { T::infinity() };
    let alpha = alpha.unwrap_or_else(|| (theta / lit(2.0)).min(lit(0.1)).min(quarter));
    let per_axis = if n == 1 { 8192 } else { 256 };
    let pts: Vec<&[T]> = m.points().collect();
    let samples = graph_samples(graph, &pts, per_axis)?;
    let tol = lit::<T>(ON_GRAPH_TOLERANCE);
    let dists: Vec<T> = (0..m.len())
        .into_par_iter()
        .map(|i| {
            let x = m.point(i);
            let vertical = graph.vertical_residual(x);
            if vertical <= tol {
                return T::zero();
            }
            samples.iter().fold(vertical, |a, s| a.min(dist(s, x)))
        })
        .collect();
    let off: Vec<usize> = (0..m.len()).filter(|&i| dists[i] > T::zero()).collect();
    let radius = |i: usize| lit::<T>(0.01) * dists[i];
    let mut order = off.clone();
    order.sort_by(|&a, &b| radius(b).partial_cmp(&radius(a)).unwrap().then(a.cmp(&b)));
    let mut chosen: Vec<usize> = Vec::new();
    for i in order {
        let ri = radius(i);
        if chosen.iter().all(|&j| dist(m.point(i), m.point(j)) >= ri + radius(j)) {
            chosen.push(i);
        }
    }
    let mut disjoint_ok = true;
    for (a, &i) in chosen.iter().enumerate() {
        for &j in &chosen[a + 1..] {
            if dist(m.point(i), m.point(j)) < radius(i) + radius(j) {
                disjoint_ok = false;
            }
        }
    }
    let five = lit::<T>(5.0);
    let coverage_ok = off
        .iter()
        .all(|&i| chosen.iter().any(|&j| dist(m.point(i), m.point(j)) < five * radius(j)));
    let six = lit::<T>(6.0);
    let kj_violations = chosen
        .par_iter()
        .filter(|&&j| {
            let r6 = six * radius(j);
            samples.iter().any(|s| dist2(s, m.point(j)) <= r6 * r6)
        })
        .count();
    let np = m.dim_param() as i32;
    let sum_radii_n = chosen.iter().fold(T::zero(), |s, &j| s + radius(j).powi(np));
    let sum_mass = chosen.iter().fold(T::zero(), |s, &j| s + m.ball_mass_unchecked(m.point(j), radius(j)));
    let ratio = if sum_mass > T::zero() { sum_radii_n / sum_mass } else { T::zero() };
    Ok(CoverReport {
        lipschitz: l,
        theta,
        alpha,
        on_graph: m.len() - off.len(),
        off_graph: off.len(),
        balls: chosen
            .iter()
            .map(|&j| CoverBall { atom: j, center: m.point(j).to_vec(), radius: radius(j) })
            .collect(),
        sum_radii_n,
        sum_mass,
        ratio,
        disjoint_ok,
        coverage_ok,
        kj_violations,
        graph_samples: samples.len(),
    })
}
