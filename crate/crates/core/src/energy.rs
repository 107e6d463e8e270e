//! Conical energies evaluated in closed form.
//!
//! For an atomic measure r ↦ μ(K(x, V, α, r)) is a step function, so every
//! energy integral is a finite sum of terms m^p (a^{-np} − b^{-np}) / (np).

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{in_cone_diff, plane_metric, sample_grassmannian, Ball, Plane};
use crate::lattice::Lattice;
use crate::linalg::dist2;
use crate::measure::DiscreteMeasure;
use crate::scalar::{from_usize, lit, pairwise_sum, Real};

/// Direction, aperture, exponent and scales of a conical energy.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EnergySpec<T> {
    pub direction: Plane<T>,
    pub alpha: T,
    pub p: T,
    /// Outer scale R; `T::infinity()` integrates over all scales.
    pub outer: T,
    /// Window parameter η for cube energies.
    pub eta: T,
}

impl<T: Real> EnergySpec<T> {
    pub fn new(direction: Plane<T>, alpha: T, p: T, outer: T) -> Self {
        Self { direction, alpha, p, outer, eta: lit(0.1) }
    }

    pub fn with_outer(&self, outer: T) -> Self {
        Self { outer, ..self.clone() }
    }

    pub fn validate(&self, m: &DiscreteMeasure<T>) -> Result<()> {
        let d = m.ambient_dim();
        if self.direction.ambient_dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: self.direction.ambient_dim() });
        }
        if self.direction.dim() != d - m.dim_param() {
            return Err(Error::DimensionMismatch {
                expected: d - m.dim_param(),
                found: self.direction.dim(),
            });
        }
        if !(self.alpha > T::zero() && self.alpha < T::one()) {
            return Err(Error::InvalidParams(format!("alpha {} outside (0,1)", self.alpha)));
        }
        if !(self.p >= T::one()) {
            return Err(Error::InvalidParams(format!("p {} below 1", self.p)));
        }
        if !(self.outer > T::zero()) {
            return Err(Error::InvalidParams(format!("R {} not positive", self.outer)));
        }
        if !(self.eta > T::zero() && self.eta < T::one()) {
            return Err(Error::InvalidParams(format!("eta {} outside (0,1)", self.eta)));
        }
        Ok(())
    }
}

/// Step structure of r ↦ μ(K(x, V, α, r)) and the resulting integral.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown<T> {
    /// Distinct in-cone distances, ascending.
    pub radii: Vec<T>,
    /// Mass of in-cone atoms at distance ≤ radii[i].
    pub masses: Vec<T>,
    /// Integral over [radii[i], radii[i+1]) (last interval ends at R).
    pub contributions: Vec<T>,
    pub total: T,
    pub in_cone_count: usize,
}

/// Sorted in-cone distances from a vertex with cumulative masses.
#[derive(Clone, Debug, Default)]
pub struct ConeProfile<T> {
    radii: Vec<T>,
    cum: Vec<T>,
    cum_count: Vec<usize>,
}

/// ∫_a^b (m / r^n)^p dr / r for constant m; `b` may be infinite.
#[inline]
fn step_integral<T: Real>(m: T, a: T, b: T, n: usize, p: T) -> T {
    if m <= T::zero() || !(b > a) {
        return T::zero();
    }
    let np = from_usize::<T>(n) * p;
    let head = a.powf(-np);
    let tail = if b < T::infinity() { b.powf(-np) } else { T::zero() };
    m.powf(p) * (head - tail) / np
}

impl<T: Real> ConeProfile<T> {
    /// Profile of K(x, V, α) ∩ B(x, outer).
    pub fn build(m: &DiscreteMeasure<T>, x: &[T], direction: &Plane<T>, alpha: T, outer: T) -> Self {
        let d = m.ambient_dim();
        let candidates: Vec<usize> = if outer < T::infinity() {
            m.ball_indices(x, outer)
        } else {
            (0..m.len()).collect()
        };
        let mut hits: Vec<(T, T)> = Vec::new();
        let mut diff = vec![T::zero(); d];
        for i in candidates {
            let y = m.point(i);
            for a in 0..d {
                diff[a] = y[a] - x[a];
            }
            if in_cone_diff(&diff, direction, alpha) {
                hits.push((dist2(y, x).sqrt(), m.weight(i)));
            }
        }
        hits.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut radii = Vec::new();
        let mut cum: Vec<T> = Vec::new();
        let mut cum_count = Vec::new();
        let mut acc = T::zero();
        for (k, (r, w)) in hits.into_iter().enumerate() {
            acc = acc + w;
            if radii.last() == Some(&r) {
                *cum.last_mut().unwrap() = acc;
                *cum_count.last_mut().unwrap() = k + 1;
            } else {
                radii.push(r);
                cum.push(acc);
                cum_count.push(k + 1);
            }
        }
        Self { radii, cum, cum_count }
    }

    pub fn radii(&self) -> &[T] {
        &self.radii
    }

    pub fn masses(&self) -> &[T] {
        &self.cum
    }

    pub fn in_cone_count(&self) -> usize {
        self.cum_count.last().copied().unwrap_or(0)
    }

    /// μ(K(x, V, α, r)): in-cone mass at distance < r.
    pub fn mass_below(&self, r: T) -> T {
        let k = self.radii.partition_point(|&s| s < r);
        if k == 0 {
            T::zero()
        } else {
            self.cum[k - 1]
        }
    }

    /// ∫_a^b (μ(K(x, V, α, r)) / r^n)^p dr / r.
    pub fn window_energy(&self, a: T, b: T, n: usize, p: T) -> T {
        if !(b > a) {
            return T::zero();
        }
        let mut terms = Vec::new();
        // Mass on (a, next] counts atoms at distance ≤ a.
        let mut k = self.radii.partition_point(|&s| s <= a);
        let mut lo = a;
        let mut mass = if k == 0 { T::zero() } else { self.cum[k - 1] };
        while k < self.radii.len() && self.radii[k] < b {
            terms.push(step_integral(mass, lo, self.radii[k], n, p));
            lo = self.radii[k];
            mass = self.cum[k];
            k += 1;
        }
        terms.push(step_integral(mass, lo, b, n, p));
        pairwise_sum(&terms)
    }

    /// Breakdown of ∫_0^R with one entry per in-cone distance below R.
    pub fn breakdown(&self, outer: T, n: usize, p: T) -> EnergyBreakdown<T> {
        let k = self.radii.partition_point(|&s| s < outer);
        let radii = self.radii[..k].to_vec();
        let masses = self.cum[..k].to_vec();
        let contributions: Vec<T> = (0..k)
            .map(|i| {
                let b = if i + 1 < k { radii[i + 1] } else { outer };
                step_integral(masses[i], radii[i], b, n, p)
            })
            .collect();
        let total = pairwise_sum(&contributions);
        let in_cone_count = if k == 0 { 0 } else { self.cum_count[k - 1] };
        EnergyBreakdown { radii, masses, contributions, total, in_cone_count }
    }
}

fn check_point<T: Real>(m: &DiscreteMeasure<T>, x: &[T]) -> Result<()> {
    if x.len() != m.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: m.ambient_dim(), found: x.len() });
    }
    Ok(())
}

/// E_{μ,p}(x, V, α, R) with its step breakdown.
pub fn pointwise_energy<T: Real>(m: &DiscreteMeasure<T>, x: &[T], spec: &EnergySpec<T>) -> Result<EnergyBreakdown<T>> {
    check_point(m, x)?;
    spec.validate(m)?;
    let profile = ConeProfile::build(m, x, &spec.direction, spec.alpha, spec.outer);
    Ok(profile.breakdown(spec.outer, m.dim_param(), spec.p))
}

/// Energies of every atom as vertex, in index order.
pub fn all_pointwise_energies<T: Real>(m: &DiscreteMeasure<T>, spec: &EnergySpec<T>) -> Result<Vec<EnergyBreakdown<T>>> {
    spec.validate(m)?;
    Ok((0..m.len())
        .into_par_iter()
        .map(|i| {
            ConeProfile::build(m, m.point(i), &spec.direction, spec.alpha, spec.outer)
                .breakdown(spec.outer, m.dim_param(), spec.p)
        })
        .collect())
}

/// n^{-1} Σ_{y_i ∈ K(x, V, α)} w_i |x − y_i|^{-n}.
pub fn riesz_cone_sum<T: Real>(m: &DiscreteMeasure<T>, x: &[T], direction: &Plane<T>, alpha: T) -> Result<T> {
    check_point(m, x)?;
    if direction.ambient_dim() != m.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: m.ambient_dim(), found: direction.ambient_dim() });
    }
    let n = m.dim_param();
    let mut terms = Vec::new();
    let mut diff = vec![T::zero(); x.len()];
    for (i, y) in m.points().enumerate() {
        for a in 0..x.len() {
            diff[a] = y[a] - x[a];
        }
        if in_cone_diff(&diff, direction, alpha) {
            let r = dist2(y, x).sqrt();
            terms.push(m.weight(i) / r.powi(n as i32));
        }
    }
    Ok(pairwise_sum(&terms) / from_usize(n))
}

/// ∫_B E_{μ,p}(x, V, α, r(B)) dμ(x).
pub fn ball_energy<T: Real>(m: &DiscreteMeasure<T>, ball: &Ball<T>, spec: &EnergySpec<T>) -> Result<T> {
    check_point(m, &ball.center)?;
    if !(ball.radius > T::zero()) {
        return Err(Error::InvalidParams("ball radius must be positive".into()));
    }
    let spec = spec.with_outer(ball.radius);
    spec.validate(m)?;
    let terms: Vec<T> = m
        .ball_indices(&ball.center, ball.radius)
        .into_par_iter()
        .map(|i| {
            let e = ConeProfile::build(m, m.point(i), &spec.direction, spec.alpha, spec.outer)
                .window_energy(T::zero(), spec.outer, m.dim_param(), spec.p);
            m.weight(i) * e
        })
        .collect();
    Ok(pairwise_sum(&terms))
}

/// E(Q): mean over μ|Q of the windowed energy on [η r(Q), r(Q)/η], summed
/// over atoms of 2B_Q. Evaluated on the lattice's normalized measure; the
/// spec's outer scale is ignored.
pub fn cube_energy<T: Real>(lattice: &Lattice<T>, q: usize, spec: &EnergySpec<T>) -> Result<T> {
    let cube = lattice.cube(q)?;
    let m = lattice.measure();
    spec.validate(m)?;
    let mass = lattice.mass(q);
    if !(mass > T::zero()) {
        return Err(Error::EmptyCube(q));
    }
    let (a, b) = (spec.eta * cube.r, cube.r / spec.eta);
    let n = m.dim_param();
    let terms: Vec<T> = m
        .ball_indices(lattice.center(q), lit::<T>(56.0) * cube.r)
        .into_iter()
        .map(|i| {
            let prof = ConeProfile::build(m, m.point(i), &spec.direction, spec.alpha, b);
            m.weight(i) * prof.window_energy(a, b, n, spec.p)
        })
        .collect();
    Ok(pairwise_sum(&terms) / mass)
}

/// E_{μ,p}(R^d, V, α) = ∫ E_{μ,p}(x, V, α, ∞) dμ(x).
pub fn total_energy<T: Real>(m: &DiscreteMeasure<T>, direction: &Plane<T>, alpha: T, p: T) -> Result<T> {
    let spec = EnergySpec::new(direction.clone(), alpha, p, T::infinity());
    let terms: Vec<T> = all_pointwise_energies(m, &spec)?
        .iter()
        .enumerate()
        .map(|(i, e)| m.weight(i) * e.total)
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Outcome of the direction search on one ball.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BpbeBallReport<T> {
    pub center: Vec<T>,
    pub radius: T,
    pub ball_mass: T,
    pub best_direction: Option<Plane<T>>,
    pub best_fraction: T,
    pub best_mean_energy: T,
    pub passes: bool,
    pub fractions: Vec<T>,
}

/// Parameters of a BPBE scan.
#[derive(Clone, Debug)]
pub struct BpbeParams<T> {
    pub alpha: T,
    pub p: T,
    pub m0: T,
    pub kappa: T,
    pub direction_samples: usize,
    pub pinned: Vec<Plane<T>>,
    pub seed: u64,
}

/// For each ball, searches pinned and sampled directions for the largest mass
/// fraction of in-ball atoms with E_{μ,p}(x, V, α, r(B)) ≤ M0.
pub fn bpbe_scan<T: Real>(m: &DiscreteMeasure<T>, balls: &[Ball<T>], params: &BpbeParams<T>) -> Result<Vec<BpbeBallReport<T>>> {
    if !(params.kappa > T::zero() && params.kappa <= T::one()) {
        return Err(Error::InvalidParams("kappa must lie in (0,1]".into()));
    }
    if !(params.m0 > T::zero()) {
        return Err(Error::InvalidParams("M0 must be positive".into()));
    }
    if params.direction_samples == 0 {
        return Err(Error::InvalidParams("direction_samples must be at least 1".into()));
    }
    let d = m.ambient_dim();
    let mut directions = params.pinned.clone();
    directions.extend(sample_grassmannian(d, d - m.dim_param(), params.direction_samples, params.seed)?);
    balls
        .iter()
        .map(|ball| {
            check_point(m, &ball.center)?;
            let inside = m.ball_indices(&ball.center, ball.radius);
            let mass = pairwise_sum(&inside.iter().map(|&i| m.weight(i)).collect::<Vec<_>>());
            let mut fractions = Vec::with_capacity(directions.len());
            let mut best: Option<(usize, T, T)> = None;
            for (k, dir) in directions.iter().enumerate() {
                let spec = EnergySpec::new(dir.clone(), params.alpha, params.p, ball.radius);
                spec.validate(m)?;
                let energies: Vec<T> = inside
                    .par_iter()
                    .map(|&i| {
                        ConeProfile::build(m, m.point(i), dir, params.alpha, ball.radius).window_energy(
                            T::zero(),
                            ball.radius,
                            m.dim_param(),
                            params.p,
                        )
                    })
                    .collect();
                let good: Vec<T> = inside
                    .iter()
                    .zip(&energies)
                    .filter(|(_, e)| **e <= params.m0)
                    .map(|(&i, _)| m.weight(i))
                    .collect();
                let frac = if mass > T::zero() { pairwise_sum(&good) / mass } else { T::zero() };
                let weighted: Vec<T> = inside.iter().zip(&energies).map(|(&i, e)| m.weight(i) * *e).collect();
                let mean = if mass > T::zero() { pairwise_sum(&weighted) / mass } else { T::zero() };
                fractions.push(frac);
                let better = match best {
                    None => true,
                    Some((_, bf, bm)) => frac > bf || (frac == bf && mean < bm),
                };
                if better {
                    best = Some((k, frac, mean));
                }
            }
            let (k, frac, mean) = best.expect("at least one direction");
            Ok(BpbeBallReport {
                center: ball.center.clone(),
                radius: ball.radius,
                ball_mass: mass,
                best_direction: Some(directions[k].clone()),
                best_fraction: frac,
                best_mean_energy: mean,
                passes: mass > T::zero() && frac >= params.kappa,
                fractions,
            })
        })
        .collect()
}

/// Carleson ratio of one ball under a fixed per-atom direction field.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BmeBallReport<T> {
    pub center: Vec<T>,
    pub radius: T,
    pub ball_mass: T,
    pub ratio: T,
    pub passes: bool,
}

/// ∫_B E_{μ,p}(x, V_x, α, r(B)) dμ / μ(B) per ball, compared with M0.
pub fn bme_check<T: Real>(
    m: &DiscreteMeasure<T>,
    balls: &[Ball<T>],
    alpha: T,
    p: T,
    m0: T,
    assignment: &[Plane<T>],
) -> Result<Vec<BmeBallReport<T>>> {
    if assignment.len() < m.len() {
        return Err(Error::MissingDirection(assignment.len()));
    }
    for dir in assignment {
        EnergySpec::new(dir.clone(), alpha, p, T::one()).validate(m)?;
    }
    balls
        .iter()
        .map(|ball| {
            check_point(m, &ball.center)?;
            let inside = m.ball_indices(&ball.center, ball.radius);
            let mass = pairwise_sum(&inside.iter().map(|&i| m.weight(i)).collect::<Vec<_>>());
            let terms: Vec<T> = inside
                .par_iter()
                .map(|&i| {
                    let e = ConeProfile::build(m, m.point(i), &assignment[i], alpha, ball.radius)
                        .window_energy(T::zero(), ball.radius, m.dim_param(), p);
                    m.weight(i) * e
                })
                .collect();
            let ratio = if mass > T::zero() { pairwise_sum(&terms) / mass } else { T::zero() };
            Ok(BmeBallReport { center: ball.center.clone(), radius: ball.radius, ball_mass: mass, ratio, passes: ratio <= m0 })
        })
        .collect()
}

/// Exploratory comparison of E_{μ,1}(R^d, V0^⊥, α) with binned projection
/// L² norms averaged over planes near V0.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProjectionReport<T> {
    pub left: T,
    pub right: T,
    pub ratio: T,
    pub accepted: usize,
    pub attempts: usize,
    pub bin_width: T,
    pub exploratory: bool,
}

/// L² norm squared of the histogram density of π_V μ at resolution `h`.
pub fn binned_projection_l2<T: Real>(m: &DiscreteMeasure<T>, v: &Plane<T>, h: T) -> T {
    let mut bins: BTreeMap<Vec<i64>, T> = BTreeMap::new();
    for (i, y) in m.points().enumerate() {
        let key: Vec<i64> = v.coords(y).iter().map(|c| (*c / h).floor().to_i64().unwrap_or(i64::MAX)).collect();
        let e = bins.entry(key).or_insert(T::zero());
        *e = *e + m.weight(i);
    }
    let squares: Vec<T> = bins.values().map(|w| *w * *w).collect();
    pairwise_sum(&squares) / h.powi(v.dim() as i32)
}

pub fn projection_energy_check<T: Real>(
    m: &DiscreteMeasure<T>,
    v0: &Plane<T>,
    alpha: T,
    lambda: T,
    direction_samples: usize,
    bin_width: T,
    seed: u64,
) -> Result<ProjectionReport<T>> {
    if !(bin_width > T::zero()) {
        return Err(Error::InvalidParams("bin_width must be positive".into()));
    }
    if v0.dim() != m.dim_param() || v0.ambient_dim() != m.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: m.dim_param(), found: v0.dim() });
    }
    if direction_samples == 0 {
        return Err(Error::InvalidParams("direction_samples must be at least 1".into()));
    }
    let cone_dir = v0.complement();
    let left_terms = (0..m.len())
        .into_par_iter()
        .map(|i| riesz_cone_sum(m, m.point(i), &cone_dir, alpha).map(|e| m.weight(i) * e))
        .collect::<Result<Vec<T>>>()?;
    let left = pairwise_sum(&left_terms);

    let radius = lambda * alpha;
    let d = m.ambient_dim();
    let mut rng_seed = seed;
    let mut accepted: Vec<Plane<T>> = Vec::new();
    let mut attempts = 0usize;
    let max_attempts = 1000 * direction_samples;
    while accepted.len() < direction_samples && attempts < max_attempts {
        let batch = sample_grassmannian::<T>(d, m.dim_param(), 64, rng_seed)?;
        rng_seed = rng_seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
        for v in batch {
            if accepted.len() == direction_samples || attempts == max_attempts {
                break;
            }
            attempts += 1;
            if plane_metric(&v, v0)? < radius {
                accepted.push(v);
            }
        }
    }
    let norms: Vec<T> = accepted.par_iter().map(|v| binned_projection_l2(m, v, bin_width)).collect();
    let right = if accepted.is_empty() {
        T::zero()
    } else {
        let gamma = from_usize::<T>(accepted.len()) / from_usize::<T>(attempts);
        gamma * pairwise_sum(&norms) / from_usize(norms.len())
    };
    let ratio = if right > T::zero() { left / right } else if left > T::zero() { T::infinity() } else { T::zero() };
    Ok(ProjectionReport { left, right, ratio, accepted: accepted.len(), attempts, bin_width, exploratory: true })
}
