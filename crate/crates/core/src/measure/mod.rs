//! Weighted point clouds standing in for a Radon measure.

mod index;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use index::GridIndex;

use crate::error::{Error, Result};
use crate::geometry::{in_cone_diff, Cone};
use crate::linalg::dist2;
use crate::scalar::{lit, Real};

/// Finite weighted point cloud with dimension parameter `n`.
#[derive(Clone, Debug)]
pub struct DiscreteMeasure<T> {
    dim: usize,
    n: usize,
    coords: Vec<T>,
    weights: Vec<T>,
    total: T,
    bbox_diag: T,
    index: GridIndex<T>,
}

/// Finite-scale density profile Θ(x, r_k) on a decreasing list of radii.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityProfile<T> {
    pub center: Vec<T>,
    pub scales: Vec<T>,
    pub values: Vec<T>,
}

/// Empirical constant in μ(B(x, r)) ≤ C1 r^n.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthEstimate<T> {
    pub c1: T,
    pub r_min: T,
    pub r0: T,
    pub samples: usize,
    pub degenerate: bool,
}

/// Translation and scaling applied by [`DiscreteMeasure::normalized`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Normalization<T> {
    pub offset: Vec<T>,
    pub scale: T,
}

impl<T: Real> DiscreteMeasure<T> {
    pub fn new(points: &[Vec<T>], weights: Vec<T>, dim_param: usize) -> Result<Self> {
        let d = points.first().map(|p| p.len()).unwrap_or(0);
        if let Some(bad) = points.iter().find(|p| p.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: bad.len() });
        }
        let coords = points.iter().flatten().copied().collect();
        Self::from_flat(d, coords, weights, dim_param)
    }

    /// Builds from row-major coordinates with `dim` columns.
    pub fn from_flat(dim: usize, coords: Vec<T>, weights: Vec<T>, dim_param: usize) -> Result<Self> {
        if dim == 0 || weights.is_empty() {
            return Err(Error::InvalidParams("measure needs at least one atom".into()));
        }
        if coords.len() != dim * weights.len() {
            return Err(Error::DimensionMismatch { expected: dim * weights.len(), found: coords.len() });
        }
        if dim_param == 0 || dim_param >= dim {
            return Err(Error::InvalidParams(format!(
                "dimension parameter {dim_param} must lie strictly between 0 and {dim}"
            )));
        }
        for (row, w) in weights.iter().enumerate() {
            if !(*w > T::zero() && w.is_finite()) {
                return Err(Error::InvalidWeight { row, weight: w.to_f64().unwrap_or(f64::NAN) });
            }
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParams("non-finite coordinate".into()));
        }
        let mut total = T::zero();
        for w in &weights {
            total = total + *w;
        }
        let index = GridIndex::build(&coords, dim);
        let mut lo = vec![T::infinity(); dim];
        let mut hi = vec![T::neg_infinity(); dim];
        for p in coords.chunks(dim) {
            for a in 0..dim {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let bbox_diag = crate::linalg::dist(&lo, &hi);
        Ok(Self { dim, n: dim_param, coords, weights, total, bbox_diag, index })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    pub fn dim_param(&self) -> usize {
        self.n
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[T]> {
        self.coords.chunks(self.dim)
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn weight(&self, i: usize) -> T {
        self.weights[i]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn total_mass(&self) -> T {
        self.total
    }

    pub fn index(&self) -> &GridIndex<T> {
        &self.index
    }

    /// Same atoms with every weight multiplied by `s`.
    pub fn scaled_weights(&self, s: T) -> Result<Self> {
        let w = self.weights.iter().map(|w| *w * s).collect();
        Self::from_flat(self.dim, self.coords.clone(), w, self.n)
    }

    /// Applies `x ↦ (x − offset)·scale` to every atom.
    pub fn transformed(&self, offset: &[T], scale: T) -> Result<Self> {
        let coords = self
            .coords
            .chunks(self.dim)
            .flat_map(|p| p.iter().zip(offset).map(move |(a, o)| (*a - *o) * scale))
            .collect();
        Self::from_flat(self.dim, coords, self.weights.clone(), self.n)
    }

    /// Translates and rescales to diameter 1 (bounding-box minimum at the
    /// origin). A single atom is only translated.
    pub fn normalized(&self) -> Result<(Self, Normalization<T>)> {
        let mut lo = vec![T::infinity(); self.dim];
        for p in self.points() {
            for a in 0..self.dim {
                lo[a] = lo[a].min(p[a]);
            }
        }
        let diam = self.diameter();
        let scale = if diam > T::zero() { T::one() / diam } else { T::one() };
        let m = self.transformed(&lo, scale)?;
        Ok((m, Normalization { offset: lo, scale }))
    }

    fn check(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        Ok(())
    }

    /// Indices of atoms with |y − x| < r, ascending.
    pub fn ball_indices(&self, x: &[T], r: T) -> Vec<usize> {
        let r2 = r * r;
        let mut hits = Vec::new();
        let indexed = self.index.for_each_candidate(x, r, |i| {
            if dist2(self.point(i), x) < r2 {
                hits.push(i);
            }
        });
        if !indexed {
            hits.clear();
            for (i, p) in self.points().enumerate() {
                if dist2(p, x) < r2 {
                    hits.push(i);
                }
            }
        }
        hits.sort_unstable();
        hits
    }

    /// μ(B(x, r)) over the open ball; summed in index order.
    pub fn ball_mass(&self, x: &[T], r: T) -> Result<T> {
        self.check(x)?;
        if !(r > T::zero()) {
            return Err(Error::InvalidParams(format!("radius must be positive, got {r}")));
        }
        Ok(self.ball_mass_unchecked(x, r))
    }

    pub fn ball_mass_unchecked(&self, x: &[T], r: T) -> T {
        let mut s = T::zero();
        for i in self.ball_indices(x, r) {
            s = s + self.weights[i];
        }
        s
    }

    /// μ(K) for a truncated cone.
    pub fn cone_mass(&self, cone: &Cone<T>) -> Result<T> {
        self.check(cone.vertex())?;
        let x = cone.vertex();
        let (r_in, r_out) = (cone.inner_radius(), cone.outer_radius());
        let candidates: Vec<usize> = if r_out < T::infinity() {
            self.ball_indices(x, r_out)
        } else {
            (0..self.len()).collect()
        };
        let mut s = T::zero();
        let mut diff = vec![T::zero(); self.dim];
        for i in candidates {
            let p = self.point(i);
            for a in 0..self.dim {
                diff[a] = p[a] - x[a];
            }
            let rho2 = dist2(p, x);
            if rho2 < r_in * r_in {
                continue;
            }
            if in_cone_diff(&diff, cone.direction(), cone.aperture()) {
                s = s + self.weights[i];
            }
        }
        Ok(s)
    }

    /// Θ(x, r) = μ(B(x, r)) / r^n.
    pub fn theta(&self, x: &[T], r: T) -> Result<T> {
        Ok(self.ball_mass(x, r)? / r.powi(self.n as i32))
    }

    /// Θ profile over the given radii (must be strictly decreasing).
    pub fn density_profile(&self, x: &[T], scales: &[T]) -> Result<DensityProfile<T>> {
        if scales.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::InvalidParams("scales must be strictly decreasing".into()));
        }
        let values = scales.iter().map(|&r| self.theta(x, r)).collect::<Result<Vec<_>>>()?;
        Ok(DensityProfile { center: x.to_vec(), scales: scales.to_vec(), values })
    }

    /// sup_{r_min ≤ r ≤ r_max} μ(B(x, r)) / r^n, exact over candidate radii.
    pub fn maximal_function(&self, x: &[T], r_min: T, r_max: T) -> Result<T> {
        self.check(x)?;
        if !(r_min > T::zero() && r_min < r_max) {
            return Err(Error::InvalidRange);
        }
        let n = self.n as i32;
        let mut dists: Vec<(T, T)> = self
            .ball_indices(x, r_max)
            .into_iter()
            .map(|i| (dist2(self.point(i), x).sqrt(), self.weights[i]))
            .collect();
        dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        // Closed-ball mass at r_min, then at each distance in [r_min, r_max).
        let mut mass = T::zero();
        let mut k = 0;
        while k < dists.len() && dists[k].0 <= r_min {
            mass = mass + dists[k].1;
            k += 1;
        }
        let mut best = mass / r_min.powi(n);
        while k < dists.len() {
            let r = dists[k].0;
            while k < dists.len() && dists[k].0 == r {
                mass = mass + dists[k].1;
                k += 1;
            }
            if r < r_max {
                best = best.max(mass / r.powi(n));
            }
        }
        Ok(best)
    }

    /// Distance from atom `i` to the nearest atom at positive distance.
    pub fn nearest_distance(&self, i: usize) -> Option<T> {
        let x = self.point(i);
        let mut r = self.index.cell_size();
        loop {
            let mut best = T::infinity();
            for j in self.ball_indices(x, r) {
                let d = dist2(self.point(j), x);
                if d > T::zero() && d < best {
                    best = d;
                }
            }
            if best < T::infinity() {
                return Some(best.sqrt());
            }
            if r > self.bbox_diag {
                return None;
            }
            r = r * lit(2.0);
        }
    }

    /// Smallest positive interatomic distance.
    pub fn min_interpoint_distance(&self) -> Option<T> {
        (0..self.len())
            .into_par_iter()
            .filter_map(|i| self.nearest_distance(i))
            .reduce_with(|a, b| a.min(b))
    }

    /// Largest interatomic distance (exact, quadratic).
    pub fn diameter(&self) -> T {
        (0..self.len())
            .into_par_iter()
            .map(|i| {
                let p = self.point(i);
                let mut best = T::zero();
                for j in (i + 1)..self.len() {
                    best = best.max(dist2(p, self.point(j)));
                }
                best
            })
            .reduce(T::zero, |a, b| a.max(b))
            .sqrt()
    }

    /// Estimates C1 as the maximum over sampled atoms of the maximal function
    /// on [r_min(m), r0], where r_min(m) is half the smallest interatomic
    /// distance.
    pub fn growth_constant(&self, r0: T, sample_count: usize, seed: u64) -> Result<GrowthEstimate<T>> {
        if !(r0 > T::zero()) {
            return Err(Error::InvalidParams("r0 must be positive".into()));
        }
        let (r_min, degenerate) = match self.min_interpoint_distance() {
            Some(d) if d / lit(2.0) < r0 => (d / lit(2.0), false),
            _ => (r0 * lit(1e-3), true),
        };
        let picks: Vec<usize> = if sample_count >= self.len() {
            (0..self.len()).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut v = sample(&mut rng, self.len(), sample_count.max(1)).into_vec();
            v.sort_unstable();
            v
        };
        let vals = picks
            .par_iter()
            .map(|&i| self.maximal_function(self.point(i), r_min, r0))
            .collect::<Result<Vec<T>>>()?;
        let c1 = vals.into_iter().fold(T::zero(), |a, b| a.max(b));
        Ok(GrowthEstimate { c1, r_min, r0, samples: picks.len(), degenerate })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Plane;

    fn atom() -> DiscreteMeasure<f64> {
        DiscreteMeasure::new(&[vec![0.0, 0.0]], vec![1.0], 1).unwrap()
    }

    #[test]
    fn ball_mass_examples() {
        let m = atom();
        assert_eq!(m.ball_mass(&[0.0, 0.0], 0.1).unwrap(), 1.0);
        assert_eq!(m.ball_mass(&[1.0, 0.0], 1.0).unwrap(), 0.0);
        let c = DiscreteMeasure::new(
            &[vec![0.125, 0.125], vec![0.875, 0.125], vec![0.125, 0.875], vec![0.875, 0.875]],
            vec![0.25; 4],
            1,
        )
        .unwrap();
        assert_eq!(c.ball_mass(&[0.125, 0.125], 0.5).unwrap(), 0.25);
    }

    #[test]
    fn cone_mass_examples() {
        let line = DiscreteMeasure::new(
            &(0..10).map(|i| vec![i as f64, 0.0]).collect::<Vec<_>>(),
            vec![0.1; 10],
            1,
        )
        .unwrap();
        let v = Plane::coordinate(2, &[1]).unwrap();
        let k = Cone::full(vec![3.0, 0.0], v.clone(), 0.9).unwrap();
        assert_eq!(line.cone_mass(&k).unwrap(), 0.0);
        let m = DiscreteMeasure::new(&[vec![0.0, 2.0]], vec![0.7], 1).unwrap();
        let k = Cone::new(vec![0.0, 0.0], v.clone(), 0.5, 0.0, 3.0).unwrap();
        assert_eq!(m.cone_mass(&k).unwrap(), 0.7);
        let k = Cone::new(vec![0.0, 0.0], v, 0.5, 0.0, 2.0).unwrap();
        assert_eq!(m.cone_mass(&k).unwrap(), 0.0);
    }

    #[test]
    fn theta_examples() {
        let m = atom();
        assert_eq!(m.theta(&[0.0, 0.0], 0.5).unwrap(), 2.0);
        assert_eq!(m.theta(&[5.0, 0.0], 0.5).unwrap(), 0.0);
    }

    #[test]
    fn maximal_function_examples() {
        let m = atom();
        assert_eq!(m.maximal_function(&[0.0, 0.0], 0.1, 1.0).unwrap(), 10.0);
        assert_eq!(m.maximal_function(&[0.0, 0.0], 1.0, 1.0).unwrap_err(), Error::InvalidRange);
    }

    #[test]
    fn growth_constant_single_atom_is_degenerate() {
        let g = atom().growth_constant(1.0, 10, 1).unwrap();
        assert!(g.degenerate);
        assert!((g.c1 - 1.0 / g.r_min).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_weights() {
        let e = DiscreteMeasure::new(&[vec![0.0, 0.0]], vec![0.0], 1).unwrap_err();
        assert!(matches!(e, Error::InvalidWeight { row: 0, .. }));
    }

    #[test]
    fn normalization_gives_unit_diameter() {
        let m = DiscreteMeasure::<f64>::new(&[vec![1.0, 1.0], vec![4.0, 5.0]], vec![1.0, 1.0], 1).unwrap();
        let (n, info) = m.normalized().unwrap();
        assert!((n.diameter() - 1.0).abs() < 1e-15);
        assert_eq!(info.scale, 0.2);
    }
}
