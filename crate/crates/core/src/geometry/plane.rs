use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{dot, gram_schmidt, symmetric_eigen};
use crate::scalar::{lit, Real};

/// Linear subspace of R^d stored by an orthonormal basis, together with an
/// orthonormal basis of its orthogonal complement.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane<T> {
    ambient_dim: usize,
    basis: Vec<Vec<T>>,
    perp: Vec<Vec<T>>,
}

impl<T: Real> Plane<T> {
    /// Orthonormalizes `vectors`; they must be independent and fewer than d.
    pub fn new(vectors: &[Vec<T>]) -> Result<Self> {
        let m = vectors.len();
        let d = vectors.first().map(|v| v.len()).ok_or_else(|| {
            Error::InvalidParams("a plane needs at least one vector".into())
        })?;
        if let Some(bad) = vectors.iter().find(|v| v.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: bad.len() });
        }
        let basis = gram_schmidt(vectors, lit(1e-10)).ok_or(Error::RankDeficient)?;
        if m >= d {
            return Err(Error::InvalidParams(format!(
                "plane dimension {m} must lie strictly between 0 and {d}"
            )));
        }
        let perp = complete_basis(&basis, d);
        Ok(Self { ambient_dim: d, basis, perp })
    }

    /// The span of the listed coordinate axes.
    pub fn coordinate(d: usize, axes: &[usize]) -> Result<Self> {
        let vectors: Vec<Vec<T>> = axes
            .iter()
            .map(|&a| {
                let mut v = vec![T::zero(); d];
                if a < d {
                    v[a] = T::one();
                }
                v
            })
            .collect();
        if axes.iter().any(|&a| a >= d) {
            return Err(Error::InvalidParams("axis index out of range".into()));
        }
        Self::new(&vectors)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<T>] {
        &self.basis
    }

    pub fn perp_basis(&self) -> &[Vec<T>] {
        &self.perp
    }

    /// The orthogonal complement V^⊥.
    pub fn complement(&self) -> Self {
        Self {
            ambient_dim: self.ambient_dim,
            basis: self.perp.clone(),
            perp: self.basis.clone(),
        }
    }

    fn check(&self, y: &[T]) -> Result<()> {
        if y.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch { expected: self.ambient_dim, found: y.len() });
        }
        Ok(())
    }

    /// Coordinates of π_V(y) in the stored basis.
    pub fn coords(&self, y: &[T]) -> Vec<T> {
        self.basis.iter().map(|b| dot(b, y)).collect()
    }

    /// Coordinates of π_V^⊥(y) in the complement basis.
    pub fn perp_coords(&self, y: &[T]) -> Vec<T> {
        self.perp.iter().map(|b| dot(b, y)).collect()
    }

    /// Point of V with the given coordinates.
    pub fn lift(&self, c: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.ambient_dim];
        for (ci, b) in c.iter().zip(&self.basis) {
            for (o, bi) in out.iter_mut().zip(b) {
                *o = *o + *ci * *bi;
            }
        }
        out
    }

    /// π_V(y) without dimension checks.
    pub fn proj(&self, y: &[T]) -> Vec<T> {
        self.lift(&self.coords(y))
    }

    /// |π_V^⊥(y)|², i.e. the squared distance from y to V.
    #[inline]
    pub fn perp_dist2(&self, y: &[T]) -> T {
        let mut s = T::zero();
        for b in &self.perp {
            let c = dot(b, y);
            s = s + c * c;
        }
        s
    }

    /// |π_V(y)|².
    #[inline]
    pub fn along_dist2(&self, y: &[T]) -> T {
        let mut s = T::zero();
        for b in &self.basis {
            let c = dot(b, y);
            s = s + c * c;
        }
        s
    }

    /// Returns (π_V(y), π_V^⊥(y)).
    pub fn project(&self, y: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        self.check(y)?;
        let along = self.proj(y);
        let perp = y.iter().zip(&along).map(|(a, b)| *a - *b).collect();
        Ok((along, perp))
    }

    /// Row-major d×d matrix of π_V.
    pub fn projection_matrix(&self) -> Vec<T> {
        let d = self.ambient_dim;
        let mut p = vec![T::zero(); d * d];
        for b in &self.basis {
            for i in 0..d {
                for j in 0..d {
                    p[i * d + j] = p[i * d + j] + b[i] * b[j];
                }
            }
        }
        p
    }

    pub fn cast<U: Real>(&self) -> Plane<U> {
        let conv = |vs: &Vec<Vec<T>>| -> Vec<Vec<U>> {
            vs.iter()
                .map(|v| v.iter().map(|x| U::from_f64(x.to_f64().unwrap()).unwrap()).collect())
                .collect()
        };
        Plane { ambient_dim: self.ambient_dim, basis: conv(&self.basis), perp: conv(&self.perp) }
    }
}

/// Extends an orthonormal family to an orthonormal basis of R^d and returns
/// the added vectors.
fn complete_basis<T: Real>(basis: &[Vec<T>], d: usize) -> Vec<Vec<T>> {
    let mut all: Vec<Vec<T>> = basis.to_vec();
    let mut extra = Vec::new();
    // Try the axes in order of smallest existing component so the pick is
    // well conditioned.
    let mut axes: Vec<(usize, T)> = (0..d)
        .map(|a| (a, basis.iter().map(|b| b[a] * b[a]).fold(T::zero(), |s, x| s + x)))
        .collect();
    axes.sort_by(|x, y| x.1.partial_cmp(&y.1).unwrap().then(x.0.cmp(&y.0)));
    for (a, _) in axes {
        if all.len() == d {
            break;
        }
        let mut w = vec![T::zero(); d];
        w[a] = T::one();
        for _ in 0..2 {
            for q in &all {
                let c = dot(&w, q);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi = *wi - c * *qi;
                }
            }
        }
        let nw = dot(&w, &w).sqrt();
        if nw > lit(1e-6) {
            for wi in w.iter_mut() {
                *wi = *wi / nw;
            }
            all.push(w.clone());
            extra.push(w);
        }
    }
    extra
}

/// dist(y, V + x) = |(y − x) − π_V(y − x)|.
pub fn dist_to_affine_plane<T: Real>(y: &[T], plane: &Plane<T>, through: &[T]) -> Result<T> {
    plane.check(y)?;
    plane.check(through)?;
    let diff: Vec<T> = y.iter().zip(through).map(|(a, b)| *a - *b).collect();
    Ok(plane.perp_dist2(&diff).sqrt())
}

/// ‖π_V − π_W‖ in operator norm.
pub fn plane_metric<T: Real>(v: &Plane<T>, w: &Plane<T>) -> Result<T> {
    if v.ambient_dim != w.ambient_dim {
        return Err(Error::DimensionMismatch { expected: v.ambient_dim, found: w.ambient_dim });
    }
    if v.dim() != w.dim() {
        return Err(Error::DimensionMismatch { expected: v.dim(), found: w.dim() });
    }
    let d = v.ambient_dim;
    let pv = v.projection_matrix();
    let pw = w.projection_matrix();
    let diff: Vec<T> = pv.iter().zip(&pw).map(|(a, b)| *a - *b).collect();
    let (vals, _) = symmetric_eigen(&diff, d);
    let m = vals.iter().fold(T::zero(), |acc, x| acc.max(x.abs()));
    Ok(m.min(T::one()))
}

/// Samples `count` planes from the rotation-invariant measure on G(d, m) by
/// orthonormalizing standard Gaussian frames.
pub fn sample_grassmannian<T: Real>(d: usize, m: usize, count: usize, seed: u64) -> Result<Vec<Plane<T>>> {
    if m == 0 || m >= d {
        return Err(Error::InvalidParams(format!("need 0 < m < d, got m={m}, d={d}")));
    }
    if count == 0 {
        return Err(Error::InvalidParams("count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let frame: Vec<Vec<T>> = (0..m)
            .map(|_| {
                (0..d)
                    .map(|_| {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        lit(g)
                    })
                    .collect()
            })
            .collect();
        if let Ok(p) = Plane::new(&frame) {
            out.push(p);
        }
    }
    Ok(out)
}

impl<T: Real> fmt::Display for Plane<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self
            .basis
            .iter()
            .map(|v| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(","))
            .collect();
        write!(f, "{}", rows.join(";"))
    }
}

impl<T: Real> FromStr for Plane<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let vectors = s
            .split(';')
            .filter(|row| !row.trim().is_empty())
            .map(|row| {
                row.split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<f64>()
                            .map(lit::<T>)
                            .map_err(|e| Error::Parse(format!("plane entry {x:?}: {e}")))
                    })
                    .collect::<Result<Vec<T>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Plane::new(&vectors)
    }
}

impl<T: Real> Serialize for Plane<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de, T: Real> Deserialize<'de> for Plane<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
