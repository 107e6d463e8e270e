use crate::error::{Error, Result};
use crate::geometry::Plane;
use crate::linalg::dist2;
use crate::scalar::Real;

/// The truncated cone K(x, V, α, r, R): points y with r ≤ |y − x| < R and
/// dist(y, V + x) < α|y − x|. With r = 0 the vertex is excluded.
#[derive(Clone, Debug, PartialEq)]
pub struct Cone<T> {
    vertex: Vec<T>,
    direction: Plane<T>,
    aperture: T,
    inner: T,
    outer: T,
}

impl<T: Real> Cone<T> {
    pub fn new(vertex: Vec<T>, direction: Plane<T>, aperture: T, inner: T, outer: T) -> Result<Self> {
        if vertex.len() != direction.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: direction.ambient_dim(),
                found: vertex.len(),
            });
        }
        if !(aperture > T::zero() && aperture <= T::one()) {
            return Err(Error::InvalidParams(format!("aperture {aperture} outside (0,1]")));
        }
        if !(inner >= T::zero() && outer > inner) {
            return Err(Error::InvalidParams(format!("need 0 <= r < R, got r={inner}, R={outer}")));
        }
        Ok(Self { vertex, direction, aperture, inner, outer })
    }

    /// Untruncated cone K(x, V, α).
    pub fn full(vertex: Vec<T>, direction: Plane<T>, aperture: T) -> Result<Self> {
        Self::new(vertex, direction, aperture, T::zero(), T::infinity())
    }

    pub fn vertex(&self) -> &[T] {
        &self.vertex
    }

    pub fn direction(&self) -> &Plane<T> {
        &self.direction
    }

    pub fn aperture(&self) -> T {
        self.aperture
    }

    pub fn inner_radius(&self) -> T {
        self.inner
    }

    pub fn outer_radius(&self) -> T {
        self.outer
    }

    pub fn contains(&self, y: &[T]) -> Result<bool> {
        if y.len() != self.vertex.len() {
            return Err(Error::DimensionMismatch { expected: self.vertex.len(), found: y.len() });
        }
        Ok(self.contains_unchecked(y))
    }

    #[inline]
    pub fn contains_unchecked(&self, y: &[T]) -> bool {
        let rho2 = dist2(y, &self.vertex);
        if rho2 <= T::zero() || rho2 < self.inner * self.inner || rho2 >= self.outer * self.outer {
            return false;
        }
        let diff: Vec<T> = y.iter().zip(&self.vertex).map(|(a, b)| *a - *b).collect();
        in_cone_diff(&diff, &self.direction, self.aperture)
    }
}

/// Whether `diff = y − x` lies in K(0, V, α) (open, vertex excluded).
#[inline]
pub fn in_cone_diff<T: Real>(diff: &[T], direction: &Plane<T>, aperture: T) -> bool {
    let mut rho2 = T::zero();
    for d in diff {
        rho2 = rho2 + *d * *d;
    }
    rho2 > T::zero() && direction.perp_dist2(diff) < aperture * aperture * rho2
}

/// Whether y ∈ K(x, V, α).
#[inline]
pub fn in_cone<T: Real>(x: &[T], y: &[T], direction: &Plane<T>, aperture: T) -> bool {
    let mut buf = [T::zero(); 8];
    if x.len() <= 8 {
        for (i, (a, b)) in y.iter().zip(x).enumerate() {
            buf[i] = *a - *b;
        }
        in_cone_diff(&buf[..x.len()], direction, aperture)
    } else {
        let diff: Vec<T> = y.iter().zip(x).map(|(a, b)| *a - *b).collect();
        in_cone_diff(&diff, direction, aperture)
    }
}
