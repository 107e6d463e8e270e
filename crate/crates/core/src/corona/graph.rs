use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{in_cone_diff, Plane};
use crate::linalg::{dist, sub};
use crate::scalar::{lit, Real};

/// Graph {z + F(z) : z ∈ V^⊥} of a map F : V^⊥ → V given on anchors and
/// extended componentwise as the midpoint of the McShane and Whitney
/// extensions min_j f_jc + L|z − z_j| and max_j f_jc − L|z − z_j|.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LipschitzGraph<T> {
    /// The graph direction V (dimension d − n).
    pub direction: Plane<T>,
    /// Anchor parameters z_j in coordinates of V^⊥.
    pub base: Vec<Vec<T>>,
    /// Anchor values F(z_j) in coordinates of V.
    pub values: Vec<Vec<T>>,
    /// Per-component extension constant.
    pub lipschitz: T,
    /// max |F(z_i) − F(z_j)| / |z_i − z_j| over anchor pairs.
    pub measured: T,
}

/// Outcome of fitting when cone separation is not enforced.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct FitReport {
    /// Anchor pairs (indices into the input) with y − x in the half cone.
    pub violations: Vec<(usize, usize)>,
    pub violation_count: usize,
    /// Inputs dropped because they share a base point with a kept anchor.
    pub dropped: Vec<usize>,
}

const MAX_LISTED: usize = 64;

impl<T: Real> LipschitzGraph<T> {
    /// Graph through the anchors (z_j, F(z_j)) extended with constant
    /// `lipschitz`, which must dominate the anchor slopes.
    pub fn new(direction: Plane<T>, base: Vec<Vec<T>>, values: Vec<Vec<T>>, lipschitz: T) -> Result<Self> {
        let (n, k) = (direction.perp_basis().len(), direction.dim());
        if base.len() != values.len() {
            return Err(Error::InvalidParams("anchor parameters and values differ in count".into()));
        }
        if let Some(z) = base.iter().find(|z| z.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: z.len() });
        }
        if let Some(f) = values.iter().find(|f| f.len() != k) {
            return Err(Error::DimensionMismatch { expected: k, found: f.len() });
        }
        let measured = measured_lipschitz(&base, &values);
        if !(lipschitz >= T::zero()) || measured > lipschitz * (T::one() + T::tol()) {
            return Err(Error::InvalidParams(format!(
                "anchors have slope {} above the declared constant",
                measured.to_f64().unwrap_or(f64::NAN)
            )));
        }
        Ok(Self { direction, base, values, lipschitz, measured })
    }

    pub fn ambient_dim(&self) -> usize {
        self.direction.ambient_dim()
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    /// F(z) for base coordinates z.
    pub fn eval(&self, z: &[T]) -> Vec<T> {
        let k = self.direction.dim();
        if self.base.is_empty() {
            return vec![T::zero(); k];
        }
        let mut upper = vec![T::infinity(); k];
        let mut lower = vec![T::neg_infinity(); k];
        for (zj, fj) in self.base.iter().zip(&self.values) {
            let lz = self.lipschitz * dist(z, zj);
            for c in 0..k {
                upper[c] = upper[c].min(fj[c] + lz);
                lower[c] = lower[c].max(fj[c] - lz);
            }
        }
        upper.iter().zip(&lower).map(|(&u, &l)| (u + l) / lit(2.0)).collect()
    }

    /// The graph point above the projection of `x` onto V^⊥.
    pub fn point_above(&self, x: &[T]) -> Vec<T> {
        let z = self.direction.perp_coords(x);
        let f = self.eval(&z);
        let mut y = self.direction.lift(&f);
        for (perp, zc) in self.direction.perp_basis().iter().zip(&z) {
            for (a, b) in y.iter_mut().zip(perp) {
                *a = *a + *zc * *b;
            }
        }
        y
    }

    /// |π_V x − F(π_{V^⊥} x)|, an upper bound for dist(x, Γ).
    pub fn vertical_residual(&self, x: &[T]) -> T {
        let f = self.eval(&self.direction.perp_coords(x));
        dist(&self.direction.coords(x), &f)
    }
}

fn measured_lipschitz<T: Real>(base: &[Vec<T>], values: &[Vec<T>]) -> T {
    let mut best = T::zero();
    for i in 0..base.len() {
        for j in i + 1..base.len() {
            let dz = dist(&base[i], &base[j]);
            if dz > T::zero() {
                best = best.max(dist(&values[i], &values[j]) / dz);
            }
        }
    }
    best
}

/// Pairs (i, j), i < j, with x_j − x_i in the half-aperture cone K(0, V, α/2).
pub fn half_cone_violations<T: Real>(points: &[Vec<T>], v: &Plane<T>, alpha: T) -> (usize, Vec<(usize, usize)>) {
    let half = alpha / lit(2.0);
    let mut count = 0;
    let mut listed = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if in_cone_diff(&sub(&points[j], &points[i]), v, half) {
                count += 1;
                if listed.len() < MAX_LISTED {
                    listed.push((i, j));
                }
            }
        }
    }
    (count, listed)
}

fn check_dims<T: Real>(points: &[Vec<T>], v: &Plane<T>) -> Result<()> {
    for p in points {
        if p.len() != v.ambient_dim() {
            return Err(Error::DimensionMismatch { expected: v.ambient_dim(), found: p.len() });
        }
    }
    Ok(())
}

/// Builds Γ through `points`, requiring pairwise avoidance of the half cone.
pub fn fit_lipschitz_graph<T: Real>(points: &[Vec<T>], v: &Plane<T>, alpha: T) -> Result<LipschitzGraph<T>> {
    check_dims(points, v)?;
    if !(alpha > T::zero() && alpha <= T::one()) {
        return Err(Error::InvalidParams(format!("alpha {alpha} outside (0,1]")));
    }
    let (_, pairs) = half_cone_violations(points, v, alpha);
    if let Some(&(i, j)) = pairs.first() {
        return Err(Error::ConeViolation(i, j));
    }
    let (graph, _) = fit_lenient(points, v, alpha, &[]);
    Ok(graph)
}

/// Builds Γ through as many of `points` as possible. Cone violations are
/// recorded and absorbed by raising the extension constant to the measured
/// one; points whose base coordinate coincides with a kept anchor carrying a
/// different value are dropped, lowest `priority` rank first, then later
/// index first.
pub fn fit_lipschitz_graph_lenient<T: Real>(
    points: &[Vec<T>],
    v: &Plane<T>,
    alpha: T,
    priority: &[u8],
) -> Result<(LipschitzGraph<T>, FitReport)> {
    check_dims(points, v)?;
    if !(alpha > T::zero() && alpha <= T::one()) {
        return Err(Error::InvalidParams(format!("alpha {alpha} outside (0,1]")));
    }
    Ok(fit_lenient(points, v, alpha, priority))
}

fn fit_lenient<T: Real>(points: &[Vec<T>], v: &Plane<T>, alpha: T, priority: &[u8]) -> (LipschitzGraph<T>, FitReport) {
    let (violation_count, violations) = half_cone_violations(points, v, alpha);
    let rank = |i: usize| priority.get(i).copied().unwrap_or(0);
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(rank(i)), i));
    let tol = T::tol();
    let mut base: Vec<Vec<T>> = Vec::new();
    let mut values: Vec<Vec<T>> = Vec::new();
    let mut dropped = Vec::new();
    for i in order {
        let z = v.perp_coords(&points[i]);
        let f = v.coords(&points[i]);
        let clash = base.iter().zip(&values).find(|(zb, _)| dist(zb, &z) <= tol);
        match clash {
            Some((_, fb)) if dist(fb, &f) <= tol => {}
            Some(_) => dropped.push(i),
            None => {
                base.push(z);
                values.push(f);
            }
        }
    }
    dropped.sort_unstable();
    let measured = measured_lipschitz(&base, &values);
    let lipschitz = (lit::<T>(2.0) / alpha).max(measured);
    (
        LipschitzGraph { direction: v.clone(), base, values, lipschitz, measured },
        FitReport { violations, violation_count, dropped },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_anchors_are_flat() {
        let v = Plane::coordinate(2, &[1]).unwrap();
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 0.1, 0.3]).collect();
        let g = fit_lipschitz_graph(&pts, &v, 0.5).unwrap();
        assert_eq!(g.measured, 0.0);
        assert_eq!(g.lipschitz, 4.0);
        for p in &pts {
            assert_eq!(g.vertical_residual(p), 0.0);
        }
        assert!((g.eval(&[7.0])[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn steep_pair_is_a_violation() {
        let v = Plane::coordinate(2, &[1]).unwrap();
        let pts = vec![vec![0.0, 0.0], vec![0.01, 1.0]];
        assert_eq!(fit_lipschitz_graph(&pts, &v, 0.5).unwrap_err(), Error::ConeViolation(0, 1));
        let (g, rep) = fit_lipschitz_graph_lenient(&pts, &v, 0.5, &[]).unwrap();
        assert_eq!(rep.violation_count, 1);
        assert!(g.lipschitz >= 100.0 - 1e-9);
        assert!(g.vertical_residual(&pts[1]) < 1e-12);
    }

    #[test]
    fn collisions_drop_low_priority() {
        let v = Plane::coordinate(2, &[1]).unwrap();
        let pts = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.0]];
        let (g, rep) = fit_lipschitz_graph_lenient(&pts, &v, 0.5, &[0, 1, 0]).unwrap();
        assert_eq!(rep.dropped, vec![0]);
        assert_eq!(g.len(), 2);
        assert!(g.vertical_residual(&pts[1]) < 1e-12);
    }
}
