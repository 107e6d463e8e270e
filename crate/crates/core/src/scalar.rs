use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar accepted by every numeric routine in the crate.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Default
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Absolute tolerance used for orthonormality and degeneracy tests.
    fn tol() -> Self;
}

impl Real for f64 {
    fn tol() -> Self {
        1e-12
    }
}

impl Real for f32 {
    fn tol() -> Self {
        1e-5
    }
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

/// Converts a count into `T`.
#[inline]
pub fn from_usize<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}

/// Pairwise (cascade) summation with a fixed split so results do not depend on
/// how the caller scheduled the terms.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    const BLOCK: usize = 16;
    if xs.len() <= BLOCK {
        let mut acc = T::zero();
        for &x in xs {
            acc = acc + x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sum carried as non-overlapping partials, so any set of terms whose exact
/// sum is zero (such as ± pairs) sums to exactly zero.
pub fn exact_sum<T: Real>(xs: &[T]) -> T {
    let mut partials: Vec<T> = Vec::new();
    for &x0 in xs {
        let mut x = x0;
        let mut kept = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != T::zero() {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }
    partials.iter().rev().fold(T::zero(), |s, &p| s + p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_sum_cancels() {
        let xs = [1e16, 0.3, -1e16, 1.0 / 3.0, -0.3, 7e-20, -1.0 / 3.0, -7e-20];
        assert_eq!(exact_sum(&xs), 0.0);
        assert_eq!(exact_sum(&[0.1f64, 0.2, 0.3]), 0.6);
    }

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 45.0);
    }

    #[test]
    fn pairwise_is_accurate_on_long_input() {
        let xs = vec![0.1f32; 1 << 16];
        let s = pairwise_sum(&xs);
        assert!((s - 6553.6).abs() < 0.01);
    }
}
