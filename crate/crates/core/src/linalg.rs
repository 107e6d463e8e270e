//! Small dense linear algebra on slices: enough for projections, plane fits
//! and projection-difference norms in low ambient dimension.

use crate::scalar::{lit, Real};

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (x, y) in a.iter().zip(b) {
        s = s + *x * *y;
    }
    s
}

#[inline]
pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(x, y)| *x - *y).collect()
}

#[inline]
pub fn add<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(x, y)| *x + *y).collect()
}

#[inline]
pub fn scale<T: Real>(a: &[T], s: T) -> Vec<T> {
    a.iter().map(|x| *x * s).collect()
}

#[inline]
pub fn dist<T: Real>(a: &[T], b: &[T]) -> T {
    dist2(a, b).sqrt()
}

#[inline]
pub fn dist2<T: Real>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (x, y) in a.iter().zip(b) {
        let d = *x - *y;
        s = s + d * d;
    }
    s
}

/// Modified Gram-Schmidt with one reorthogonalization pass. Returns `None`
/// when some vector has residual norm below `tol` relative to its input norm.
pub fn gram_schmidt<T: Real>(vectors: &[Vec<T>], tol: T) -> Option<Vec<Vec<T>>> {
    let mut out: Vec<Vec<T>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let n0 = norm(v);
        if n0 <= T::zero() {
            return None;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = dot(&w, q);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi = *wi - c * *qi;
                }
            }
        }
        let nw = norm(&w);
        if nw <= tol * n0 {
            return None;
        }
        for wi in w.iter_mut() {
            *wi = *wi / nw;
        }
        out.push(w);
    }
    Some(out)
}

/// Symmetric eigen-decomposition by cyclic Jacobi rotations.
///
/// `a` is row-major `n x n`. Returns eigenvalues in ascending order and the
/// matching unit eigenvectors.
pub fn symmetric_eigen<T: Real>(a: &[T], n: usize) -> (Vec<T>, Vec<Vec<T>>) {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let two = lit::<T>(2.0);
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut diag = T::zero();
        for i in 0..n {
            diag = diag + m[i * n + i] * m[i * n + i];
            for j in 0..n {
                if i != j {
                    off = off + m[i * n + j] * m[i * n + j];
                }
            }
        }
        if off <= T::epsilon() * T::epsilon() * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].partial_cmp(&m[j * n + j]).unwrap());
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&j| (0..n).map(|k| v[k * n + j]).collect())
        .collect();
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_diagonal() {
        let (vals, _) = symmetric_eigen(&[3.0, 0.0, 0.0, 1.0], 2);
        assert_eq!(vals, vec![1.0, 3.0]);
    }

    #[test]
    fn eigen_reconstructs_matrix() {
        let a: [f64; 9] = [4.0, 1.0, 2.0, 1.0, 3.0, 0.5, 2.0, 0.5, 1.0];
        let (vals, vecs) = symmetric_eigen(&a, 3);
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0f64;
                for k in 0..3 {
                    s += vals[k] * vecs[k][i] * vecs[k][j];
                }
                assert!((s - a[i * 3 + j]).abs() < 1e-12);
            }
        }
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn gram_schmidt_detects_dependence() {
        assert!(gram_schmidt(&[vec![1.0, 0.0], vec![2.0, 0.0]], 1e-10).is_none());
        let q = gram_schmidt(&[vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 0.0]], 1e-10).unwrap();
        assert!(dot::<f64>(&q[0], &q[1]).abs() < 1e-15);
    }
}
