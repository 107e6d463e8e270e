//! Uniform grid over the bounding box of a point cloud.

use crate::scalar::{from_usize, lit, Real};

#[derive(Clone, Debug)]
pub struct GridIndex<T> {
    dim: usize,
    origin: Vec<T>,
    cell: T,
    counts: Vec<usize>,
    strides: Vec<usize>,
    starts: Vec<usize>,
    items: Vec<usize>,
}

impl<T: Real> GridIndex<T> {
    /// Builds the grid over `coords` (row-major, `dim` columns). The cell size
    /// follows the median nearest-neighbour distance of a deterministic
    /// sample, enlarged when the grid would exceed `4·N` cells.
    pub fn build(coords: &[T], dim: usize) -> Self {
        let n = coords.len() / dim;
        let mut lo = vec![T::infinity(); dim];
        let mut hi = vec![T::neg_infinity(); dim];
        for p in coords.chunks(dim) {
            for a in 0..dim {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let extent = (0..dim).fold(T::zero(), |m, a| m.max(hi[a] - lo[a]));
        let mut cell = median_nn_sample(coords, dim);
        if !(cell > T::zero()) {
            cell = if extent > T::zero() { extent } else { T::one() };
        }
        let cap = 4 * n + 16;
        let counts_for = |h: T| -> Vec<usize> {
            (0..dim)
                .map(|a| ((hi[a] - lo[a]) / h).floor().to_usize().unwrap_or(usize::MAX / 4) + 1)
                .collect()
        };
        let mut counts = counts_for(cell);
        while counts.iter().try_fold(1usize, |acc, &c| acc.checked_mul(c)).map_or(true, |t| t > cap) {
            cell = cell * lit(1.5);
            counts = counts_for(cell);
        }
        let mut strides = vec![1usize; dim];
        for a in 1..dim {
            strides[a] = strides[a - 1] * counts[a - 1];
        }
        let total: usize = counts.iter().product();
        let mut cell_of = Vec::with_capacity(n);
        let mut fill = vec![0usize; total + 1];
        for p in coords.chunks(dim) {
            let mut flat = 0;
            for a in 0..dim {
                let c = ((p[a] - lo[a]) / cell).floor().to_usize().unwrap_or(0).min(counts[a] - 1);
                flat += c * strides[a];
            }
            cell_of.push(flat);
            fill[flat + 1] += 1;
        }
        for i in 0..total {
            fill[i + 1] += fill[i];
        }
        let starts = fill.clone();
        let mut cursor = fill;
        let mut items = vec![0usize; n];
        for (i, &c) in cell_of.iter().enumerate() {
            items[cursor[c]] = i;
            cursor[c] += 1;
        }
        Self { dim, origin: lo, cell, counts, strides, starts, items }
    }

    pub fn cell_size(&self) -> T {
        self.cell
    }

    /// Calls `f(i)` for every stored index whose cell meets the axis box
    /// around `x` of half-width `r`. Returns false (without calling `f`) when
    /// the box spans more cells than there are points; the caller should
    /// then scan linearly.
    pub fn for_each_candidate<F: FnMut(usize)>(&self, x: &[T], r: T, mut f: F) -> bool {
        if !(r < T::infinity()) {
            return false;
        }
        let dim = self.dim;
        let mut lo = vec![0usize; dim];
        let mut hi = vec![0usize; dim];
        let mut visits: usize = 1;
        for a in 0..dim {
            let l = ((x[a] - r - self.origin[a]) / self.cell).floor();
            let h = ((x[a] + r - self.origin[a]) / self.cell).floor();
            let max = from_usize::<T>(self.counts[a] - 1);
            if h < T::zero() || l > max {
                return true;
            }
            lo[a] = l.max(T::zero()).to_usize().unwrap();
            hi[a] = h.min(max).to_usize().unwrap();
            visits = visits.saturating_mul(hi[a] - lo[a] + 1);
        }
        if visits > self.items.len() {
            return false;
        }
        let mut idx = lo.clone();
        loop {
            let flat: usize = idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum();
            for &i in &self.items[self.starts[flat]..self.starts[flat + 1]] {
                f(i);
            }
            let mut a = 0;
            loop {
                if a == dim {
                    return true;
                }
                if idx[a] < hi[a] {
                    idx[a] += 1;
                    break;
                }
                idx[a] = lo[a];
                a += 1;
            }
        }
    }
}

fn median_nn_sample<T: Real>(coords: &[T], dim: usize) -> T {
    let n = coords.len() / dim;
    if n < 2 {
        return T::zero();
    }
    let stride = (n / 256).max(1);
    let mut nn: Vec<T> = (0..n)
        .step_by(stride)
        .filter_map(|i| {
            let p = &coords[i * dim..(i + 1) * dim];
            let mut best = T::infinity();
            for (j, q) in coords.chunks(dim).enumerate() {
                if j != i {
                    let d = crate::linalg::dist2(p, q);
                    if d > T::zero() && d < best {
                        best = d;
                    }
                }
            }
            (best < T::infinity()).then(|| best.sqrt())
        })
        .collect();
    if nn.is_empty() {
        return T::zero();
    }
    nn.sort_by(|a, b| a.partial_cmp(b).unwrap());
    nn[nn.len() / 2]
}
