//! David–Mattila-style lattice of "cubes" over the support of a measure.
//!
//! The cloud is normalized to diameter 1; level-k cubes have radius A0^{-k}
//! and centers forming a 10·A0^{-k}-separated net, so that the balls 5B(Q)
//! of one level are pairwise disjoint.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dist2;
use crate::measure::{DiscreteMeasure, Normalization};
use crate::scalar::{lit, Real};

/// Radius constant C0, scale ratio A0 and depth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LatticeParams<T> {
    pub c0: T,
    pub a0: T,
    /// `None` builds down to the first level at which every singleton cube
    /// is doubling.
    #[serde(default)]
    pub max_depth: Option<usize>,
}

impl<T: Real> Default for LatticeParams<T> {
    fn default() -> Self {
        Self { c0: lit(2.0), a0: lit(8.0), max_depth: None }
    }
}

const AUTO_DEPTH_CAP: usize = 40;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Cube<T> {
    pub id: usize,
    pub level: usize,
    /// Index of the center atom x_Q.
    pub center: usize,
    pub r: T,
    pub members: Vec<usize>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub doubling: bool,
}

#[derive(Clone, Debug)]
pub struct Lattice<T> {
    params: LatticeParams<T>,
    depth: usize,
    measure: DiscreteMeasure<T>,
    normalization: Normalization<T>,
    cubes: Vec<Cube<T>>,
    levels: Vec<Vec<usize>>,
    masses: Vec<T>,
}

/// Exact structural checks plus reported containment statistics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LatticeReport {
    pub partition_ok: bool,
    pub nesting_ok: bool,
    pub disjoint_5b_ok: bool,
    pub radius_bounds_ok: bool,
    /// Members farther than 28 r(Q) from x_Q.
    pub outer_containment_violations: usize,
    /// Atoms of B(Q) that belong to another cube of the same level.
    pub inner_containment_violations: usize,
    /// Pairs Q ⊂ P with B_Q ⊄ B_P.
    pub ball_nesting_violations: usize,
    pub levels: usize,
    pub cubes: usize,
}

impl LatticeReport {
    pub fn exact_ok(&self) -> bool {
        self.partition_ok && self.nesting_ok && self.disjoint_5b_ok && self.radius_bounds_ok
    }
}

/// MD(Q) and the atoms of Q covered by none of its cubes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaximalDoubling {
    pub cubes: Vec<usize>,
    pub remainder: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityDropReport<T> {
    pub lhs: T,
    pub rhs: T,
    pub holds: bool,
    pub generation_gap: usize,
    /// Exponent e with Θ(100B(Q)) = (C0A0)^d A0^{-e(J(Q)−J(R)−1)} Θ(100B(R));
    /// undefined for adjacent generations.
    pub achieved_exponent: Option<T>,
}

/// One cube of the JSON dump.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CubeRecord<T> {
    pub id: usize,
    pub level: usize,
    pub center: Vec<T>,
    pub r: T,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub members_count: usize,
    pub doubling: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub members: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LatticeDump<T> {
    pub c0: T,
    pub a0: T,
    pub depth: usize,
    pub normalization: Normalization<T>,
    pub cubes: Vec<CubeRecord<T>>,
}

fn cell_key<T: Real>(p: &[T], h: T) -> Vec<i64> {
    p.iter().map(|c| (*c / h).floor().to_i64().unwrap_or(0)).collect()
}

fn neighbour_keys(key: &[i64]) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::with_capacity(key.len())];
    for &k in key {
        let mut next = Vec::with_capacity(out.len() * 3);
        for prefix in &out {
            for dk in -1..=1 {
                let mut v = prefix.clone();
                v.push(k + dk);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// Smallest depth at which 100·A0^{-k} ≤ the normalized minimal distance.
fn auto_depth<T: Real>(m: &DiscreteMeasure<T>, a0: T) -> usize {
    let Some(delta) = m.min_interpoint_distance() else {
        return 1;
    };
    let mut k = 1;
    while k < AUTO_DEPTH_CAP && lit::<T>(100.0) * a0.powi(-(k as i32)) > delta {
        k += 1;
    }
    k
}

pub fn build_lattice<T: Real>(m: &DiscreteMeasure<T>, params: &LatticeParams<T>) -> Result<Lattice<T>> {
    if !(params.c0 > T::one()) {
        return Err(Error::InvalidParams("C0 must exceed 1".into()));
    }
    if !(params.a0 > lit::<T>(2.0) * params.c0) {
        return Err(Error::InvalidParams("A0 must exceed 2 C0".into()));
    }
    if params.max_depth == Some(0) {
        return Err(Error::InvalidParams("max_depth must be at least 1".into()));
    }
    let (nm, normalization) = m.normalized()?;
    let depth = params.max_depth.unwrap_or_else(|| auto_depth(&nm, params.a0));
    let mut cubes: Vec<Cube<T>> = vec![Cube {
        id: 0,
        level: 0,
        center: 0,
        r: T::one(),
        members: (0..nm.len()).collect(),
        parent: None,
        children: Vec::new(),
        doubling: false,
    }];
    let mut levels = vec![vec![0usize]];
    for k in 1..=depth {
        let r = params.a0.powi(-(k as i32));
        let sep = lit::<T>(10.0) * r;
        let sep2 = sep * sep;
        let parents = levels[k - 1].clone();
        let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        let admissible = |grid: &HashMap<Vec<i64>, Vec<usize>>, i: usize| -> bool {
            let p = nm.point(i);
            neighbour_keys(&cell_key(p, sep)).iter().all(|key| {
                grid.get(key)
                    .map_or(true, |cs| cs.iter().all(|&c| dist2(nm.point(c), p) >= sep2))
            })
        };
        let mut centers: Vec<Vec<usize>> = parents.iter().map(|&q| vec![cubes[q].center]).collect();
        for &q in &parents {
            let c = cubes[q].center;
            grid.entry(cell_key(nm.point(c), sep)).or_default().push(c);
        }
        for (slot, &q) in parents.iter().enumerate() {
            for &i in &cubes[q].members {
                if i != cubes[q].center && admissible(&grid, i) {
                    grid.entry(cell_key(nm.point(i), sep)).or_default().push(i);
                    centers[slot].push(i);
                }
            }
        }
        let mut layer = Vec::new();
        for (slot, &q) in parents.iter().enumerate() {
            let cs = &centers[slot];
            let mut groups: Vec<Vec<usize>> = vec![Vec::new(); cs.len()];
            for &i in &cubes[q].members {
                let p = nm.point(i);
                let mut best = 0;
                let mut best_d = dist2(nm.point(cs[0]), p);
                for (j, &c) in cs.iter().enumerate().skip(1) {
                    let d = dist2(nm.point(c), p);
                    if d < best_d || (d == best_d && c < cs[best]) {
                        best = j;
                        best_d = d;
                    }
                }
                groups[best].push(i);
            }
            for (j, members) in groups.into_iter().enumerate() {
                let id = cubes.len();
                cubes.push(Cube {
                    id,
                    level: k,
                    center: cs[j],
                    r,
                    members,
                    parent: Some(q),
                    children: Vec::new(),
                    doubling: false,
                });
                cubes[q].children.push(id);
                layer.push(id);
            }
        }
        levels.push(layer);
    }
    let masses = cubes
        .iter()
        .map(|c| c.members.iter().fold(T::zero(), |s, &i| s + nm.weight(i)))
        .collect();
    let mut lattice = Lattice {
        params: LatticeParams { max_depth: Some(depth), ..params.clone() },
        depth,
        measure: nm,
        normalization,
        cubes,
        levels,
        masses,
    };
    lattice.annotate_doubling();
    Ok(lattice)
}

impl<T: Real> Lattice<T> {
    /// Sets every cube's doubling flag: μ(100B(Q)) ≤ C0 μ(B(Q)).
    pub fn annotate_doubling(&mut self) {
        let c0 = self.params.c0;
        let flags: Vec<bool> = self
            .cubes
            .iter()
            .map(|q| {
                let x = self.measure.point(q.center);
                let big = self.measure.ball_mass_unchecked(x, lit::<T>(100.0) * q.r);
                let small = self.measure.ball_mass_unchecked(x, q.r);
                big <= c0 * small
            })
            .collect();
        for (q, f) in self.cubes.iter_mut().zip(flags) {
            q.doubling = f;
        }
    }

    pub fn params(&self) -> &LatticeParams<T> {
        &self.params
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// The normalized measure the lattice was built on.
    pub fn measure(&self) -> &DiscreteMeasure<T> {
        &self.measure
    }

    pub fn normalization(&self) -> &Normalization<T> {
        &self.normalization
    }

    pub fn cubes(&self) -> &[Cube<T>] {
        &self.cubes
    }

    pub fn cube(&self, id: usize) -> Result<&Cube<T>> {
        self.cubes.get(id).ok_or(Error::CubeNotFound(id))
    }

    pub fn levels(&self) -> &[Vec<usize>] {
        &self.levels
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    /// μ(Q) in normalized mass units (mass is unchanged by normalization).
    pub fn mass(&self, id: usize) -> T {
        self.masses[id]
    }

    pub fn center(&self, id: usize) -> &[T] {
        self.measure.point(self.cubes[id].center)
    }

    /// ℓ(Q) = 56 C0 A0^{-k}.
    pub fn side_length(&self, id: usize) -> T {
        lit::<T>(56.0) * self.params.c0 * self.params.a0.powi(-(self.cubes[id].level as i32))
    }

    /// Radius of B_Q = 28 B(Q).
    pub fn big_radius(&self, id: usize) -> T {
        lit::<T>(28.0) * self.cubes[id].r
    }

    /// Θ(2B_Q) = μ(B(x_Q, 56 r(Q))) / (56 r(Q))^n.
    pub fn theta_2b(&self, id: usize) -> T {
        let rad = lit::<T>(56.0) * self.cubes[id].r;
        self.measure.ball_mass_unchecked(self.center(id), rad) / rad.powi(self.measure.dim_param() as i32)
    }

    /// Θ(100B(Q)).
    pub fn theta_100b(&self, id: usize) -> T {
        let rad = lit::<T>(100.0) * self.cubes[id].r;
        self.measure.ball_mass_unchecked(self.center(id), rad) / rad.powi(self.measure.dim_param() as i32)
    }

    /// Whether `q` equals `s` or lies below it.
    pub fn is_descendant(&self, q: usize, s: usize) -> bool {
        let mut cur = Some(q);
        while let Some(c) = cur {
            if c == s {
                return true;
            }
            if self.cubes[c].level <= self.cubes[s].level {
                return false;
            }
            cur = self.cubes[c].parent;
        }
        false
    }

    /// All cubes of the subtree rooted at `q`, preorder.
    pub fn subtree(&self, q: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![q];
        while let Some(c) = stack.pop() {
            out.push(c);
            for &ch in self.cubes[c].children.iter().rev() {
                stack.push(ch);
            }
        }
        out
    }

    /// MD(Q): maximal doubling strict descendants of Q.
    pub fn maximal_doubling(&self, q: usize) -> Result<MaximalDoubling> {
        self.cube(q)?;
        let mut cubes = Vec::new();
        let mut remainder = Vec::new();
        let mut stack: Vec<usize> = self.cubes[q].children.iter().rev().copied().collect();
        while let Some(c) = stack.pop() {
            if self.cubes[c].doubling {
                cubes.push(c);
            } else if self.cubes[c].children.is_empty() {
                remainder.extend_from_slice(&self.cubes[c].members);
            } else {
                stack.extend(self.cubes[c].children.iter().rev());
            }
        }
        if self.cubes[q].children.is_empty() {
            remainder.extend_from_slice(&self.cubes[q].members);
        }
        remainder.sort_unstable();
        Ok(MaximalDoubling { cubes, remainder })
    }

    /// δ_μ(Q, S) = Σ_{y ∈ 2B_S \ 2B_Q} w_y |y − x_Q|^{-n}.
    pub fn delta_mu(&self, q: usize, s: usize) -> Result<T> {
        self.cube(q)?;
        self.cube(s)?;
        if !self.is_descendant(q, s) {
            return Err(Error::NotNested { inner: q, outer: s });
        }
        let n = self.measure.dim_param() as i32;
        let xq = self.center(q);
        let rq = lit::<T>(56.0) * self.cubes[q].r;
        let rq2 = rq * rq;
        let mut s_sum = T::zero();
        for i in self.measure.ball_indices(self.center(s), lit::<T>(56.0) * self.cubes[s].r) {
            let y = self.measure.point(i);
            let d2 = dist2(y, xq);
            if d2 >= rq2 {
                s_sum = s_sum + self.measure.weight(i) / d2.sqrt().powi(n);
            }
        }
        Ok(s_sum)
    }

    /// Both sides of Θ(100B(Q)) ≤ (C0A0)^d A0^{-9d(J(Q)−J(R)−1)} Θ(100B(R)).
    pub fn density_drop_check(&self, q: usize, r: usize) -> Result<DensityDropReport<T>> {
        self.cube(q)?;
        self.cube(r)?;
        if !self.is_descendant(q, r) {
            return Err(Error::NotNested { inner: q, outer: r });
        }
        let mut cur = self.cubes[q].parent;
        while let Some(c) = cur {
            if c == r {
                break;
            }
            if self.cubes[c].doubling {
                return Err(Error::IntermediateDoubling(c));
            }
            cur = self.cubes[c].parent;
        }
        let d = self.measure.ambient_dim() as i32;
        let gap = self.cubes[q].level - self.cubes[r].level;
        let expo = gap as i32 - 1;
        let a0 = self.params.a0;
        let pref = (self.params.c0 * a0).powi(d);
        let theta_r = self.theta_100b(r);
        let lhs = self.theta_100b(q);
        let rhs = pref * a0.powi(-9 * d * expo) * theta_r;
        let achieved_exponent = (expo != 0 && lhs > T::zero() && theta_r > T::zero()).then(|| {
            -(lhs / (pref * theta_r)).ln() / (a0.ln() * lit::<T>(expo as f64))
        });
        Ok(DensityDropReport { lhs, rhs, holds: lhs <= rhs, generation_gap: gap, achieved_exponent })
    }

    pub fn check_invariants(&self) -> LatticeReport {
        let n_atoms = self.measure.len();
        let mut partition_ok = true;
        let mut owner: Vec<Vec<usize>> = Vec::with_capacity(self.levels.len());
        for layer in &self.levels {
            let mut seen = vec![usize::MAX; n_atoms];
            for &q in layer {
                for &i in &self.cubes[q].members {
                    if seen[i] != usize::MAX {
                        partition_ok = false;
                    }
                    seen[i] = q;
                }
            }
            if seen.iter().any(|&s| s == usize::MAX) {
                partition_ok = false;
            }
            owner.push(seen);
        }
        let mut nesting_ok = true;
        for q in &self.cubes {
            if q.children.is_empty() {
                continue;
            }
            let mut union: Vec<usize> = q.children.iter().flat_map(|&c| self.cubes[c].members.iter().copied()).collect();
            union.sort_unstable();
            let mut own = q.members.clone();
            own.sort_unstable();
            if union != own {
                nesting_ok = false;
            }
            if q.children.iter().any(|&c| self.cubes[c].parent != Some(q.id) || self.cubes[c].level != q.level + 1) {
                nesting_ok = false;
            }
        }
        let mut disjoint_5b_ok = true;
        let mut radius_bounds_ok = true;
        for (k, layer) in self.levels.iter().enumerate() {
            let lo = self.params.a0.powi(-(k as i32));
            for &q in layer {
                let r = self.cubes[q].r;
                if !(r >= lo && r <= self.params.c0 * lo) {
                    radius_bounds_ok = false;
                }
            }
            for (a, &q) in layer.iter().enumerate() {
                for &p in &layer[a + 1..] {
                    let sum = lit::<T>(5.0) * (self.cubes[q].r + self.cubes[p].r);
                    if dist2(self.center(q), self.center(p)) < sum * sum {
                        disjoint_5b_ok = false;
                    }
                }
            }
        }
        let mut outer = 0;
        let mut inner = 0;
        let mut ball_nesting = 0;
        for q in &self.cubes {
            let x = self.center(q.id);
            let big = lit::<T>(28.0) * q.r;
            outer += q.members.iter().filter(|&&i| dist2(self.measure.point(i), x) >= big * big).count();
            inner += self
                .measure
                .ball_indices(x, q.r)
                .into_iter()
                .filter(|&i| owner[q.level][i] != q.id)
                .count();
            if let Some(p) = q.parent {
                let slack = crate::linalg::dist(x, self.center(p)) + big;
                if slack > self.big_radius(p) {
                    ball_nesting += 1;
                }
            }
        }
        LatticeReport {
            partition_ok,
            nesting_ok,
            disjoint_5b_ok,
            radius_bounds_ok,
            outer_containment_violations: outer,
            inner_containment_violations: inner,
            ball_nesting_violations: ball_nesting,
            levels: self.levels.len(),
            cubes: self.cubes.len(),
        }
    }

    pub fn dump(&self, include_members: bool) -> LatticeDump<T> {
        LatticeDump {
            c0: self.params.c0,
            a0: self.params.a0,
            depth: self.depth,
            normalization: self.normalization.clone(),
            cubes: self
                .cubes
                .iter()
                .map(|q| CubeRecord {
                    id: q.id,
                    level: q.level,
                    center: self.center(q.id).to_vec(),
                    r: q.r,
                    parent: q.parent,
                    children: q.children.clone(),
                    members_count: q.members.len(),
                    doubling: q.doubling,
                    members: include_members.then(|| q.members.clone()),
                })
                .collect(),
        }
    }
}
