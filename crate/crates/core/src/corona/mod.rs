//! Stopping-time corona decomposition of a lattice into trees, each with an
//! approximating Lipschitz graph, and the packing estimate for tree roots.
//!
//! Everything is evaluated on the lattice's normalized measure.

mod graph;

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{total_energy, ConeProfile, EnergySpec};
use crate::error::{Error, Result};
use crate::geometry::{in_cone, Plane};
use crate::lattice::Lattice;
use crate::linalg::{dist, dist2};
use crate::scalar::{lit, pairwise_sum, Real};

pub use graph::{fit_lipschitz_graph, fit_lipschitz_graph_lenient, half_cone_violations, FitReport, LipschitzGraph};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CoronaParams<T> {
    /// High-density constant A.
    pub a: T,
    /// Low-density constant τ.
    pub tau: T,
    /// Energy threshold ε.
    pub epsilon: T,
    /// Separation constant t.
    pub t: T,
    /// Key-estimate constant M.
    pub m: T,
    /// Graph-proximity constant Λ.
    pub lambda: T,
    /// Direction V, aperture α, exponent p and window η.
    pub energy: EnergySpec<T>,
}

impl<T: Real> CoronaParams<T> {
    /// A = 10, τ = 0.01, ε = 0.1, η = 0.1, M = 4/α, t = 10M, Λ = 4M.
    pub fn with_defaults(direction: Plane<T>, alpha: T, p: T) -> Self {
        let m = lit::<T>(4.0) / alpha;
        let mut energy = EnergySpec::new(direction, alpha, p, T::infinity());
        energy.eta = lit(0.1);
        Self {
            a: lit(10.0),
            tau: lit(0.01),
            epsilon: lit(0.1),
            t: lit::<T>(10.0) * m,
            m,
            lambda: lit::<T>(4.0) * m,
            energy,
        }
    }

    pub fn validate(&self, lattice: &Lattice<T>) -> Result<()> {
        self.energy.validate(lattice.measure())?;
        let bad = |what: &str| Err(Error::InvalidParams(what.to_string()));
        if !(self.a > T::one()) {
            return bad("A must exceed 1");
        }
        if !(self.tau > T::zero() && self.tau < T::one()) {
            return bad("tau must lie in (0,1)");
        }
        if !(self.epsilon >= T::zero() && self.epsilon < T::one()) {
            return bad("epsilon must lie in [0,1)");
        }
        if !(self.m > T::one()) {
            return bad("M must exceed 1");
        }
        if !(self.t > self.m) {
            return bad("t must exceed M");
        }
        if !(self.lambda > lit::<T>(2.0) * self.m) {
            return bad("Lambda must exceed 2M");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum StopKind {
    Bce,
    Hd,
    Ld,
}

/// Θ(2B_Q), E(Q) and the accumulated Σ_{Q⊂P⊂R} E(P) of one tree cube.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CubeLedger<T> {
    pub id: usize,
    pub theta: T,
    pub energy: T,
    pub energy_sum: T,
    pub stop: Option<StopKind>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TreeResult<T> {
    pub root: usize,
    pub theta_root: T,
    /// Cubes of D(R) not strictly inside a stop cube, preorder.
    pub tree: Vec<usize>,
    pub hd: Vec<usize>,
    pub ld: Vec<usize>,
    pub bce: Vec<usize>,
    /// Cubes of R not inside any cube of Next(R).
    pub tr: Vec<usize>,
    pub next: Vec<usize>,
    pub sep: Vec<usize>,
    pub sep_star: Vec<usize>,
    /// Atoms of R in no stop cube.
    pub good: Vec<usize>,
    /// Atom indices of the graph anchors actually used.
    pub anchors: Vec<usize>,
    pub graph: LipschitzGraph<T>,
    /// Violations and drops, with atom indices.
    pub fit: FitReport,
    pub ledger: Vec<CubeLedger<T>>,
    /// Σ_{Q∈LD(R)} μ(Q) / μ(R).
    pub ld_fraction: T,
}

impl<T: Real> TreeResult<T> {
    pub fn stop(&self) -> impl Iterator<Item = usize> + '_ {
        self.hd.iter().chain(&self.ld).chain(&self.bce).copied()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PackingLedger<T> {
    pub top_count: usize,
    /// Σ_{R∈Top} Θ(2B_R)^p μ(R).
    pub top_sum: T,
    pub c1: T,
    pub total_mass: T,
    /// E_{μ,p}(R^d, V, α).
    pub energy_total: T,
    /// C1^p μ(R^d) + E_{μ,p}(R^d, V, α).
    pub denominator: T,
    pub ratio: T,
    pub tau_sqrt: T,
    pub max_ld_fraction: T,
    pub trees_above_ld_bound: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CoronaResult<T> {
    pub top: Vec<usize>,
    pub trees: Vec<TreeResult<T>>,
    pub ledger: PackingLedger<T>,
}

/// Lattice plus cached Θ(2B_Q), E(Q) and cube extents for one parameter set.
pub struct CoronaContext<'a, T> {
    lattice: &'a Lattice<T>,
    params: CoronaParams<T>,
    theta: Vec<T>,
    energy: Vec<T>,
    extent: Vec<T>,
}

impl<'a, T: Real> CoronaContext<'a, T> {
    pub fn new(lattice: &'a Lattice<T>, params: &CoronaParams<T>) -> Result<Self> {
        params.validate(lattice)?;
        let m = lattice.measure();
        let spec = &params.energy;
        let n = m.dim_param();
        let radii: Vec<T> = (0..lattice.levels().len())
            .map(|k| lattice.params().a0.powi(-(k as i32)))
            .collect();
        let outer = T::one() / spec.eta;
        let windows: Vec<Vec<T>> = (0..m.len())
            .into_par_iter()
            .map(|i| {
                let prof = ConeProfile::build(m, m.point(i), &spec.direction, spec.alpha, outer);
                radii.iter().map(|&r| prof.window_energy(spec.eta * r, r / spec.eta, n, spec.p)).collect()
            })
            .collect();
        let cubes = lattice.cubes();
        let energy = cubes
            .par_iter()
            .map(|q| {
                let terms: Vec<T> = m
                    .ball_indices(lattice.center(q.id), lit::<T>(56.0) * q.r)
                    .into_iter()
                    .map(|i| m.weight(i) * windows[i][q.level])
                    .collect();
                pairwise_sum(&terms) / lattice.mass(q.id)
            })
            .collect();
        let theta = (0..cubes.len()).into_par_iter().map(|q| lattice.theta_2b(q)).collect();
        let extent = cubes
            .par_iter()
            .map(|q| {
                let x = lattice.center(q.id);
                q.members.iter().fold(T::zero(), |e, &i| e.max(dist(m.point(i), x)))
            })
            .collect();
        Ok(Self { lattice, params: params.clone(), theta, energy, extent })
    }

    pub fn lattice(&self) -> &Lattice<T> {
        self.lattice
    }

    pub fn params(&self) -> &CoronaParams<T> {
        &self.params
    }

    /// Cached Θ(2B_Q).
    pub fn theta(&self, q: usize) -> T {
        self.theta[q]
    }

    /// Cached E(Q).
    pub fn cube_energy(&self, q: usize) -> T {
        self.energy[q]
    }

    /// Stopping label of `q` given the accumulated energy `sum` and Θ(2B_R).
    pub fn label(&self, q: usize, sum: T, theta_root: T) -> Option<StopKind> {
        let p = &self.params;
        if sum > p.epsilon * theta_root.powf(p.energy.p) {
            Some(StopKind::Bce)
        } else if self.lattice.cubes()[q].doubling && self.theta[q] > p.a * theta_root {
            Some(StopKind::Hd)
        } else if self.theta[q] < p.tau * theta_root {
            Some(StopKind::Ld)
        } else {
            None
        }
    }

    /// Set distance between the members of two cubes.
    pub fn cube_distance(&self, q: usize, p: usize) -> T {
        self.cube_distance_below(q, p, T::zero()).1
    }

    /// (dist ≤ bound, dist or a lower bound exceeding `bound`).
    fn cube_distance_below(&self, q: usize, p: usize, bound: T) -> (bool, T) {
        let l = self.lattice;
        let m = l.measure();
        let centers = dist(l.center(q), l.center(p));
        let lower = centers - self.extent[q] - self.extent[p];
        if lower > bound {
            return (false, lower);
        }
        let mut best = T::infinity();
        for &i in &l.cubes()[q].members {
            for &j in &l.cubes()[p].members {
                best = best.min(dist2(m.point(i), m.point(j)));
            }
            if bound > T::zero() && best <= bound * bound {
                return (true, best.sqrt());
            }
        }
        let best = best.sqrt();
        (best <= bound, best)
    }

    pub fn t_neighbours(&self, q: usize, p: usize) -> bool {
        let t = self.params.t;
        let (rq, rp) = (self.lattice.cubes()[q].r, self.lattice.cubes()[p].r);
        rq / t <= rp && rp <= t * rq && self.cube_distance_below(q, p, t * (rq + rp)).0
    }

    /// P ∩ K^{1/2}_Q \ MB_Q ≠ ∅ and dist(Q, P) ≥ M r(P).
    pub fn key_cone_exclusion(&self, q: usize, p: usize) -> Result<bool> {
        key_cone_exclusion(self.lattice, q, p, &self.params)
    }

    pub fn stopping_decomposition(&self, root: usize) -> Result<TreeResult<T>> {
        let l = self.lattice;
        let cube = l.cube(root)?;
        if !cube.doubling && root != l.root() {
            return Err(Error::NotDoublingRoot(root));
        }
        let theta_root = self.theta[root];
        let mut tree = Vec::new();
        let mut ledger = Vec::new();
        let (mut hd, mut ld, mut bce) = (Vec::new(), Vec::new(), Vec::new());
        let mut stack = vec![(root, T::zero())];
        while let Some((q, above)) = stack.pop() {
            let sum = above + self.energy[q];
            let stop = self.label(q, sum, theta_root);
            tree.push(q);
            ledger.push(CubeLedger { id: q, theta: self.theta[q], energy: self.energy[q], energy_sum: sum, stop });
            match stop {
                Some(StopKind::Bce) => bce.push(q),
                Some(StopKind::Hd) => hd.push(q),
                Some(StopKind::Ld) => ld.push(q),
                None => {
                    for &c in l.cubes()[q].children.iter().rev() {
                        stack.push((c, sum));
                    }
                }
            }
        }
        let mut stop: Vec<usize> = hd.iter().chain(&ld).chain(&bce).copied().collect();
        stop.sort_by_key(|&q| (l.cubes()[q].level, q));
        let m = l.measure();
        let mut in_stop = vec![false; m.len()];
        for &q in &stop {
            for &i in &l.cubes()[q].members {
                in_stop[i] = true;
            }
        }
        let good: Vec<usize> = cube.members.iter().copied().filter(|&i| !in_stop[i]).collect();
        let mut is_good = vec![false; m.len()];
        for &i in &good {
            is_good[i] = true;
        }

        let mut next = Vec::new();
        for &q in &stop {
            next.extend(l.maximal_doubling(q)?.cubes);
        }
        next.sort_unstable();
        let next_set: HashSet<usize> = next.iter().copied().collect();
        let mut tr = Vec::new();
        let mut walk = vec![root];
        while let Some(q) = walk.pop() {
            if next_set.contains(&q) {
                continue;
            }
            tr.push(q);
            walk.extend(l.cubes()[q].children.iter().rev());
        }

        let mut sep: Vec<usize> = Vec::new();
        for &q in &stop {
            if !sep.iter().any(|&p| self.t_neighbours(q, p)) {
                sep.push(q);
            }
        }
        let ball = |q: usize| lit::<T>(56.0) * self.params.m * l.cubes()[q].r;
        let sep_star: Vec<usize> = sep
            .iter()
            .copied()
            .filter(|&q| {
                let no_good = m.ball_indices(l.center(q), ball(q)).into_iter().all(|i| !is_good[i]);
                let not_nested = sep
                    .iter()
                    .all(|&p| p == q || dist(l.center(p), l.center(q)) + ball(p) > ball(q));
                no_good && not_nested
            })
            .collect();

        let mut anchors: Vec<usize> = sep_star.iter().map(|&q| l.cubes()[q].center).collect();
        let mut priority = vec![0u8; anchors.len()];
        anchors.extend_from_slice(&good);
        priority.resize(anchors.len(), 1);
        let points: Vec<Vec<T>> = anchors.iter().map(|&i| m.point(i).to_vec()).collect();
        let (graph, mut fit) =
            fit_lipschitz_graph_lenient(&points, &self.params.energy.direction, self.params.energy.alpha, &priority)?;
        for pair in fit.violations.iter_mut() {
            *pair = (anchors[pair.0], anchors[pair.1]);
        }
        let dropped: HashSet<usize> = fit.dropped.iter().copied().collect();
        fit.dropped = fit.dropped.iter().map(|&k| anchors[k]).collect();
        let anchors = anchors
            .into_iter()
            .enumerate()
            .filter(|(k, _)| !dropped.contains(k))
            .map(|(_, i)| i)
            .collect();

        let ld_mass = ld.iter().fold(T::zero(), |s, &q| s + l.mass(q));
        Ok(TreeResult {
            root,
            theta_root,
            tree,
            hd,
            ld,
            bce,
            tr,
            next,
            sep,
            sep_star,
            good,
            anchors,
            graph,
            fit,
            ledger,
            ld_fraction: ld_mass / l.mass(root),
        })
    }

    /// Runs the Top recursion from the lattice root and fills the packing
    /// ledger.
    pub fn build_top(&self) -> Result<CoronaResult<T>> {
        let l = self.lattice;
        let mut trees = Vec::new();
        let mut layer = vec![l.root()];
        while !layer.is_empty() {
            let done: Vec<TreeResult<T>> =
                layer.par_iter().map(|&r| self.stopping_decomposition(r)).collect::<Result<_>>()?;
            let mut next: Vec<usize> = done.iter().flat_map(|t| t.next.iter().copied()).collect();
            next.sort_unstable();
            trees.extend(done);
            layer = next;
        }
        trees.sort_by_key(|t| t.root);
        let top: Vec<usize> = trees.iter().map(|t| t.root).collect();
        let ledger = self.packing_ledger(&trees)?;
        Ok(CoronaResult { top, trees, ledger })
    }

    fn packing_ledger(&self, trees: &[TreeResult<T>]) -> Result<PackingLedger<T>> {
        let l = self.lattice;
        let m = l.measure();
        let p = self.params.energy.p;
        let terms: Vec<T> = trees.iter().map(|t| t.theta_root.powf(p) * l.mass(t.root)).collect();
        let top_sum = pairwise_sum(&terms);
        let c1 = m.growth_constant(T::one(), usize::MAX, 0)?.c1;
        let total_mass = m.total_mass();
        let energy_total = total_energy(m, &self.params.energy.direction, self.params.energy.alpha, p)?;
        let denominator = c1.powf(p) * total_mass + energy_total;
        let tau_sqrt = self.params.tau.sqrt();
        Ok(PackingLedger {
            top_count: trees.len(),
            top_sum,
            c1,
            total_mass,
            energy_total,
            denominator,
            ratio: top_sum / denominator,
            tau_sqrt,
            max_ld_fraction: trees.iter().fold(T::zero(), |a, t| a.max(t.ld_fraction)),
            trees_above_ld_bound: trees.iter().filter(|t| t.ld_fraction > tau_sqrt).count(),
        })
    }
}

/// Whether some atom y of P lies in K(q, V, α/2) for an atom q of Q with
/// |y − x_Q| ≥ M r(B_Q), and dist(Q, P) ≥ M r(P).
pub fn key_cone_exclusion<T: Real>(lattice: &Lattice<T>, q: usize, p: usize, params: &CoronaParams<T>) -> Result<bool> {
    let cq = lattice.cube(q)?;
    let cp = lattice.cube(p)?;
    let m = lattice.measure();
    let mr = params.m * lit::<T>(28.0) * cq.r;
    let mut set_dist = T::infinity();
    for &i in &cq.members {
        for &j in &cp.members {
            set_dist = set_dist.min(dist2(m.point(i), m.point(j)));
        }
    }
    if set_dist.sqrt() < params.m * cp.r {
        return Ok(false);
    }
    let xq = lattice.center(q);
    let half = params.energy.alpha / lit(2.0);
    let v = &params.energy.direction;
    Ok(cp.members.iter().any(|&j| {
        let y = m.point(j);
        dist(y, xq) >= mr && cq.members.iter().any(|&i| in_cone(m.point(i), y, v, half))
    }))
}

pub fn build_top<T: Real>(lattice: &Lattice<T>, params: &CoronaParams<T>) -> Result<CoronaResult<T>> {
    CoronaContext::new(lattice, params)?.build_top()
}

pub fn stopping_decomposition<T: Real>(lattice: &Lattice<T>, root: usize, params: &CoronaParams<T>) -> Result<TreeResult<T>> {
    CoronaContext::new(lattice, params)?.stopping_decomposition(root)
}

/// Greedy maximal t-separated subfamily of `stop` in (level, id) order.
pub fn separated_family<T: Real>(ctx: &CoronaContext<'_, T>, stop: &[usize]) -> Vec<usize> {
    let mut order = stop.to_vec();
    order.sort_by_key(|&q| (ctx.lattice.cubes()[q].level, q));
    let mut sep: Vec<usize> = Vec::new();
    for q in order {
        if !sep.iter().any(|&p| ctx.t_neighbours(q, p)) {
            sep.push(q);
        }
    }
    sep
}

pub const GRAPH_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoronaVerification<T> {
    pub trees: usize,
    /// Every cube lies in exactly one Tr(R).
    pub tree_partition_ok: bool,
    /// No stop cube of a tree lies inside another.
    pub stop_disjoint_ok: bool,
    pub hd_doubling_ok: bool,
    /// Relabeling every tree cube from scratch reproduces the labels.
    pub labels_reproduced: bool,
    /// Tree cubes outside Stop(R) breaking τΘ(2B_R) ≤ Θ(2B_Q), the energy
    /// bound, or the doubling density bound.
    pub non_stopped_failures: usize,
    pub anchor_residual_max: T,
    pub good_residual_max: T,
    /// G_R atoms farther than the graph tolerance from Γ_R.
    pub good_off_graph: usize,
    pub good_on_graph_ok: bool,
    /// Half-cone pairs found among anchors after fitting.
    pub anchor_cone_violations: usize,
    pub dropped_anchors: usize,
    pub max_density_ratio: T,
    /// Fraction of tree cubes whose ΛB_Q contains an anchor.
    pub graph_proximity_fraction: T,
    pub note: String,
}

impl<T> CoronaVerification<T> {
    pub fn hard_ok(&self) -> bool {
        self.tree_partition_ok
            && self.stop_disjoint_ok
            && self.hd_doubling_ok
            && self.labels_reproduced
            && self.non_stopped_failures == 0
            && self.good_on_graph_ok
    }
}

pub fn verify_corona<T: Real>(ctx: &CoronaContext<'_, T>, result: &CoronaResult<T>) -> CoronaVerification<T> {
    let l = ctx.lattice;
    let m = l.measure();
    let params = &ctx.params;
    let p = params.energy.p;
    let mut owners = vec![0usize; l.len()];
    for t in &result.trees {
        for &q in &t.tr {
            owners[q] += 1;
        }
    }
    let tree_partition_ok = owners.iter().all(|&c| c == 1);
    let per_tree: Vec<_> = result
        .trees
        .par_iter()
        .map(|t| {
            let theta_r = l.theta_2b(t.root);
            let stop: Vec<usize> = t.stop().collect();
            let disjoint = stop
                .iter()
                .all(|&a| stop.iter().all(|&b| a == b || !l.is_descendant(a, b)));
            let hd_ok = t.hd.iter().all(|&q| l.cubes()[q].doubling);
            let mut relabel_ok = true;
            let mut failures = 0usize;
            let mut ratio = T::zero();
            let mut sums = std::collections::HashMap::new();
            for &q in &t.tree {
                let above = l.cubes()[q]
                    .parent
                    .filter(|_| q != t.root)
                    .and_then(|pq| sums.get(&pq).copied())
                    .unwrap_or(T::zero());
                let sum = above + ctx.energy[q];
                sums.insert(q, sum);
                let theta_q = l.theta_2b(q);
                ratio = ratio.max(theta_q / theta_r);
                let label = ctx.label(q, sum, theta_r);
                let recorded = t.ledger.iter().find(|c| c.id == q).and_then(|c| c.stop);
                if label != recorded {
                    relabel_ok = false;
                }
                if recorded.is_none() {
                    let lower = params.tau * theta_r <= theta_q;
                    let energy = sum <= params.epsilon * theta_r.powf(p);
                    let upper = !l.cubes()[q].doubling || theta_q <= params.a * theta_r;
                    if !(lower && energy && upper) {
                        failures += 1;
                    }
                }
            }
            let anchor_res = t
                .anchors
                .iter()
                .fold(T::zero(), |a, &i| a.max(t.graph.vertical_residual(m.point(i))));
            let tol = lit::<T>(GRAPH_TOLERANCE);
            let good_res: Vec<T> = t.good.iter().map(|&i| t.graph.vertical_residual(m.point(i))).collect();
            let good_max = good_res.iter().fold(T::zero(), |a, &b| a.max(b));
            let good_off = good_res.iter().filter(|&&r| !(r <= tol)).count();
            let anchor_pts: Vec<Vec<T>> = t.anchors.iter().map(|&i| m.point(i).to_vec()).collect();
            let (cone_viol, _) = half_cone_violations(&anchor_pts, &params.energy.direction, params.energy.alpha);
            let near = t
                .tree
                .iter()
                .filter(|&&q| {
                    let rad = params.lambda * l.big_radius(q);
                    let x = l.center(q);
                    anchor_pts.iter().any(|a| dist2(a, x) < rad * rad)
                })
                .count();
            (disjoint, hd_ok, relabel_ok, failures, anchor_res, good_max, good_off, cone_viol, t.fit.dropped.len(), ratio, near, t.tree.len())
        })
        .collect();
    let mut v = CoronaVerification {
        trees: result.trees.len(),
        tree_partition_ok,
        stop_disjoint_ok: true,
        hd_doubling_ok: true,
        labels_reproduced: true,
        non_stopped_failures: 0,
        anchor_residual_max: T::zero(),
        good_residual_max: T::zero(),
        good_off_graph: 0,
        good_on_graph_ok: true,
        anchor_cone_violations: 0,
        dropped_anchors: 0,
        max_density_ratio: T::zero(),
        graph_proximity_fraction: T::zero(),
        note: format!(
            "graph constant is per component; the full map may be up to sqrt({}) times steeper",
            m.dim_param()
        ),
    };
    let (mut near_total, mut tree_total) = (0usize, 0usize);
    for (disjoint, hd_ok, relabel_ok, failures, ares, gres, goff, cv, dropped, ratio, near, size) in per_tree {
        v.stop_disjoint_ok &= disjoint;
        v.hd_doubling_ok &= hd_ok;
        v.labels_reproduced &= relabel_ok;
        v.non_stopped_failures += failures;
        v.anchor_residual_max = v.anchor_residual_max.max(ares);
        v.good_residual_max = v.good_residual_max.max(gres);
        v.good_off_graph += goff;
        v.anchor_cone_violations += cv;
        v.dropped_anchors += dropped;
        v.max_density_ratio = v.max_density_ratio.max(ratio);
        near_total += near;
        tree_total += size;
    }
    v.good_on_graph_ok = v.good_off_graph == 0;
    v.graph_proximity_fraction = if tree_total == 0 {
        T::one()
    } else {
        lit::<T>(near_total as f64) / lit::<T>(tree_total as f64)
    };
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, LatticeParams};
    use crate::measure::DiscreteMeasure;

    fn line(n: usize) -> DiscreteMeasure<f64> {
        let pts: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / (n - 1) as f64, 0.0]).collect();
        DiscreteMeasure::new(&pts, vec![1.0 / n as f64; n], 1).unwrap()
    }

    #[test]
    fn line_decomposition_is_consistent() {
        let m = line(200);
        let l = build_lattice(&m, &LatticeParams::default()).unwrap();
        let params = CoronaParams::with_defaults(Plane::coordinate(2, &[1]).unwrap(), 0.5, 1.0);
        let ctx = CoronaContext::new(&l, &params).unwrap();
        let res = ctx.build_top().unwrap();
        assert!(res.trees.iter().all(|t| t.bce.is_empty()));
        let v = verify_corona(&ctx, &res);
        assert!(v.hard_ok(), "{v:?}");
        assert_eq!(res.ledger.energy_total, 0.0);
        assert!(res.ledger.ratio.is_finite());
    }

    #[test]
    fn zero_epsilon_stops_at_root_with_energy() {
        let pts = vec![vec![0.0, 0.0], vec![0.1, 0.5], vec![1.0, 0.2]];
        let m = DiscreteMeasure::new(&pts, vec![1.0 / 3.0; 3], 1).unwrap();
        let l = build_lattice(&m, &LatticeParams::default()).unwrap();
        let mut params = CoronaParams::with_defaults(Plane::coordinate(2, &[1]).unwrap(), 0.5, 1.0);
        params.epsilon = 0.0;
        let ctx = CoronaContext::new(&l, &params).unwrap();
        assert!(ctx.cube_energy(0) > 0.0);
        let t = ctx.stopping_decomposition(0).unwrap();
        assert_eq!(t.tree, vec![0]);
        assert_eq!(t.bce, vec![0]);
    }

    #[test]
    fn invalid_params_rejected() {
        let m = line(10);
        let l = build_lattice(&m, &LatticeParams::default()).unwrap();
        let mut params = CoronaParams::with_defaults(Plane::coordinate(2, &[1]).unwrap(), 0.5, 1.0);
        params.tau = 1.0;
        assert!(CoronaContext::new(&l, &params).is_err());
        let mut params = CoronaParams::with_defaults(Plane::coordinate(2, &[1]).unwrap(), 0.5, 1.0);
        params.t = params.m;
        assert!(CoronaContext::new(&l, &params).is_err());
    }
}
