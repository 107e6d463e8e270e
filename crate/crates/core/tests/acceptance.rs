//! End-to-end acceptance run. Criteria execute sequentially so that the
//! wall-clock budgets are not distorted by sibling tests; each prints one
//! PASS/FAIL line and the test fails if any of them does.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use common::*;
use conical_gmt::corona::{build_top, verify_corona, CoronaContext, CoronaParams, LipschitzGraph};
use conical_gmt::diagnostics::bplg::{
    cone_outside_tube_check, f_epsilon_set, graph_samples, necessary_bplg_cover, theta_m_property, theta_m_shells,
    ON_GRAPH_TOLERANCE,
};
use conical_gmt::diagnostics::{beta2, AffinePlane};
use conical_gmt::energy::{all_pointwise_energies, cube_energy, pointwise_energy, riesz_cone_sum, EnergySpec};
use conical_gmt::lattice::{build_lattice, LatticeParams};
use conical_gmt::sio::{norm_vs_generation, operator_norm, truncated_transform, Cauchy, Riesz};
use conical_gmt::synth::{generate, GeneratorKind, GeneratorSpec, MixtureComponent};
use conical_gmt::{DiscreteMeasure, Error, Plane};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn run(id: usize, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let t0 = Instant::now();
    let out = f();
    let took = t0.elapsed();
    let pass = out.pass && took < budget;
    println!(
        "{} criterion {id} ({name}): {} [{:.2}s / {}s]",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        took.as_secs_f64(),
        budget.as_secs()
    );
    pass
}

fn line(angle: f64) -> Plane<f64> {
    Plane::new(&[unit(angle)]).unwrap()
}

fn vertical() -> Plane<f64> {
    Plane::coordinate(2, &[1]).unwrap()
}

fn d(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn layer_cake() -> Outcome {
    let mut worst = 0.0f64;
    let mut checked = 0;
    for seed in 0..20u64 {
        let (pts, w) = random_cloud(500, 2, 1000 + seed);
        let m = DiscreteMeasure::new(&pts, w, 1).unwrap();
        let mut r = rng(seed);
        let v = line(r.gen_range(0.0..std::f64::consts::PI));
        let alpha = r.gen_range(0.05..0.95);
        let spec = EnergySpec::new(v.clone(), alpha, 1.0, f64::INFINITY);
        for x in &pts {
            let e = pointwise_energy(&m, x, &spec).unwrap().total;
            let s = riesz_cone_sum(&m, x, &v, alpha).unwrap();
            let rel = if s == 0.0 { e.abs() } else { (e - s).abs() / s };
            worst = worst.max(rel);
            checked += 1;
        }
    }
    Outcome { pass: worst <= 1e-9, detail: format!("{checked} vertices, max rel err {worst:.2e}") }
}

fn cone_avoidance() -> Outcome {
    let mut nonzero = 0;
    let mut total = 0;
    for lip in [0.0, 0.25, 0.5] {
        let m = generate::<f64>(&GeneratorSpec::graph(1000, lip)).unwrap().measure;
        let alpha = 0.9 / (1.0 + lip * lip).sqrt();
        let e = all_pointwise_energies(&m, &EnergySpec::new(vertical(), alpha, 1.0, f64::INFINITY)).unwrap();
        nonzero += e.iter().filter(|b| b.total != 0.0 || b.in_cone_count != 0).count();
        total += e.len();
    }
    Outcome { pass: nonzero == 0, detail: format!("{nonzero} of {total} points with positive energy") }
}

fn mean_energy(m: &DiscreteMeasure<f64>) -> f64 {
    let e = all_pointwise_energies(m, &EnergySpec::new(vertical(), 0.8, 1.0, 1.0)).unwrap();
    e.iter().map(|b| b.total).sum::<f64>() / e.len() as f64
}

fn energy_dichotomy() -> Outcome {
    let gens: Vec<f64> = (3..=7).map(f64::from).collect();
    let means: Vec<f64> = (3..=7)
        .map(|g| mean_energy(&generate::<f64>(&GeneratorSpec::four_corner(g)).unwrap().measure))
        .collect();
    let increasing = means.windows(2).all(|w| w[1] > w[0]);
    let k = gens.len() as f64;
    let (mx, my) = (gens.iter().sum::<f64>() / k, means.iter().sum::<f64>() / k);
    let sxy: f64 = gens.iter().zip(&means).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = gens.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = means.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = sxy * sxy / (sxx * syy);
    let graph: Vec<f64> = [256, 1024, 4096]
        .iter()
        .map(|&n| mean_energy(&generate::<f64>(&GeneratorSpec::graph(n, 0.5)).unwrap().measure))
        .collect();
    let (lo, hi) = graph.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let variation = if hi == 0.0 { 0.0 } else { (hi - lo) / hi };
    Outcome {
        pass: increasing && slope > 0.0 && r2 > 0.9 && variation < 0.5,
        detail: format!(
            "cantor means {:?}, slope {slope:.4}, R² {r2:.4}; graph means {graph:?}, variation {variation:.3}",
            means.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>()
        ),
    }
}

/// β² of an explicit competitor line through `through` with direction angle `phi`.
fn competitor_beta(pts: &[Vec<f64>], w: &[f64], x: &[f64], r: f64, through: &[f64], phi: f64) -> f64 {
    let u = unit(phi);
    let s: f64 = pts
        .iter()
        .zip(w)
        .filter(|(y, _)| d(y, x) < r)
        .map(|(y, wy)| {
            let diff: Vec<f64> = y.iter().zip(through).map(|(a, b)| a - b).collect();
            wy * (dist_to_line(&diff, &u) / r).powi(2)
        })
        .sum();
    (s / r).sqrt()
}

fn beta_correctness() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..50u64 {
        let (pts, w) = random_cloud(60, 2, 5000 + seed);
        let m = DiscreteMeasure::new(&pts, w.clone(), 1).unwrap();
        let x = pts[0].clone();
        let r = 0.6;
        let b = beta2(&m, &x, r).unwrap();
        let inside: Vec<usize> = (0..pts.len()).filter(|&i| d(&pts[i], &x) < r).collect();
        let mass: f64 = inside.iter().map(|&i| w[i]).sum();
        let centroid: Vec<f64> =
            (0..2).map(|k| inside.iter().map(|&i| w[i] * pts[i][k]).sum::<f64>() / mass).collect();
        let mut g = rng(seed);
        for k in 0..720 {
            let phi = k as f64 * std::f64::consts::PI / 720.0;
            let through = if k % 2 == 0 { centroid.clone() } else { pts[inside[g.gen_range(0..inside.len())]].clone() };
            let c = competitor_beta(&pts, &w, &x, r, &through, phi);
            worst = worst.max(b.beta - c);
        }
    }
    let corners: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
    let m = DiscreteMeasure::new(&corners, vec![0.25; 4], 1).unwrap();
    let sq = beta2(&m, &[0.5, 0.5], 1.0).unwrap();
    let square_ok = (sq.beta - 0.5).abs() <= 1e-12 && sq.degenerate;
    Outcome {
        pass: worst <= 1e-10 && square_ok,
        detail: format!(
            "max β₂ − competitor {worst:.2e}; square β₂ = {:.15}, degenerate {}",
            sq.beta, sq.degenerate
        ),
    }
}

fn corona_case(label: &str, m: &DiscreteMeasure<f64>, v: Plane<f64>) -> (bool, String, f64) {
    let lattice = build_lattice(m, &LatticeParams::default()).unwrap();
    let inv = lattice.check_invariants().exact_ok();
    let params = CoronaParams::with_defaults(v, 0.5, 1.0);
    let res = build_top(&lattice, &params).unwrap();
    let ctx = CoronaContext::new(&lattice, &params).unwrap();
    let ver = verify_corona(&ctx, &res);
    let nm = lattice.measure();
    let n = lattice.len();

    let mut owner = vec![0usize; n];
    for t in &res.trees {
        for &q in &t.tr {
            owner[q] += 1;
        }
    }
    let partition = owner.iter().all(|&c| c == 1);

    let theta = |q: usize| {
        let c = lattice.cube(q).unwrap();
        let rad = 56.0 * c.r;
        let x = lattice.center(q);
        (0..nm.len()).filter(|&i| d(nm.point(i), x) < rad).map(|i| nm.weight(i)).sum::<f64>() / rad
    };
    let mut energy = vec![None; n];
    let mut e = |q: usize| *energy[q].get_or_insert_with(|| cube_energy(&lattice, q, &params.energy).unwrap());
    let mut firing = 0;
    let mut missing_children = 0;
    for t in &res.trees {
        let in_tree: BTreeSet<usize> = t.tree.iter().copied().collect();
        let stops: BTreeSet<usize> = t.stop().collect();
        let theta_root = theta(t.root);
        for &q in &t.tree {
            if stops.contains(&q) {
                continue;
            }
            let mut sum = 0.0;
            let mut cur = Some(q);
            while let Some(c) = cur {
                sum += e(c);
                if c == t.root {
                    break;
                }
                cur = lattice.cube(c).unwrap().parent;
            }
            let th = theta(q);
            let slack = 1e-9;
            let bce = sum > params.epsilon * theta_root.powf(params.energy.p) * (1.0 + slack);
            let hd = lattice.cube(q).unwrap().doubling && th > params.a * theta_root * (1.0 + slack);
            let ld = th < params.tau * theta_root * (1.0 - slack);
            firing += usize::from(bce || hd || ld);
            missing_children += lattice.cube(q).unwrap().children.iter().filter(|c| !in_tree.contains(c)).count();
        }
    }
    let off_graph: usize = res
        .trees
        .iter()
        .map(|t| t.good.iter().filter(|&&i| t.graph.vertical_residual(nm.point(i)) > 1e-9).count())
        .sum();
    let ratio = res.ledger.ratio;
    let ok = inv && partition && firing == 0 && missing_children == 0 && off_graph == 0 && ver.hard_ok() && ratio.is_finite();
    let detail = format!(
        "{label}: {n} cubes, {} trees, invariants {inv}, partition {partition}, firing {firing}, off-graph {off_graph}, ratio {ratio:.3}",
        res.trees.len()
    );
    (ok, detail, ratio)
}

fn corona_suite() -> Outcome {
    let segment = generate::<f64>(&GeneratorSpec::segment(800)).unwrap().measure;
    let graph = generate::<f64>(&GeneratorSpec::graph(1500, 0.5)).unwrap().measure;
    let cantor = generate::<f64>(&GeneratorSpec::four_corner(5)).unwrap().measure;
    let (a, da, line_ratio) = corona_case("line", &segment, vertical());
    let (b, db, _) = corona_case("graph", &graph, vertical());
    let (c, dc, _) = corona_case("cantor", &cantor, line(std::f64::consts::FRAC_PI_2 + 0.3));
    Outcome { pass: a && b && c && line_ratio < 10.0, detail: format!("{da}; {db}; {dc}") }
}

fn sio_suite() -> Outcome {
    let mut g = rng(77);
    let mut pts = Vec::new();
    let mut w = Vec::new();
    for _ in 0..40 {
        let v = vec![g.gen_range(-1.0..1.0), g.gen_range(-1.0..1.0)];
        let wt = g.gen_range(0.1..1.0);
        pts.push(v.clone());
        pts.push(v.iter().map(|c: &f64| -c).collect());
        w.extend([wt, wt]);
    }
    let m = DiscreteMeasure::new(&pts, w, 1).unwrap();
    let riesz = Riesz::new(1, 2).unwrap();
    let mut sym = truncated_transform(&m, &Cauchy, 1e-3, &[0.0, 0.0]).unwrap();
    sym.extend(truncated_transform(&m, &riesz, 1e-3, &[0.0, 0.0]).unwrap());
    let symmetric_ok = sym.iter().all(|c| *c == 0.0);

    let two = DiscreteMeasure::<f64>::new(&[vec![0.0, 0.0], vec![1.0, 0.0]], vec![0.5, 0.5], 1).unwrap();
    let hand = operator_norm(&two, &Cauchy, 0.5).unwrap().norm;
    let hand_ok = (hand - 0.5).abs() <= 1e-9;

    let cantor: Vec<GeneratorSpec> = (2..=6).map(GeneratorSpec::four_corner).collect();
    let ct = norm_vs_generation::<f64, _>(&cantor, &Cauchy, 64).unwrap();
    let graphs: Vec<GeneratorSpec> = [256, 512, 1024].iter().map(|&n| GeneratorSpec::graph(n, 0.5)).collect();
    let gt = norm_vs_generation::<f64, _>(&graphs, &Cauchy, 64).unwrap();
    let converged = ct.rows.iter().chain(&gt.rows).all(|r| r.converged);
    Outcome {
        pass: symmetric_ok && hand_ok && ct.strictly_increasing && gt.max_over_min <= 1.5 && converged,
        detail: format!(
            "symmetric {symmetric_ok}, 2×2 norm {hand:.12}, cantor norms {:?}, graph max/min {:.4}, converged {converged}",
            ct.rows.iter().map(|r| format!("{:.4}", r.sup_norm)).collect::<Vec<_>>(),
            gt.max_over_min
        ),
    }
}

fn tube_fuzz() -> Outcome {
    let mut g = rng(2024);
    let mut configs = 0;
    let mut rejected = 0;
    let mut violations = 0;
    let mut min_margin = f64::INFINITY;
    while configs < 10_000 {
        let alpha: f64 = g.gen_range(0.05..0.95);
        let eps = g.gen_range(0.0..(1.0 - alpha) / 3.0) * 0.999;
        let x = vec![g.gen_range(-5.0..5.0), g.gen_range(-5.0..5.0)];
        let r = 10f64.powf(g.gen_range(-3.0..3.0));
        let phi: f64 = g.gen_range(0.0..std::f64::consts::PI);
        let w = line(phi);
        let normal = unit(phi + std::f64::consts::FRAC_PI_2);
        let shift = g.gen_range(-0.5..0.5) * eps * r;
        let tilt = (g.gen_range(-0.45..0.45) * eps).asin();
        let through: Vec<f64> = x.iter().zip(&normal).map(|(a, b)| a + shift * b).collect();
        let l = AffinePlane::new(through, line(phi + tilt)).unwrap();
        match cone_outside_tube_check(&x, r, &w, &l, alpha, eps, 1000, configs as u64) {
            Ok(t) => {
                configs += 1;
                violations += usize::from(!t.pass);
                min_margin = min_margin.min(t.min_margin / r);
            }
            Err(Error::HypothesisViolated { .. }) => rejected += 1,
            Err(e) => panic!("unexpected error {e}"),
        }
    }
    Outcome {
        pass: violations == 0,
        detail: format!("{configs} configs ({rejected} resampled), {violations} violations, min margin/r {min_margin:.3e}"),
    }
}

/// j with 2^{−j} ≤ ρ < 2^{−j+1}, read off the binary exponent.
fn shell_of(rho: f64) -> i32 {
    let e = ((rho.to_bits() >> 52) & 0x7ff) as i32 - 1022;
    1 - e
}

fn brute_shells(pts: &[Vec<f64>], theta: f64) -> Vec<BTreeSet<i32>> {
    let v = [0.0, 1.0];
    pts.iter()
        .map(|x| {
            pts.iter()
                .filter_map(|y| {
                    let diff: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
                    let rho = norm(&diff);
                    (rho > 0.0 && dist_to_line(&diff, &v) < theta * rho).then(|| shell_of(rho))
                })
                .collect()
        })
        .collect()
}

fn brute_f_eps(pts: &[Vec<f64>], w: &[f64], eps: f64) -> BTreeSet<usize> {
    (0..pts.len())
        .filter(|&i| {
            let mut radii: Vec<f64> = pts.iter().map(|y| d(y, &pts[i])).filter(|&r| r > 0.0 && r <= 1.0).collect();
            radii.push(1.0);
            radii.iter().any(|&r| {
                let mass: f64 = pts.iter().zip(w).filter(|(y, _)| d(y, &pts[i]) < r).map(|(_, wy)| wy).sum();
                mass <= eps * r
            })
        })
        .collect()
}

fn theta_m_and_f_eps() -> Outcome {
    let seg = generate::<f64>(&GeneratorSpec::segment(200)).unwrap().measure;
    let seg_pts: Vec<Vec<f64>> = seg.points().map(<[f64]>::to_vec).collect();
    let line_max = theta_m_property(&seg_pts, &vertical(), 1.0, false).unwrap().max;
    let line_f = f_epsilon_set(&seg, 0.5).unwrap().len();

    let thetas = [0.1, 0.3, 0.6, 1.0];
    let epss = [0.02, 0.1, 0.5, 2.0];
    let mut mismatches = 0;
    let mut monotone_failures = 0;
    for seed in 0..20u64 {
        let (pts, w) = random_cloud(120, 2, 9000 + seed);
        let w: Vec<f64> = w.iter().map(|x| x / 120.0).collect();
        let m = DiscreteMeasure::new(&pts, w.clone(), 1).unwrap();
        let mut prev: Option<Vec<BTreeSet<i32>>> = None;
        for &theta in &thetas {
            let got: Vec<BTreeSet<i32>> = theta_m_shells(&pts, &vertical(), theta)
                .unwrap()
                .into_iter()
                .map(|s| s.into_iter().collect())
                .collect();
            mismatches += usize::from(got != brute_shells(&pts, theta));
            if let Some(p) = &prev {
                monotone_failures += p.iter().zip(&got).filter(|(a, b)| !a.is_subset(b)).count();
            }
            prev = Some(got);
        }
        let mut prev: Option<BTreeSet<usize>> = None;
        for &eps in &epss {
            let got: BTreeSet<usize> = f_epsilon_set(&m, eps).unwrap().into_iter().collect();
            mismatches += usize::from(got != brute_f_eps(&pts, &w, eps));
            if let Some(p) = &prev {
                monotone_failures += usize::from(!p.is_subset(&got));
            }
            prev = Some(got);
        }
    }
    Outcome {
        pass: line_max == 0 && line_f == 0 && mismatches == 0 && monotone_failures == 0,
        detail: format!(
            "line max {line_max}, line |F_ε| {line_f}, brute-force mismatches {mismatches}, monotonicity failures {monotone_failures}"
        ),
    }
}

fn mixture(graph_atoms: usize, lip: f64, generation: u32, offset: [f64; 2]) -> (DiscreteMeasure<f64>, LipschitzGraph<f64>) {
    let graph_kind = GeneratorKind::LipschitzGraph { samples: graph_atoms, lip, base_dim: 1, frequency: 1.0, jitter: 0.0 };
    let spec = GeneratorSpec::new(GeneratorKind::Mixture {
        components: vec![
            MixtureComponent { spec: graph_kind.clone(), weight: 0.5, offset: None },
            MixtureComponent {
                spec: GeneratorKind::FourCornerCantor { generation },
                weight: 0.5,
                offset: Some(offset.to_vec()),
            },
        ],
    });
    let m = generate::<f64>(&spec).unwrap().measure;
    let g = generate::<f64>(&GeneratorSpec::new(graph_kind)).unwrap().measure;
    let v = vertical();
    let base = g.points().map(|x| v.perp_coords(x)).collect();
    let values = g.points().map(|x| v.coords(x)).collect();
    (m, LipschitzGraph::new(v, base, values, lip).unwrap())
}

fn cover_suite() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for (atoms, lip, generation, offset) in [(1024, 0.5, 4, [0.0, 0.3]), (900, 0.25, 5, [0.2, -0.6])] {
        let (m, graph) = mixture(atoms, lip, generation, offset);
        let rep = necessary_bplg_cover(&m, &graph, None).unwrap();
        let pts: Vec<&[f64]> = m.points().collect();
        let samples = graph_samples(&graph, &pts, 8192).unwrap();
        let off: Vec<usize> = (0..m.len())
            .filter(|&i| {
                let x = m.point(i);
                graph.vertical_residual(x) > ON_GRAPH_TOLERANCE
                    && samples.iter().all(|s| d(s, x) > ON_GRAPH_TOLERANCE)
            })
            .collect();
        let balls = &rep.balls;
        let mut overlaps = 0;
        for (a, p) in balls.iter().enumerate() {
            for q in &balls[a + 1..] {
                overlaps += usize::from(d(&p.center, &q.center) < p.radius + q.radius);
            }
        }
        let uncovered = off.iter().filter(|&&i| !balls.iter().any(|b| d(m.point(i), &b.center) < 5.0 * b.radius)).count();
        let v = [0.0, 1.0];
        let mut cone_hits = 0;
        for b in balls {
            let near: Vec<&Vec<f64>> = samples.iter().filter(|s| d(s, &b.center) < 6.0 * b.radius).collect();
            let vertices: Vec<usize> = (0..m.len()).filter(|&i| d(m.point(i), &b.center) < 5.0 * b.radius).collect();
            for &y in &vertices {
                for z in &near {
                    let diff: Vec<f64> = z.iter().zip(m.point(y)).map(|(a, c)| a - c).collect();
                    let rho = norm(&diff);
                    cone_hits += usize::from(rho > 0.0 && rho < b.radius && dist_to_line(&diff, &v) < rep.alpha * rho);
                }
            }
        }
        let case_ok = off.len() == rep.off_graph
            && overlaps == 0
            && uncovered == 0
            && cone_hits == 0
            && rep.disjoint_ok
            && rep.coverage_ok
            && rep.kj_violations == 0;
        ok &= case_ok;
        details.push(format!(
            "N={} off-graph {} balls {} overlaps {overlaps} uncovered {uncovered} K_j hits {cone_hits}",
            m.len(),
            off.len(),
            balls.len()
        ));
    }
    Outcome { pass: ok, detail: details.join("; ") }
}

#[test]
fn acceptance_criteria() {
    let s = Duration::from_secs;
    let results = [
        run(1, "layer-cake identity", s(10), layer_cake),
        run(2, "cone avoidance on graphs", s(5), cone_avoidance),
        run(3, "energy dichotomy", s(120), energy_dichotomy),
        run(4, "beta2 correctness", s(30), beta_correctness),
        run(5, "corona structure", s(120), corona_suite),
        run(6, "SIO suite", s(180), sio_suite),
        run(7, "cone-outside-tube fuzz", s(60), tube_fuzz),
        run(8, "(theta,M) and F_eps", s(30), theta_m_and_f_eps),
        run(9, "necessary-condition cover", s(30), cover_suite),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, &p)| !p).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
