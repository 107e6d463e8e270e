mod common;

use std::collections::BTreeSet;

use common::*;
use conical_gmt::corona::{build_top, verify_corona, CoronaContext, CoronaParams};
use conical_gmt::lattice::{build_lattice, Lattice, LatticeParams};
use conical_gmt::synth::{generate, GeneratorSpec};
use conical_gmt::{DiscreteMeasure, Plane};

fn d(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn cantor_direction() -> Plane<f64> {
    Plane::new(&[unit(std::f64::consts::FRAC_PI_2 + 0.3)]).unwrap()
}

fn brute_key_cone(l: &Lattice<f64>, q: usize, p: usize, params: &CoronaParams<f64>, v: &[f64]) -> bool {
    let m = l.measure();
    let (cq, cp) = (l.cube(q).unwrap(), l.cube(p).unwrap());
    let gap = cq
        .members
        .iter()
        .flat_map(|&i| cp.members.iter().map(move |&j| (i, j)))
        .map(|(i, j)| d(m.point(i), m.point(j)))
        .fold(f64::INFINITY, f64::min);
    if gap < params.m * cp.r {
        return false;
    }
    let xq = l.center(q);
    let half = params.energy.alpha / 2.0;
    cp.members.iter().any(|&j| {
        let y = m.point(j);
        d(y, xq) >= params.m * 28.0 * cq.r
            && cq.members.iter().any(|&i| {
                let diff: Vec<f64> = y.iter().zip(m.point(i)).map(|(a, b)| a - b).collect();
                let rho = norm(&diff);
                rho > 0.0 && dist_to_line(&diff, v) < half * rho
            })
    })
}

#[test]
fn key_cone_matches_brute_force() {
    for (spec, angle) in [(GeneratorSpec::four_corner(3), std::f64::consts::FRAC_PI_2 + 0.3), (GeneratorSpec::graph(200, 0.5), 0.2)] {
        let m = generate::<f64>(&spec).unwrap().measure;
        let l = build_lattice(&m, &LatticeParams { c0: 2.0, a0: 8.0, max_depth: Some(3) }).unwrap();
        let mut params = CoronaParams::with_defaults(Plane::new(&[unit(angle)]).unwrap(), 0.5, 1.0);
        params.m = 1.5;
        params.t = 15.0;
        params.lambda = 6.0;
        let ctx = CoronaContext::new(&l, &params).unwrap();
        let mut positives = 0;
        for q in 0..l.len() {
            for p in 0..l.len() {
                let want = brute_key_cone(&l, q, p, &params, &unit(angle));
                assert_eq!(ctx.key_cone_exclusion(q, p).unwrap(), want, "cubes {q}, {p}");
                positives += usize::from(want);
            }
        }
        assert!(positives > 0, "oracle never fires ({} cubes)", l.len());
    }
}

#[test]
fn trees_are_structurally_sound() {
    let cases: Vec<(DiscreteMeasure<f64>, Plane<f64>)> = vec![
        (generate(&GeneratorSpec::four_corner(4)).unwrap().measure, cantor_direction()),
        (generate(&GeneratorSpec::graph(600, 0.25)).unwrap().measure, Plane::coordinate(2, &[1]).unwrap()),
    ];
    for (m, v) in cases {
        let l = build_lattice(&m, &LatticeParams::default()).unwrap();
        let params = CoronaParams::with_defaults(v, 0.5, 1.0);
        let res = build_top(&l, &params).unwrap();
        let ctx = CoronaContext::new(&l, &params).unwrap();
        let ver = verify_corona(&ctx, &res);
        assert!(ver.hard_ok(), "{ver:?}");
        assert_eq!(ver.trees, res.trees.len());

        let tops: BTreeSet<usize> = res.top.iter().copied().collect();
        assert!(tops.contains(&l.root()));
        for t in &res.trees {
            assert!(tops.contains(&t.root));
            let stops: Vec<usize> = t.stop().collect();
            for (a, &s) in stops.iter().enumerate() {
                for &u in &stops[a + 1..] {
                    assert!(!l.is_descendant(s, u) && !l.is_descendant(u, s));
                }
            }
            for &s in &t.sep {
                assert!(stops.contains(&s));
            }
            for (a, &s) in t.sep.iter().enumerate() {
                for &u in &t.sep[a + 1..] {
                    assert!(!ctx.t_neighbours(s, u), "Sep members {s} and {u} are t-neighbours");
                }
            }
            for &nx in &t.next {
                assert!(tops.contains(&nx), "Next cube {nx} does not start a tree");
                assert!(l.cube(nx).unwrap().doubling);
            }
            let mass: f64 = t.ld.iter().map(|&q| l.mass(q)).sum::<f64>() / l.mass(t.root);
            assert!((mass - t.ld_fraction).abs() <= 1e-12);
            let covered: BTreeSet<usize> = stops.iter().flat_map(|&s| l.cube(s).unwrap().members.clone()).collect();
            let good: BTreeSet<usize> = t.good.iter().copied().collect();
            let members: BTreeSet<usize> = l.cube(t.root).unwrap().members.iter().copied().collect();
            assert_eq!(good, &members - &covered);
        }
    }
}

#[test]
fn cantor_packing_ratio_stays_bounded() {
    let ratios: Vec<f64> = (3..=5)
        .map(|g| {
            let m = generate::<f64>(&GeneratorSpec::four_corner(g)).unwrap().measure;
            let l = build_lattice(&m, &LatticeParams::default()).unwrap();
            let res = build_top(&l, &CoronaParams::with_defaults(cantor_direction(), 0.5, 1.0)).unwrap();
            let led = &res.ledger;
            let want = led.top_sum / (led.c1.powf(1.0) * led.total_mass + led.energy_total);
            assert!((led.ratio - want).abs() <= 1e-12 * want);
            led.ratio
        })
        .collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    assert!(lo > 0.0 && hi / lo <= 3.0, "{ratios:?}");
}

#[test]
fn ledger_sums_match_tree_records() {
    let m = generate::<f64>(&GeneratorSpec::four_corner(3)).unwrap().measure;
    let l = build_lattice(&m, &LatticeParams::default()).unwrap();
    let params = CoronaParams::with_defaults(cantor_direction(), 0.5, 1.0);
    let res = build_top(&l, &params).unwrap();
    let sum: f64 = res
        .trees
        .iter()
        .map(|t| {
            let rad = 56.0 * l.cube(t.root).unwrap().r;
            let nm = l.measure();
            let x = l.center(t.root);
            let theta = (0..nm.len()).filter(|&i| d(nm.point(i), x) < rad).map(|i| nm.weight(i)).sum::<f64>() / rad;
            theta * l.mass(t.root)
        })
        .sum();
    assert!((sum - res.ledger.top_sum).abs() <= 1e-12 * sum);
    assert_eq!(res.ledger.top_count, res.trees.len());
}
