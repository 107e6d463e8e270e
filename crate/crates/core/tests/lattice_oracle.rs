mod common;

use std::collections::BTreeSet;

use common::*;
use conical_gmt::lattice::{build_lattice, Lattice, LatticeParams};
use conical_gmt::synth::{generate, GeneratorSpec};
use conical_gmt::{DiscreteMeasure, Error};
use proptest::prelude::*;

fn d(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn open_mass(l: &Lattice<f64>, x: &[f64], r: f64) -> f64 {
    let m = l.measure();
    (0..m.len()).filter(|&i| d(m.point(i), x) < r).map(|i| m.weight(i)).sum()
}

fn independent_checks(l: &Lattice<f64>) {
    let m = l.measure();
    for (k, layer) in l.levels().iter().enumerate() {
        let mut seen = vec![0usize; m.len()];
        for &q in layer {
            let c = l.cube(q).unwrap();
            assert_eq!(c.level, k);
            assert!(c.members.contains(&c.center));
            for &i in &c.members {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&s| s == 1), "level {k} is not a partition");
        for (a, &p) in layer.iter().enumerate() {
            for &q in &layer[a + 1..] {
                let (cp, cq) = (l.cube(p).unwrap(), l.cube(q).unwrap());
                assert!(d(m.point(cp.center), m.point(cq.center)) >= 5.0 * (cp.r + cq.r));
            }
        }
    }
    for c in l.cubes() {
        let x = m.point(c.center);
        let doubling = open_mass(l, x, 100.0 * c.r) <= l.params().c0 * open_mass(l, x, c.r);
        assert_eq!(c.doubling, doubling, "cube {}", c.id);
        if let Some(p) = c.parent {
            let parent: BTreeSet<usize> = l.cube(p).unwrap().members.iter().copied().collect();
            assert!(c.members.iter().all(|i| parent.contains(i)));
        }
    }
}

fn brute_md(l: &Lattice<f64>, q: usize) -> (BTreeSet<usize>, BTreeSet<usize>) {
    let mut md = BTreeSet::new();
    for s in l.subtree(q).into_iter().skip(1) {
        if !l.cube(s).unwrap().doubling {
            continue;
        }
        let mut cur = l.cube(s).unwrap().parent;
        let mut clear = true;
        while let Some(c) = cur {
            if c == q {
                break;
            }
            clear &= !l.cube(c).unwrap().doubling;
            cur = l.cube(c).unwrap().parent;
        }
        if clear {
            md.insert(s);
        }
    }
    let covered: BTreeSet<usize> = md.iter().flat_map(|&s| l.cube(s).unwrap().members.clone()).collect();
    let rest = l.cube(q).unwrap().members.iter().copied().filter(|i| !covered.contains(i)).collect();
    (md, rest)
}

#[test]
fn oracles_on_cantor_and_graph() {
    for spec in [GeneratorSpec::four_corner(4), GeneratorSpec::graph(300, 0.5)] {
        let m = generate::<f64>(&spec).unwrap().measure;
        let l = build_lattice(&m, &LatticeParams::default()).unwrap();
        assert!(l.check_invariants().exact_ok());
        independent_checks(&l);
        for q in (0..l.len()).step_by(7) {
            let md = l.maximal_doubling(q).unwrap();
            let (want, rest) = brute_md(&l, q);
            assert_eq!(md.cubes.iter().copied().collect::<BTreeSet<_>>(), want);
            assert_eq!(md.remainder.iter().copied().collect::<BTreeSet<_>>(), rest);
        }
    }
}

#[test]
fn delta_mu_and_density_drop_match_sums() {
    let m = generate::<f64>(&GeneratorSpec::graph(400, 0.25)).unwrap().measure;
    let l = build_lattice(&m, &LatticeParams { c0: 2.0, a0: 8.0, max_depth: Some(3) }).unwrap();
    let nm = l.measure();
    for q in l.levels()[3].iter().copied().step_by(5) {
        let mut s = Some(q);
        while let Some(sc) = s {
            let (xq, xs) = (l.center(q).to_vec(), l.center(sc).to_vec());
            let (rq, rs) = (56.0 * l.cube(q).unwrap().r, 56.0 * l.cube(sc).unwrap().r);
            let want: f64 = (0..nm.len())
                .filter(|&i| d(nm.point(i), &xs) < rs && d(nm.point(i), &xq) >= rq)
                .map(|i| nm.weight(i) / d(nm.point(i), &xq))
                .sum();
            let got = l.delta_mu(q, sc).unwrap();
            assert!((got - want).abs() <= 1e-12 * want.max(1.0), "{got} vs {want}");
            if let Ok(rep) = l.density_drop_check(q, sc) {
                let theta = |c: usize| {
                    let r = 100.0 * l.cube(c).unwrap().r;
                    open_mass(&l, l.center(c), r) / r
                };
                let gap = (l.cube(q).unwrap().level - l.cube(sc).unwrap().level) as i32;
                let rhs = 16f64.powi(2) * 8f64.powi(-18 * (gap - 1)) * theta(sc);
                assert!((rep.lhs - theta(q)).abs() <= 1e-12 * theta(q));
                assert!((rep.rhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
            }
            s = l.cube(sc).unwrap().parent;
        }
    }
    let child = l.levels()[1][0];
    assert_eq!(l.delta_mu(l.root(), child).unwrap_err(), Error::NotNested { inner: l.root(), outer: child });
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_clouds_satisfy_invariants(n in 2usize..80, seed in 0u64..1000, a0 in 5.0..12.0f64) {
        let (pts, w) = random_cloud(n, 2, seed);
        let m = DiscreteMeasure::new(&pts, w, 1).unwrap();
        let l = build_lattice(&m, &LatticeParams { c0: 2.0, a0, max_depth: Some(4) }).unwrap();
        prop_assert!(l.check_invariants().exact_ok());
        independent_checks(&l);
    }

    #[test]
    fn structure_is_scale_invariant(n in 2usize..60, seed in 0u64..1000, k in -3i32..4) {
        let (pts, w) = random_cloud(n, 2, seed);
        let s = 2f64.powi(k);
        let scaled: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|c| c * s).collect()).collect();
        let params = LatticeParams { c0: 2.0, a0: 8.0, max_depth: Some(3) };
        let a = build_lattice(&DiscreteMeasure::new(&pts, w.clone(), 1).unwrap(), &params).unwrap();
        let b = build_lattice(&DiscreteMeasure::new(&scaled, w, 1).unwrap(), &params).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.cubes().iter().zip(b.cubes()) {
            prop_assert_eq!(&x.members, &y.members);
            prop_assert_eq!(x.doubling, y.doubling);
        }
    }
}
