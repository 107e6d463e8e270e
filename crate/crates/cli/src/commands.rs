use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use conical_gmt::corona::{verify_corona, CoronaContext, CoronaParams, LipschitzGraph};
use conical_gmt::diagnostics::{
    beta2, beta_square_function, dyadic_scales, f_epsilon_set, necessary_bplg_cover, tangent_convergence,
    theta_m_property,
};
use conical_gmt::energy::{all_pointwise_energies, bpbe_scan, BpbeParams, ConeProfile, EnergySpec};
use conical_gmt::geometry::Ball;
use conical_gmt::io::{format_real, GraphFile, load_graph, load_points_csv, parse_plane, save_points_csv, write_json};
use conical_gmt::lattice::{build_lattice, LatticeParams};
use conical_gmt::sio::{builtin_kernel, operator_norms, TruncationGrid};
use conical_gmt::synth::{generate, variable_cantor_profile, GeneratorSpec};
use conical_gmt::{Error, Measure64};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::{BetaArgs, BplgArgs, CoronaArgs, EnergyArgs, GenArgs, ReportArgs, ScanArgs, SioArgs};

pub struct Ctx {
    pub verbose: bool,
}

/// Exit code 2 for bad input, 3 for numerical failure.
pub enum Failure {
    Invalid(anyhow::Error),
    Numerical(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Invalid(e) | Failure::Numerical(e) => e,
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Invalid(e.into())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn numerical(msg: String) -> Outcome {
    Err(Failure::Numerical(anyhow!(msg)))
}

fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path).with_context(|| format!("{}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn load(path: &Path, n: usize) -> anyhow::Result<(Measure64, String)> {
    let m = load_points_csv(path, n)?;
    Ok((m, sha256_file(path)?))
}

fn envelope(command: &str, points: &Path, sha: &str, params: Value, result: Value) -> Value {
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "points": points.display().to_string(),
        "points_sha256": sha,
        "params": params,
        "result": result,
    })
}

fn emit(value: &Value, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(p) => write_json(value, p)?,
        None => println!("{}", serde_json::to_string_pretty(value)?),
    }
    Ok(())
}

fn csv_writer(path: &Path) -> anyhow::Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path).with_context(|| format!("{}", path.display()))?)
}

pub fn gen(ctx: &Ctx, a: &GenArgs) -> Outcome {
    let mut spec: GeneratorSpec = if let Some(p) = &a.spec {
        let text = fs::read_to_string(p).with_context(|| format!("{}", p.display()))?;
        serde_json::from_str(&text).with_context(|| format!("{}", p.display()))?
    } else {
        let kind = a.kind.as_deref().ok_or_else(|| anyhow!("either --type or --spec is required"))?;
        let mut obj = Map::new();
        obj.insert("kind".into(), json!(kind));
        if let Some(g) = a.generation {
            obj.insert("generation".into(), json!(g));
        }
        if let Some(s) = a.samples {
            obj.insert("samples".into(), json!(s));
        }
        if let Some(l) = a.lip {
            obj.insert("lip".into(), json!(l));
        }
        if let Some(j) = a.jitter {
            obj.insert("jitter".into(), json!(j));
        }
        if let Some(r) = &a.ratios {
            let ratios = r
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .context("--ratios")?;
            obj.insert("ratios".into(), json!(ratios));
        } else if let Some(p) = a.profile_p {
            let g = a.generation.ok_or_else(|| anyhow!("--profile-p needs --generation"))?;
            obj.insert("ratios".into(), json!(variable_cantor_profile(p, g as usize)?.ratios));
        }
        serde_json::from_value(Value::Object(obj)).context("generator parameters")?
    };
    if a.seed.is_some() {
        spec.seed = a.seed;
    }
    let g = generate::<f64>(&spec)?;
    save_points_csv(&g.measure, &a.out)?;
    let sha = sha256_file(&a.out)?;
    if let Some(meta) = &a.meta {
        let v = envelope("gen", &a.out, &sha, serde_json::to_value(&spec)?, json!({ "truth": g.truth }));
        write_json(&v, meta)?;
    }
    if let Some(gp) = &a.graph_out {
        let (Some(dir), Some(lip)) = (g.truth.graph_direction.as_deref(), g.truth.lipschitz) else {
            return Err(anyhow!("--graph-out needs a generator with a known graph").into());
        };
        let v = parse_plane::<f64>(dir)?;
        let base = g.measure.points().map(|x| v.perp_coords(x)).collect();
        let values = g.measure.points().map(|x| v.coords(x)).collect();
        let graph = LipschitzGraph::new(v, base, values, lip)?;
        write_json(&GraphFile::from_graph(&graph), gp)?;
    }
    if ctx.verbose {
        eprintln!("gen: {} atoms in R^{} -> {}", g.measure.len(), g.measure.ambient_dim(), a.out.display());
    }
    Ok(())
}

pub fn energy(ctx: &Ctx, a: &EnergyArgs) -> Outcome {
    let (m, sha) = load(&a.points, a.n)?;
    let plane = parse_plane::<f64>(&a.plane)?;
    let spec = EnergySpec::new(plane.clone(), a.alpha, a.p, a.outer);
    spec.validate(&m)?;
    let rows: Vec<(f64, usize)> = match a.eta {
        None => all_pointwise_energies(&m, &spec)?.into_iter().map(|b| (b.total, b.in_cone_count)).collect(),
        Some(eta) => {
            if !(eta > 0.0 && eta < 1.0) || !a.outer.is_finite() {
                return Err(Error::InvalidParams("--eta needs 0 < eta < 1 and a finite R".into()).into());
            }
            (0..m.len())
                .map(|i| {
                    let prof = ConeProfile::build(&m, m.point(i), &plane, a.alpha, a.outer);
                    (prof.window_energy(eta * a.outer, a.outer, a.n, a.p), prof.in_cone_count())
                })
                .collect()
        }
    };
    let weighted: Vec<f64> = rows.iter().enumerate().map(|(i, r)| m.weight(i) * r.0).collect();
    let total = conical_gmt::scalar::pairwise_sum(&weighted);
    let max = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let zero = rows.iter().filter(|r| r.0 == 0.0).count();
    if let Some(p) = &a.per_point {
        let mut w = csv_writer(p)?;
        w.write_record(["index", "energy", "in_cone_count"])?;
        for (i, (e, c)) in rows.iter().enumerate() {
            w.write_record([i.to_string(), format_real(*e), c.to_string()])?;
        }
        w.flush()?;
    }
    let params = json!({
        "n": a.n, "p": a.p, "alpha": a.alpha, "plane": a.plane,
        "R": if a.outer.is_finite() { json!(a.outer) } else { json!("inf") }, "eta": a.eta,
    });
    let result = json!({
        "atoms": m.len(), "total_mass": m.total_mass(), "total": total,
        "mean": total / m.total_mass(), "max": max, "zero_energy_atoms": zero,
    });
    emit(&envelope("energy", &a.points, &sha, params, result), a.out.as_deref())?;
    if ctx.verbose {
        eprintln!("energy: total {total:.6e}, max {max:.6e}, {zero}/{} atoms with zero energy", m.len());
    }
    Ok(())
}

pub fn scan_bpbe(ctx: &Ctx, a: &ScanArgs) -> Outcome {
    let seed = a.seed.ok_or_else(|| anyhow!("--seed is required for the random direction search"))?;
    let (m, sha) = load(&a.points, a.n)?;
    if a.centers == 0 {
        return Err(anyhow!("--centers must be positive").into());
    }
    let k = a.centers.min(m.len());
    let balls: Vec<Ball<f64>> =
        (0..k).map(|j| Ball::new(m.point(j * m.len() / k).to_vec(), a.radius)).collect();
    let pinned = a.pin.iter().map(|s| parse_plane::<f64>(s)).collect::<Result<Vec<_>, _>>()?;
    let params = BpbeParams {
        alpha: a.alpha,
        p: a.p,
        m0: a.m0,
        kappa: a.kappa,
        direction_samples: a.directions,
        pinned,
        seed,
    };
    let reports = bpbe_scan(&m, &balls, &params)?;
    let passing = reports.iter().filter(|r| r.passes).count();
    let p = json!({
        "n": a.n, "p": a.p, "alpha": a.alpha, "m0": a.m0, "kappa": a.kappa, "radius": a.radius,
        "centers": k, "directions": a.directions, "pin": a.pin, "seed": seed,
    });
    let result = json!({ "balls": reports, "passing": passing, "checked": reports.len() });
    emit(&envelope("scan-bpbe", &a.points, &sha, p, result), a.out.as_deref())?;
    if ctx.verbose {
        eprintln!("scan-bpbe: {passing}/{} balls pass", reports.len());
    }
    Ok(())
}

/// Corona configuration file; unset constants take their defaults.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoronaConfig {
    plane: String,
    alpha: f64,
    p: f64,
    #[serde(default = "one")]
    n: usize,
    a: Option<f64>,
    tau: Option<f64>,
    epsilon: Option<f64>,
    t: Option<f64>,
    m: Option<f64>,
    lambda: Option<f64>,
    eta: Option<f64>,
    #[serde(default)]
    lattice: LatticeParams<f64>,
}

fn one() -> usize {
    1
}

pub fn corona(ctx: &Ctx, a: &CoronaArgs) -> Outcome {
    let text = fs::read_to_string(&a.config).with_context(|| format!("{}", a.config.display()))?;
    let cfg: CoronaConfig = serde_json::from_str(&text).with_context(|| format!("{}", a.config.display()))?;
    let (m, sha) = load(&a.points, cfg.n)?;
    let mut params = CoronaParams::with_defaults(parse_plane::<f64>(&cfg.plane)?, cfg.alpha, cfg.p);
    if let Some(m) = cfg.m {
        params.m = m;
        params.t = 10.0 * m;
        params.lambda = 4.0 * m;
    }
    macro_rules! set {
        ($($f:ident),*) => { $(if let Some(v) = cfg.$f { params.$f = v; })* };
    }
    set!(a, tau, epsilon, t, lambda);
    if let Some(eta) = cfg.eta {
        params.energy.eta = eta;
    }
    let lattice = build_lattice(&m, &cfg.lattice)?;
    let invariants = lattice.check_invariants();
    let cc = CoronaContext::new(&lattice, &params)?;
    let result = cc.build_top()?;
    let verification = verify_corona(&cc, &result);
    let trees: Vec<Value> = result
        .trees
        .iter()
        .map(|t| {
            json!({
                "root": t.root,
                "level": lattice.cubes()[t.root].level,
                "mass": lattice.mass(t.root),
                "theta_root": t.theta_root,
                "tree_size": t.tree.len(),
                "tr_size": t.tr.len(),
                "hd": t.hd.len(), "ld": t.ld.len(), "bce": t.bce.len(),
                "next": t.next.len(),
                "good_atoms": t.good.len(),
                "anchors": t.anchors.len(),
                "graph_lipschitz": t.graph.lipschitz,
                "cone_violations": t.fit.violation_count,
                "ld_fraction": t.ld_fraction,
            })
        })
        .collect();
    let report = envelope(
        "corona",
        &a.points,
        &sha,
        json!({ "corona": params, "lattice": lattice.params(), "n": cfg.n }),
        json!({
            "lattice": { "depth": lattice.depth(), "cubes": lattice.len(), "invariants": invariants },
            "packing": result.ledger,
            "trees": trees,
            "verification": verification,
        }),
    );
    write_json(&report, &a.out)?;
    if let Some(p) = &a.dump_trees {
        write_json(&result.trees, p)?;
    }
    if let Some(p) = &a.dump_lattice {
        write_json(&lattice.dump(false), p)?;
    }
    if ctx.verbose {
        eprintln!(
            "corona: {} cubes, {} trees, packing ratio {:.4e}",
            lattice.len(),
            result.trees.len(),
            result.ledger.ratio
        );
    }
    if !invariants.exact_ok() || !verification.hard_ok() {
        return numerical("corona verification failed; see the report".into());
    }
    Ok(())
}

fn parse_grid(m: &Measure64, s: &str) -> anyhow::Result<TruncationGrid<f64>> {
    let s = s.trim();
    Ok(if s == "auto" {
        TruncationGrid::auto(m)?
    } else if let Some(k) = s.strip_prefix("truncated:") {
        TruncationGrid::truncated(m, k.parse().context("--eps-grid truncated:K")?)?
    } else {
        let values = s.split(',').map(|v| v.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>().context("--eps-grid")?;
        TruncationGrid::new(values)?
    })
}

pub fn sio_norm(ctx: &Ctx, a: &SioArgs) -> Outcome {
    let (m, sha) = load(&a.points, a.n)?;
    let kernel = builtin_kernel::<f64>(&a.kernel, a.n, m.ambient_dim())?;
    let grid = parse_grid(&m, &a.eps_grid)?;
    let norms = operator_norms(&m, kernel.as_ref(), &grid)?;
    let mut w = csv_writer(&a.out)?;
    w.write_record(["eps", "norm", "iterations", "flag"])?;
    for e in &norms {
        let flag = if e.converged { "converged" } else { "stalled" };
        w.write_record([format_real(e.eps), format_real(e.norm), e.iterations.to_string(), flag.to_string()])?;
    }
    w.flush()?;
    let best = norms.iter().fold(&norms[0], |b, e| if e.norm > b.norm { e } else { b });
    let stalled = norms.iter().filter(|e| !e.converged).count();
    if let Some(p) = &a.report {
        let v = envelope(
            "sio-norm",
            &a.points,
            &sha,
            json!({ "kernel": a.kernel, "n": a.n, "eps_grid": a.eps_grid }),
            json!({ "sup_norm": best.norm, "eps_at_sup": best.eps, "grid_size": norms.len(), "stalled": stalled, "rows": norms }),
        );
        write_json(&v, p)?;
    }
    if ctx.verbose {
        eprintln!("sio-norm: sup {:.6} at eps {:.3e} over {} values", best.norm, best.eps, norms.len());
    }
    if stalled > 0 {
        return numerical(format!("norm iteration stalled at {stalled} grid values"));
    }
    Ok(())
}

fn parse_center(m: &Measure64, s: &str) -> anyhow::Result<Vec<f64>> {
    if !s.contains(',') {
        if let Ok(i) = s.trim().parse::<usize>() {
            if i >= m.len() {
                bail!("center index {i} out of range for {} atoms", m.len());
            }
            return Ok(m.point(i).to_vec());
        }
    }
    let x = s.split(',').map(|v| v.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>().context("--center")?;
    if x.len() != m.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: m.ambient_dim(), found: x.len() }.into());
    }
    Ok(x)
}

pub fn beta(ctx: &Ctx, a: &BetaArgs) -> Outcome {
    let (m, sha) = load(&a.points, a.n)?;
    let x = parse_center(&m, &a.center)?;
    let k: usize = a
        .scales
        .strip_prefix("dyadic:")
        .ok_or_else(|| anyhow!("--scales must have the form dyadic:K"))?
        .parse()
        .context("--scales dyadic:K")?;
    let r0 = a.r0.unwrap_or_else(|| m.diameter());
    if !(r0 > 0.0) || k == 0 {
        return Err(anyhow!("need a positive top scale and K ≥ 1").into());
    }
    let scales = dyadic_scales(r0, k);
    let mut w = csv_writer(&a.out)?;
    w.write_record(["r", "beta", "mass", "degenerate"])?;
    let mut rows = Vec::new();
    for &r in &scales {
        match beta2(&m, &x, r) {
            Ok(b) => {
                w.write_record([format_real(r), format_real(b.beta), format_real(b.mass), b.degenerate.to_string()])?;
                rows.push(json!({ "r": r, "beta": b.beta, "mass": b.mass, "degenerate": b.degenerate }));
            }
            Err(Error::EmptyBall) => {
                w.write_record([format_real(r), String::new(), format_real(0.0), String::new()])?;
                rows.push(json!({ "r": r, "beta": null, "mass": 0.0, "degenerate": null }));
            }
            Err(e) => return Err(e.into()),
        }
    }
    w.flush()?;
    let square = beta_square_function(&m, &x, &scales).ok();
    let tangent = tangent_convergence(&m, &x, &scales).ok();
    if let Some(p) = &a.report {
        let v = envelope(
            "beta",
            &a.points,
            &sha,
            json!({ "n": a.n, "center": x, "scales": a.scales, "r0": r0 }),
            json!({
                "rows": rows,
                "square_sum": square.as_ref().map(|s| s.sum),
                "tangent_trend": tangent.as_ref().map(|t| t.trend),
            }),
        );
        write_json(&v, p)?;
    }
    if ctx.verbose {
        if let Some(s) = square {
            eprintln!("beta: square function sum {:.6e} over {} scales", s.sum, scales.len());
        }
    }
    Ok(())
}

pub fn bplg(ctx: &Ctx, a: &BplgArgs) -> Outcome {
    let (m, sha) = load(&a.points, a.n)?;
    let graph = load_graph::<f64>(&a.graph)?;
    let params = json!({ "n": a.n, "graph": a.graph.display().to_string(), "check": a.check,
                         "alpha": a.alpha, "theta": a.theta, "eps": a.eps });
    let (result, failed) = match a.check.as_str() {
        "cover" => {
            let r = necessary_bplg_cover(&m, &graph, a.alpha)?;
            let failed = !r.disjoint_ok || !r.coverage_ok || r.kj_violations > 0;
            if ctx.verbose {
                eprintln!(
                    "bplg cover: {} off-graph atoms, {} balls, sum r^n / sum mass = {:.4e}",
                    r.off_graph,
                    r.balls.len(),
                    r.ratio
                );
            }
            (serde_json::to_value(&r)?, failed)
        }
        "thetaM" => {
            if graph.ambient_dim() != m.ambient_dim() {
                return Err(Error::GraphAmbientMismatch { graph: graph.ambient_dim(), measure: m.ambient_dim() }.into());
            }
            let theta = a.theta.unwrap_or(1.0 / (1.0 + graph.lipschitz * graph.lipschitz).sqrt());
            let pts: Vec<Vec<f64>> = m.points().map(<[f64]>::to_vec).collect();
            let r = theta_m_property(&pts, &graph.direction, theta, true)?;
            if ctx.verbose {
                eprintln!("bplg thetaM: theta {theta:.4}, max shell count {}", r.max);
            }
            (json!({ "theta": theta, "report": r }), false)
        }
        "feps" => {
            let eps = a.eps.ok_or_else(|| anyhow!("--eps is required for the feps check"))?;
            let set = f_epsilon_set(&m, eps)?;
            if ctx.verbose {
                eprintln!("bplg feps: {} of {} atoms", set.len(), m.len());
            }
            (json!({ "eps": eps, "count": set.len(), "indices": set }), false)
        }
        other => return Err(anyhow!("unknown check {other:?}; expected cover, thetaM or feps").into()),
    };
    emit(&envelope("bplg", &a.points, &sha, params, result), a.out.as_deref())?;
    if failed {
        return numerical("cover verification failed; see the report".into());
    }
    Ok(())
}

fn figure_rows(report: &Value) -> Option<(Vec<&'static str>, Vec<Vec<String>>)> {
    let result = report.get("result")?;
    let num = |v: &Value| v.as_f64().map(format_real).unwrap_or_default();
    let cols = |row: &Value, keys: &[&str]| keys.iter().map(|k| row.get(*k).map(num).unwrap_or_default()).collect();
    match report.get("command")?.as_str()? {
        "corona" => {
            let keys = ["root", "level", "mass", "theta_root", "ld_fraction"];
            let rows = result.get("trees")?.as_array()?.iter().map(|t| cols(t, &keys)).collect();
            Some((keys.to_vec(), rows))
        }
        "sio-norm" => {
            let keys = ["eps", "norm"];
            let rows = result.get("rows")?.as_array()?.iter().map(|t| cols(t, &keys)).collect();
            Some((keys.to_vec(), rows))
        }
        "beta" => {
            let keys = ["r", "beta"];
            let rows = result.get("rows")?.as_array()?.iter().map(|t| cols(t, &keys)).collect();
            Some((keys.to_vec(), rows))
        }
        _ => None,
    }
}

pub fn report(ctx: &Ctx, a: &ReportArgs) -> Outcome {
    let mut reports = Vec::new();
    let mut hash: Option<String> = None;
    for p in &a.inputs {
        let text = fs::read_to_string(p).with_context(|| format!("{}", p.display()))?;
        let v: Value = serde_json::from_str(&text).with_context(|| format!("{}", p.display()))?;
        let (Some(_), Some(h)) = (
            v.get("command").and_then(Value::as_str),
            v.get("points_sha256").and_then(Value::as_str),
        ) else {
            return Err(anyhow!("schema mismatch: {} is not a pipeline report", p.display()).into());
        };
        match &hash {
            None => hash = Some(h.to_string()),
            Some(prev) if prev != h => {
                return Err(anyhow!("schema mismatch: {} was computed on different points ({h} vs {prev})", p.display()).into())
            }
            _ => {}
        }
        reports.push(v);
    }
    if let Some(dir) = &a.csv_dir {
        fs::create_dir_all(dir).with_context(|| format!("{}", dir.display()))?;
        for (i, r) in reports.iter().enumerate() {
            if let Some((header, rows)) = figure_rows(r) {
                let name = format!("{}_{i}.csv", r["command"].as_str().unwrap_or("report"));
                let mut w = csv_writer(&dir.join(name))?;
                w.write_record(&header)?;
                for row in rows {
                    w.write_record(&row)?;
                }
                w.flush()?;
            }
        }
    }
    let merged = json!({ "points_sha256": hash, "count": reports.len(), "reports": reports });
    write_json(&merged, &a.out)?;
    if ctx.verbose {
        let mut err = std::io::stderr();
        let _ = writeln!(err, "report: merged {} reports", a.inputs.len());
    }
    Ok(())
}
