//! Deterministic generators for the measure classes used as test beds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::scalar::{lit, Real};

fn default_length() -> f64 {
    1.0
}
fn default_radius() -> f64 {
    0.5
}
fn default_ambient() -> usize {
    2
}
fn default_base() -> usize {
    1
}
fn default_frequency() -> f64 {
    1.0
}

/// Generator family and its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Evenly spaced atoms on [0, length] × {0}.
    Segment {
        samples: usize,
        #[serde(default = "default_length")]
        length: f64,
        #[serde(default)]
        jitter: f64,
        #[serde(default = "default_ambient")]
        ambient_dim: usize,
    },
    /// Evenly spaced atoms on a circle centred at (1/2, 1/2).
    Circle {
        samples: usize,
        #[serde(default = "default_radius")]
        radius: f64,
    },
    /// Graph of F(z) = L/(2πf) · sin(2πf ⟨z, u⟩) over [0,1]^n (u the unit
    /// diagonal), sampled on a uniform grid; the last axis is the graph
    /// direction.
    LipschitzGraph {
        samples: usize,
        lip: f64,
        #[serde(default = "default_base")]
        base_dim: usize,
        #[serde(default = "default_frequency")]
        frequency: f64,
        #[serde(default)]
        jitter: f64,
    },
    /// Four-corner Cantor set in the unit square at the given generation.
    FourCornerCantor { generation: u32 },
    /// Four-corner construction with per-generation side ratios σ_k ≤ 1/2.
    VariableCantor { ratios: Vec<f64> },
    Mixture { components: Vec<MixtureComponent> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub spec: GeneratorKind,
    pub weight: f64,
    #[serde(default)]
    pub offset: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub kind: GeneratorKind,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind) -> Self {
        Self { kind, seed: None }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn four_corner(generation: u32) -> Self {
        Self::new(GeneratorKind::FourCornerCantor { generation })
    }

    pub fn graph(samples: usize, lip: f64) -> Self {
        Self::new(GeneratorKind::LipschitzGraph { samples, lip, base_dim: 1, frequency: 1.0, jitter: 0.0 })
    }

    pub fn segment(samples: usize) -> Self {
        Self::new(GeneratorKind::Segment { samples, length: 1.0, jitter: 0.0, ambient_dim: 2 })
    }
}

/// Ground truth recorded next to a generated measure.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub kind: String,
    pub atoms: usize,
    pub ambient_dim: usize,
    pub dim_param: usize,
    pub lipschitz: Option<f64>,
    pub graph_function: Option<String>,
    pub graph_direction: Option<String>,
    pub generation: Option<u32>,
    pub similarity_dimension: Option<f64>,
    pub note: String,
}

/// A generated measure and its metadata.
#[derive(Clone, Debug)]
pub struct Generated<T> {
    pub measure: DiscreteMeasure<T>,
    pub truth: GroundTruth,
}

struct Raw {
    dim: usize,
    n: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    truth: GroundTruth,
}

fn needs_seed(kind: &GeneratorKind) -> bool {
    match kind {
        GeneratorKind::Segment { jitter, .. } | GeneratorKind::LipschitzGraph { jitter, .. } => *jitter > 0.0,
        GeneratorKind::Mixture { components } => components.iter().any(|c| needs_seed(&c.spec)),
        _ => false,
    }
}

/// Builds the measure described by `spec`; total mass is 1.
pub fn generate<T: Real>(spec: &GeneratorSpec) -> Result<Generated<T>> {
    if needs_seed(&spec.kind) && spec.seed.is_none() {
        return Err(Error::InvalidSpec("jittered sampling requires a seed".into()));
    }
    let raw = raw(&spec.kind, spec.seed.unwrap_or(0))?;
    let coords = raw.coords.iter().map(|&c| lit::<T>(c)).collect();
    let weights = raw.weights.iter().map(|&w| lit::<T>(w)).collect();
    let measure = DiscreteMeasure::from_flat(raw.dim, coords, weights, raw.n)?;
    Ok(Generated { measure, truth: raw.truth })
}

fn grid_positions(samples: usize, jitter: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if samples == 1 {
        return vec![0.5];
    }
    let h = 1.0 / (samples - 1) as f64;
    (0..samples)
        .map(|i| {
            let t = i as f64 * h;
            if jitter > 0.0 {
                (t + (rng.gen::<f64>() - 0.5) * jitter * h).clamp(0.0, 1.0)
            } else {
                t
            }
        })
        .collect()
}

fn raw(kind: &GeneratorKind, seed: u64) -> Result<Raw> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        GeneratorKind::Segment { samples, length, jitter, ambient_dim } => {
            if *samples == 0 || !(*length > 0.0) || *ambient_dim < 2 || *jitter < 0.0 {
                return Err(Error::InvalidSpec("segment needs samples ≥ 1, length > 0, d ≥ 2".into()));
            }
            let d = *ambient_dim;
            let mut coords = Vec::with_capacity(samples * d);
            for t in grid_positions(*samples, *jitter, &mut rng) {
                coords.push(t * length);
                coords.extend(std::iter::repeat(0.0).take(d - 1));
            }
            Ok(Raw {
                dim: d,
                n: 1,
                coords,
                weights: vec![1.0 / *samples as f64; *samples],
                truth: GroundTruth {
                    kind: "segment".into(),
                    atoms: *samples,
                    ambient_dim: d,
                    dim_param: 1,
                    lipschitz: Some(0.0),
                    similarity_dimension: Some(1.0),
                    graph_direction: Some(axis_string(d, 1)),
                    note: "uniform samples of arc length measure".into(),
                    ..Default::default()
                },
            })
        }
        GeneratorKind::Circle { samples, radius } => {
            if *samples == 0 || !(*radius > 0.0) {
                return Err(Error::InvalidSpec("circle needs samples ≥ 1 and radius > 0".into()));
            }
            let mut coords = Vec::with_capacity(samples * 2);
            for i in 0..*samples {
                let t = 2.0 * std::f64::consts::PI * i as f64 / *samples as f64;
                coords.push(0.5 + radius * t.cos());
                coords.push(0.5 + radius * t.sin());
            }
            Ok(Raw {
                dim: 2,
                n: 1,
                coords,
                weights: vec![1.0 / *samples as f64; *samples],
                truth: GroundTruth {
                    kind: "circle".into(),
                    atoms: *samples,
                    ambient_dim: 2,
                    dim_param: 1,
                    similarity_dimension: Some(1.0),
                    note: "uniform samples of arc length measure".into(),
                    ..Default::default()
                },
            })
        }
        GeneratorKind::LipschitzGraph { samples, lip, base_dim, frequency, jitter } => {
            if *samples == 0 || !(*lip >= 0.0) || !(*frequency > 0.0) || *jitter < 0.0 {
                return Err(Error::InvalidSpec("graph needs samples ≥ 1, L ≥ 0, f > 0".into()));
            }
            if *base_dim != 1 && *base_dim != 2 {
                return Err(Error::InvalidSpec("graph base dimension must be 1 or 2".into()));
            }
            let n = *base_dim;
            let d = n + 1;
            let amp = if *lip > 0.0 { lip / (2.0 * std::f64::consts::PI * frequency) } else { 0.0 };
            let f = |z: &[f64]| -> f64 {
                let s: f64 = z.iter().sum::<f64>() / (n as f64).sqrt();
                amp * (2.0 * std::f64::consts::PI * frequency * s).sin()
            };
            let mut coords = Vec::new();
            let count;
            if n == 1 {
                for z in grid_positions(*samples, *jitter, &mut rng) {
                    coords.push(z);
                    coords.push(f(&[z]));
                }
                count = *samples;
            } else {
                let k = (*samples as f64).sqrt().ceil() as usize;
                let xs = grid_positions(k, *jitter, &mut rng);
                let ys = grid_positions(k, *jitter, &mut rng);
                for &a in &xs {
                    for &b in &ys {
                        coords.extend_from_slice(&[a, b, f(&[a, b])]);
                    }
                }
                count = k * k;
            }
            Ok(Raw {
                dim: d,
                n,
                coords,
                weights: vec![1.0 / count as f64; count],
                truth: GroundTruth {
                    kind: "lipschitz_graph".into(),
                    atoms: count,
                    ambient_dim: d,
                    dim_param: n,
                    lipschitz: Some(*lip),
                    graph_function: Some(format!(
                        "F(z) = {amp} * sin(2*pi*{frequency} * sum(z)/sqrt({n}))"
                    )),
                    graph_direction: Some(axis_string(d, d - 1)),
                    similarity_dimension: Some(n as f64),
                    note: "uniform grid in the base plane, graph values exact".into(),
                    ..Default::default()
                },
            })
        }
        GeneratorKind::FourCornerCantor { generation } => {
            if *generation > 10 {
                return Err(Error::InvalidSpec("generation above 10 exceeds 4^10 atoms".into()));
            }
            let ratios = vec![0.25; *generation as usize];
            let mut r = cantor(&ratios)?;
            r.truth.kind = "four_corner_cantor".into();
            r.truth.similarity_dimension = Some(1.0);
            r.truth.generation = Some(*generation);
            Ok(r)
        }
        GeneratorKind::VariableCantor { ratios } => cantor(ratios),
        GeneratorKind::Mixture { components } => {
            if components.is_empty() {
                return Err(Error::InvalidSpec("mixture needs components".into()));
            }
            let total: f64 = components.iter().map(|c| c.weight).sum();
            if components.iter().any(|c| !(c.weight > 0.0)) {
                return Err(Error::InvalidSpec("mixture weights must be positive".into()));
            }
            let mut out: Option<Raw> = None;
            for (k, c) in components.iter().enumerate() {
                let mut part = raw(&c.spec, seed.wrapping_add(k as u64 + 1))?;
                if let Some(off) = &c.offset {
                    if off.len() != part.dim {
                        return Err(Error::InvalidSpec("offset dimension mismatch".into()));
                    }
                    for p in part.coords.chunks_mut(part.dim) {
                        for (a, o) in p.iter_mut().zip(off) {
                            *a += o;
                        }
                    }
                }
                let s = c.weight / total;
                for w in part.weights.iter_mut() {
                    *w *= s;
                }
                match out.as_mut() {
                    None => out = Some(part),
                    Some(acc) => {
                        if acc.dim != part.dim || acc.n != part.n {
                            return Err(Error::InvalidSpec("mixture components disagree on dimensions".into()));
                        }
                        acc.coords.extend(part.coords);
                        acc.weights.extend(part.weights);
                    }
                }
            }
            let mut acc = out.unwrap();
            acc.truth = GroundTruth {
                kind: "mixture".into(),
                atoms: acc.weights.len(),
                ambient_dim: acc.dim,
                dim_param: acc.n,
                note: format!("{} components", components.len()),
                ..Default::default()
            };
            Ok(acc)
        }
    }
}

fn axis_string(d: usize, axis: usize) -> String {
    (0..d).map(|a| if a == axis { "1" } else { "0" }).collect::<Vec<_>>().join(",")
}

fn cantor(ratios: &[f64]) -> Result<Raw> {
    if ratios.iter().any(|s| !(*s > 0.0 && *s <= 0.5)) {
        return Err(Error::InvalidSpec("Cantor ratios must lie in (0, 1/2]".into()));
    }
    if ratios.len() > 10 {
        return Err(Error::InvalidSpec("at most 10 generations".into()));
    }
    // Lower-left corners and common side length of the current squares.
    let mut corners: Vec<[f64; 2]> = vec![[0.0, 0.0]];
    let mut side = 1.0;
    for &s in ratios {
        let child = side * s;
        let shift = side - child;
        let mut next = Vec::with_capacity(corners.len() * 4);
        for c in &corners {
            for (dx, dy) in [(0.0, 0.0), (shift, 0.0), (0.0, shift), (shift, shift)] {
                next.push([c[0] + dx, c[1] + dy]);
            }
        }
        corners = next;
        side = child;
    }
    let count = corners.len();
    let coords = corners.iter().flat_map(|c| [c[0] + side / 2.0, c[1] + side / 2.0]).collect();
    Ok(Raw {
        dim: 2,
        n: 1,
        coords,
        weights: vec![1.0 / count as f64; count],
        truth: GroundTruth {
            kind: "variable_cantor".into(),
            atoms: count,
            ambient_dim: 2,
            dim_param: 1,
            generation: Some(ratios.len() as u32),
            note: "atoms at square centres with uniform weights".into(),
            ..Default::default()
        },
    })
}

/// Ratio sequence with per-generation density θ_k = k^{-1/q}, q = (2 + p)/2,
/// so that Σ θ_k^p converges while Σ θ_k² diverges.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CantorProfile {
    pub p: f64,
    pub q: f64,
    pub thetas: Vec<f64>,
    pub ratios: Vec<f64>,
    pub p_sum: f64,
    pub square_sum: f64,
    /// θ_K^p, the last increment of the p-th power series.
    pub p_last_increment: f64,
    /// Σ of θ_k² over the last ten generations.
    pub square_last_ten: f64,
}

pub fn variable_cantor_profile(p: f64, generations: usize) -> Result<CantorProfile> {
    if !(p > 2.0) {
        return Err(Error::InvalidExponent(p));
    }
    if generations == 0 {
        return Err(Error::InvalidSpec("need at least one generation".into()));
    }
    let q = (2.0 + p) / 2.0;
    let thetas: Vec<f64> = (1..=generations).map(|k| (k as f64).powf(-1.0 / q)).collect();
    // Side of a generation-k square is 4^{-k} / θ_k.
    let side = |k: usize| -> f64 {
        if k == 0 {
            1.0
        } else {
            0.25f64.powi(k as i32) / thetas[k - 1]
        }
    };
    let ratios = (1..=generations).map(|k| side(k) / side(k - 1)).collect();
    let p_sum = thetas.iter().map(|t| t.powf(p)).sum();
    let square_sum = thetas.iter().map(|t| t * t).sum();
    let p_last_increment = thetas.last().unwrap().powf(p);
    let square_last_ten = thetas.iter().rev().take(10).map(|t| t * t).sum();
    Ok(CantorProfile { p, q, thetas, ratios, p_sum, square_sum, p_last_increment, square_last_ten })
}
