//! Point-cloud CSV, graph JSON and plane strings.
//!
//! Coordinates are written with 17 significant digits so that a
//! write/read cycle reproduces every f64 bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corona::LipschitzGraph;
use crate::error::{Error, Result};
use crate::geometry::Plane;
use crate::measure::DiscreteMeasure;
use crate::scalar::{lit, Real};

pub fn points_header(d: usize) -> Vec<String> {
    (0..d).map(|k| format!("x{k}")).chain(std::iter::once("w".to_string())).collect()
}

pub fn format_real<T: Real>(x: T) -> String {
    format!("{:.16e}", x.to_f64().unwrap_or(f64::NAN))
}

pub fn write_points_csv<T: Real, W: Write>(m: &DiscreteMeasure<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(points_header(m.ambient_dim()))?;
    for i in 0..m.len() {
        let row: Vec<String> = m.point(i).iter().chain(std::iter::once(&m.weight(i))).map(|&x| format_real(x)).collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_points_csv<T: Real>(m: &DiscreteMeasure<T>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_points_csv(m, BufWriter::new(file))
}

/// Reads `x0,...,x{d-1},w` rows. Weights must be positive.
pub fn read_points_csv<T: Real, R: Read>(input: R, dim_param: usize) -> Result<DiscreteMeasure<T>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.len() < 2 || header != points_header(header.len() - 1) {
        return Err(Error::Parse(format!("expected header x0,...,x{{d-1}},w, found {}", header.join(","))));
    }
    let d = header.len() - 1;
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != d + 1 {
            return Err(Error::Parse(format!("row {row}: expected {} fields, found {}", d + 1, rec.len())));
        }
        let vals = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("row {row}: {s:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse(format!("row {row}: non-finite value")));
        }
        let w = vals[d];
        if !(w > 0.0) {
            return Err(Error::InvalidWeight { row, weight: w });
        }
        coords.extend(vals[..d].iter().map(|&x| lit::<T>(x)));
        weights.push(lit::<T>(w));
    }
    DiscreteMeasure::from_flat(d, coords, weights, dim_param)
}

pub fn load_points_csv<T: Real>(path: &Path, dim_param: usize) -> Result<DiscreteMeasure<T>> {
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_points_csv(BufReader::new(file), dim_param)
}

/// Parses `"v1;v2;..."` with comma-separated coordinates, e.g. `"0,1"` or
/// `"1,0,0;0,1,0"`.
pub fn parse_plane<T: Real>(s: &str) -> Result<Plane<T>> {
    let vectors = s
        .split(';')
        .filter(|v| !v.trim().is_empty())
        .map(|v| {
            v.split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map(lit::<T>)
                        .map_err(|e| Error::Parse(format!("plane {s:?}: {c:?}: {e}")))
                })
                .collect::<Result<Vec<T>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Plane::new(&vectors)
}

pub fn format_plane<T: Real>(p: &Plane<T>) -> String {
    p.basis()
        .iter()
        .map(|v| v.iter().map(|x| format!("{}", x.to_f64().unwrap_or(f64::NAN))).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join(";")
}

/// On-disk graph: anchors z are coordinates in the orthonormalized
/// `base_plane`, values F(z) coordinates in its complement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub base_plane: Vec<Vec<f64>>,
    pub anchors: Vec<(Vec<f64>, Vec<f64>)>,
    #[serde(rename = "L")]
    pub lipschitz: f64,
}

impl GraphFile {
    pub fn to_graph<T: Real>(&self) -> Result<LipschitzGraph<T>> {
        let cast = |v: &Vec<f64>| v.iter().map(|&x| lit::<T>(x)).collect::<Vec<T>>();
        let base_plane = Plane::new(&self.base_plane.iter().map(cast).collect::<Vec<_>>())?;
        let (base, values) = self.anchors.iter().map(|(z, f)| (cast(z), cast(f))).unzip();
        LipschitzGraph::new(base_plane.complement(), base, values, lit(self.lipschitz))
    }

    pub fn from_graph<T: Real>(g: &LipschitzGraph<T>) -> Self {
        let cast = |v: &Vec<T>| v.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect::<Vec<f64>>();
        Self {
            base_plane: g.direction.perp_basis().iter().map(cast).collect(),
            anchors: g.base.iter().map(cast).zip(g.values.iter().map(cast)).collect(),
            lipschitz: g.lipschitz.to_f64().unwrap_or(f64::NAN),
        }
    }
}

pub fn load_graph<T: Real>(path: &Path) -> Result<LipschitzGraph<T>> {
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let g: GraphFile = serde_json::from_reader(BufReader::new(file))?;
    g.to_graph()
}

pub fn write_json<S: Serialize>(value: &S, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let pts = vec![vec![0.1, 1.0 / 3.0], vec![std::f64::consts::PI, -2.5e-17]];
        let m = DiscreteMeasure::new(&pts, vec![0.7, 0.3], 1).unwrap();
        let mut buf = Vec::new();
        write_points_csv(&m, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("x0,x1,w\n"));
        let back: DiscreteMeasure<f64> = read_points_csv(buf.as_slice(), 1).unwrap();
        assert_eq!(back.coords(), m.coords());
        assert_eq!(back.weights(), m.weights());
    }

    #[test]
    fn rejects_bad_weight_and_header() {
        let bad = "x0,x1,w\n0,0,1\n1,1,0\n";
        assert_eq!(
            read_points_csv::<f64, _>(bad.as_bytes(), 1).unwrap_err(),
            Error::InvalidWeight { row: 1, weight: 0.0 }
        );
        assert!(matches!(read_points_csv::<f64, _>("a,b\n1,2\n".as_bytes(), 1), Err(Error::Parse(_))));
    }

    #[test]
    fn plane_strings() {
        let p: Plane<f64> = parse_plane("0,1").unwrap();
        assert_eq!(p.basis(), &[vec![0.0, 1.0]]);
        assert_eq!(parse_plane::<f64>("1,0,0;0,1,0").unwrap().dim(), 2);
        assert!(parse_plane::<f64>("1,x").is_err());
    }

    #[test]
    fn graph_file_round_trip() {
        let json = r#"{"base_plane": [[1.0, 0.0]], "anchors": [[[0.0], [0.0]], [[1.0], [0.5]]], "L": 0.5}"#;
        let gf: GraphFile = serde_json::from_str(json).unwrap();
        let g: LipschitzGraph<f64> = gf.to_graph().unwrap();
        assert!((g.eval(&[0.5])[0] - 0.25).abs() < 1e-15);
        assert_eq!(GraphFile::from_graph(&g), gf);
        let steep = r#"{"base_plane": [[1.0, 0.0]], "anchors": [[[0.0], [0.0]], [[1.0], [2.0]]], "L": 0.5}"#;
        assert!(serde_json::from_str::<GraphFile>(steep).unwrap().to_graph::<f64>().is_err());
    }
}
