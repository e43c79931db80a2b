//! OFF reader and writer.
//!
//! Mesh metadata that plain OFF cannot express is stored in comment lines
//! placed after the `OFF` header:
//!
//! ```text
//! #topology <genus> <boundary_components> <orientable 0|1>
//! #glue <raw_a> <raw_b>
//! #edgelen <raw_a> <raw_b> <length>
//! #circle <cx> <cy> <radius>
//! #chart <geodesic_length> <boundary|interior|crossing>
//! ```
//!
//! Floats are written in shortest round-trip form, so writing a mesh that was
//! read from a file reproduces the file byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::{BoundaryCurve, CollarChart, MeshParts, StripType, SurfaceMesh, SurfaceTopology};

pub fn write_off_string(mesh: &SurfaceMesh) -> String {
    let mut s = String::from("OFF\n");
    let t = mesh.topology();
    let _ = writeln!(s, "#topology {} {} {}", t.genus, t.boundary_components, t.orientable as u8);
    for c in mesh.boundary_curves() {
        let BoundaryCurve::Circle { center, radius } = c;
        let _ = writeln!(s, "#circle {} {} {}", center[0], center[1], radius);
    }
    if let Some(chart) = mesh.chart() {
        let kind = match chart.strip_type {
            StripType::BoundaryCollar => "boundary",
            StripType::InteriorCollar => "interior",
            StripType::CrossingStrip => "crossing",
        };
        let _ = writeln!(s, "#chart {} {}", chart.geodesic_length, kind);
    }
    for &(a, b) in mesh.vertex_identifications() {
        let _ = writeln!(s, "#glue {a} {b}");
    }
    if let Some(map) = mesh.metric_edge_lengths() {
        for (&(a, b), l) in map {
            let _ = writeln!(s, "#edgelen {a} {b} {l}");
        }
    }
    let _ = writeln!(s, "{} {} 0", mesh.vertices().len(), mesh.triangles().len());
    for v in mesh.vertices() {
        let _ = writeln!(s, "{} {} {}", v[0], v[1], v[2]);
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    s
}

pub fn write_off(mesh: &SurfaceMesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_off_string(mesh))?;
    Ok(())
}

pub fn read_off(path: impl AsRef<Path>) -> Result<SurfaceMesh> {
    read_off_str(&std::fs::read_to_string(path)?)
}

fn parse<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.ok_or_else(|| Error::Parse { line, message: format!("missing {what}") })?
        .parse()
        .map_err(|_| Error::Parse { line, message: format!("invalid {what}") })
}

/// Parses an OFF mesh. Without a `#topology` line the topology is inferred
/// as orientable from the Euler characteristic and boundary loop count.
pub fn read_off_str(src: &str) -> Result<SurfaceMesh> {
    let mut lines = src.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    if !matches!(lines.next(), Some((_, "OFF"))) {
        return Err(Error::Parse { line: 1, message: "expected OFF header".into() });
    }
    let mut topology = None;
    let mut glue = Vec::new();
    let mut lengths = BTreeMap::new();
    let mut curves = Vec::new();
    let mut chart = None;
    let mut data: Vec<(usize, &str)> = Vec::new();
    for (n, line) in lines {
        if let Some(rest) = line.strip_prefix('#') {
            let mut tok = rest.split_whitespace();
            match tok.next() {
                Some("topology") => {
                    let g = parse(tok.next(), n, "genus")?;
                    let l = parse(tok.next(), n, "boundary count")?;
                    let o: u8 = parse(tok.next(), n, "orientability flag")?;
                    topology = Some(SurfaceTopology::new(g, l, o != 0)?);
                }
                Some("glue") => glue.push((parse(tok.next(), n, "vertex")?, parse(tok.next(), n, "vertex")?)),
                Some("edgelen") => {
                    let a: usize = parse(tok.next(), n, "vertex")?;
                    let b: usize = parse(tok.next(), n, "vertex")?;
                    lengths.insert((a.min(b), a.max(b)), parse(tok.next(), n, "length")?);
                }
                Some("circle") => curves.push(BoundaryCurve::Circle {
                    center: [parse(tok.next(), n, "center")?, parse(tok.next(), n, "center")?],
                    radius: parse(tok.next(), n, "radius")?,
                }),
                Some("chart") => {
                    let l: f64 = parse(tok.next(), n, "geodesic length")?;
                    let kind = match tok.next() {
                        Some("boundary") => StripType::BoundaryCollar,
                        Some("interior") => StripType::InteriorCollar,
                        Some("crossing") => StripType::CrossingStrip,
                        _ => return Err(Error::Parse { line: n, message: "unknown chart type".into() }),
                    };
                    chart = Some(CollarChart::new(l, kind)?);
                }
                _ => {}
            }
        } else if !line.is_empty() {
            data.push((n, line));
        }
    }
    let mut data = data.into_iter();
    let (n, counts) = data.next().ok_or(Error::Parse { line: 1, message: "missing counts line".into() })?;
    let mut tok = counts.split_whitespace();
    let nv: usize = parse(tok.next(), n, "vertex count")?;
    let nf: usize = parse(tok.next(), n, "face count")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (n, line) = data.next().ok_or(Error::Parse { line: n, message: "too few vertices".into() })?;
        let mut tok = line.split_whitespace();
        let x = parse(tok.next(), n, "coordinate")?;
        let y = parse(tok.next(), n, "coordinate")?;
        let z = parse(tok.next(), n, "coordinate")?;
        vertices.push([x, y, z]);
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (n, line) = data.next().ok_or(Error::Parse { line: n, message: "too few faces".into() })?;
        let mut tok = line.split_whitespace();
        let k: usize = parse(tok.next(), n, "face size")?;
        if k != 3 {
            return Err(Error::Parse { line: n, message: format!("only triangles are supported, got a {k}-gon") });
        }
        triangles.push([parse(tok.next(), n, "index")?, parse(tok.next(), n, "index")?, parse(tok.next(), n, "index")?]);
    }
    let parts = MeshParts {
        vertices,
        triangles,
        vertex_identifications: glue,
        metric_edge_lengths: if lengths.is_empty() { None } else { Some(lengths) },
        boundary_curves: curves,
        chart,
    };
    let topology = match topology {
        Some(t) => t,
        None => infer_topology(&parts)?,
    };
    SurfaceMesh::new(parts, topology)
}

fn infer_topology(parts: &MeshParts) -> Result<SurfaceTopology> {
    let conn = super::build_connectivity(parts)?;
    let l = conn.loops.len() as i64;
    let chi = conn.euler_characteristic();
    let twice_genus = 2 - l - chi;
    if l == 0 || twice_genus < 0 || twice_genus % 2 != 0 {
        return Err(Error::mesh(format!("cannot infer topology from chi = {chi} and {l} boundary loops")));
    }
    SurfaceTopology::new((twice_genus / 2) as u32, l as u32, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_disc_mesh, build_moebius_mesh};

    #[test]
    fn round_trip_is_byte_exact() {
        for m in [build_disc_mesh(2).unwrap(), build_moebius_mesh(0.7, 1).unwrap()] {
            let a = write_off_string(&m);
            let b = write_off_string(&read_off_str(&a).unwrap());
            assert_eq!(a, b);
        }
    }

    #[test]
    fn infers_disc_topology() {
        let src = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
        let m = read_off_str(src).unwrap();
        assert_eq!(m.topology(), SurfaceTopology::disc());
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_off_str("PLY\n").is_err());
        assert!(read_off_str("OFF\n3 1 0\n0 0 0\n1 0 0\n").is_err());
        assert!(read_off_str("OFF\n4 1 0\n0 0 0\n1 0 0\n0 1 0\n0 0 0\n3 0 1 2\n").is_err());
    }
}
