//! Plain-text density dumps (`*.off-density`) that pin down a discrete
//! problem together with the OFF mesh they refer to:
//!
//! ```text
//! # off-density
//! # neumann <a> <b>
//! <vertex> <weight>
//! ```
//!
//! Vertices are canonical indices of the mesh; `neumann` lines list the
//! boundary edges without the Steklov condition.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fem::BoundaryDensity;
use crate::mesh::{BoundaryPartition, SurfaceMesh};
use crate::spectrum::{SolverOptions, SpectralProblem};

pub fn write_density_dump(mesh: &SurfaceMesh, partition: &BoundaryPartition, density: &BoundaryDensity) -> String {
    let mut s = String::from("# off-density\n");
    for (a, b) in partition.neumann_edges(mesh) {
        let _ = writeln!(s, "# neumann {a} {b}");
    }
    for (v, w) in density.vertex_ids().iter().zip(density.weights()) {
        let _ = writeln!(s, "{v} {w}");
    }
    s
}

/// Parses a dump against `mesh`, returning the partition and density.
pub fn read_density_dump(mesh: &SurfaceMesh, src: &str) -> Result<(BoundaryPartition, BoundaryDensity)> {
    let mut neumann = Vec::new();
    let mut ids = Vec::new();
    let mut weights = Vec::new();
    let parse_err = |line: usize, message: &str| Error::Parse { line: line + 1, message: message.to_string() };
    for (i, line) in src.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut it = rest.split_whitespace();
            if it.next() == Some("neumann") {
                let a = it.next().and_then(|x| x.parse::<usize>().ok());
                let b = it.next().and_then(|x| x.parse::<usize>().ok());
                match (a, b) {
                    (Some(a), Some(b)) => neumann.push((a.min(b), a.max(b))),
                    _ => return Err(parse_err(i, "neumann line needs two vertex indices")),
                }
            }
            continue;
        }
        let mut it = line.split_whitespace();
        let v = it.next().and_then(|x| x.parse::<usize>().ok()).ok_or_else(|| parse_err(i, "bad vertex index"))?;
        let w = it.next().and_then(|x| x.parse::<f64>().ok()).ok_or_else(|| parse_err(i, "bad weight"))?;
        ids.push(v);
        weights.push(w);
    }
    neumann.sort_unstable();
    let flags = mesh
        .connectivity()
        .boundary_edges
        .iter()
        .map(|e| neumann.binary_search(&e.key()).is_err())
        .collect();
    let partition = BoundaryPartition::from_flags(mesh, flags)?;
    let density = BoundaryDensity::new(ids, weights)?;
    Ok((partition, density))
}

/// `sigma_bar_k` recomputed from a mesh and a dump.
pub fn recompute_sigma_bar(mesh: &SurfaceMesh, dump: &str, k: usize, options: &SolverOptions) -> Result<f64> {
    let (partition, density) = read_density_dump(mesh, dump)?;
    let problem = SpectralProblem::new(mesh.clone(), partition, *options)?;
    Ok(problem.solve(&density, k)?.sigma_bar(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Shape;

    #[test]
    fn round_trip_reproduces_value() {
        let (mesh, part) = Shape::HalfDisc.build(2).unwrap();
        let ids = part.steklov_vertices(&mesh);
        let w: Vec<f64> = (0..ids.len()).map(|i| 1.0 + 0.37 * (i as f64).sin()).collect();
        let density = BoundaryDensity::new(ids, w).unwrap();
        let text = write_density_dump(&mesh, &part, &density);
        let (p2, d2) = read_density_dump(&mesh, &text).unwrap();
        assert_eq!(p2, part);
        assert_eq!(d2, density);
        let opts = SolverOptions::default();
        let direct = SpectralProblem::new(mesh.clone(), part, opts).unwrap().solve(&density, 2).unwrap().sigma_bar(2);
        assert_eq!(recompute_sigma_bar(&mesh, &text, 2, &opts).unwrap(), direct);
    }

    #[test]
    fn malformed_lines_are_rejected() {
        let (mesh, _) = Shape::Disc.build(1).unwrap();
        assert!(matches!(read_density_dump(&mesh, "# off-density\n3 x\n"), Err(Error::Parse { line: 2, .. })));
        assert!(read_density_dump(&mesh, "# neumann 1\n").is_err());
    }
}
