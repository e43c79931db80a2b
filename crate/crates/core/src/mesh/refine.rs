use std::collections::BTreeMap;

use crate::error::Result;

use super::{edge_key, MeshParts, SurfaceMesh};

/// Uniform 1-to-4 subdivision. New boundary vertices whose parent edge lies
/// on one of the mesh's boundary curves are projected onto that curve, so
/// refining a disc converges to the round disc.
pub fn refine(mesh: &SurfaceMesh) -> Result<SurfaceMesh> {
    subdivide(mesh, true)
}

/// Uniform 1-to-4 subdivision without snapping: every coarse vertex and edge
/// is kept and the refined surface is metrically the same polyhedron.
pub fn refine_nested(mesh: &SurfaceMesh) -> Result<SurfaceMesh> {
    subdivide(mesh, false)
}

fn subdivide(mesh: &SurfaceMesh, snap: bool) -> Result<SurfaceMesh> {
    let conn = mesh.connectivity();
    let old = mesh.parts();
    let mut vertices = old.vertices.clone();
    let mut identifications = old.vertex_identifications.clone();
    let mut midpoint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut by_canonical: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let snapping = snap && old.metric_edge_lengths.is_none();

    let mut mid = |a: usize, b: usize, vertices: &mut Vec<[f64; 3]>| -> usize {
        let key = edge_key(a, b);
        if let Some(&m) = midpoint.get(&key) {
            return m;
        }
        let (p, q) = (vertices[a], vertices[b]);
        let mut m = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]), 0.5 * (p[2] + q[2])];
        let ckey = edge_key(conn.canon[a], conn.canon[b]);
        if snapping && conn.edges[&ckey].faces.len() == 1 {
            if let Some(c) = old.boundary_curves.iter().find(|c| c.contains(p) && c.contains(q)) {
                m = c.project(m);
            }
        }
        vertices.push(m);
        let id = vertices.len() - 1;
        midpoint.insert(key, id);
        match by_canonical.get(&ckey) {
            Some(&first) => identifications.push((first, id)),
            None => {
                by_canonical.insert(ckey, id);
            }
        }
        id
    };

    let mut triangles = Vec::with_capacity(4 * old.triangles.len());
    let mut children: Vec<([usize; 3], [usize; 3])> = Vec::new();
    for t in &old.triangles {
        let [a, b, c] = *t;
        let ab = mid(a, b, &mut vertices);
        let bc = mid(b, c, &mut vertices);
        let ca = mid(c, a, &mut vertices);
        let tris = [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]];
        triangles.extend_from_slice(&tris);
        children.push(([ab, bc, ca], *t));
    }

    let metric = match (&old.metric_edge_lengths, &old.chart) {
        (None, _) => None,
        (Some(_), Some(chart)) => {
            let mut map = BTreeMap::new();
            for t in &triangles {
                for i in 0..3 {
                    let (a, b) = (t[i], t[(i + 1) % 3]);
                    map.entry(edge_key(a, b)).or_insert_with(|| chart.edge_length(vertices[a], vertices[b]));
                }
            }
            Some(map)
        }
        (Some(_), None) => {
            let mut map = BTreeMap::new();
            for ([ab, bc, ca], [a, b, c]) in &children {
                let (lab, lbc, lca) =
                    (mesh.raw_edge_length(*a, *b), mesh.raw_edge_length(*b, *c), mesh.raw_edge_length(*c, *a));
                map.insert(edge_key(*a, *ab), 0.5 * lab);
                map.insert(edge_key(*ab, *b), 0.5 * lab);
                map.insert(edge_key(*b, *bc), 0.5 * lbc);
                map.insert(edge_key(*bc, *c), 0.5 * lbc);
                map.insert(edge_key(*c, *ca), 0.5 * lca);
                map.insert(edge_key(*ca, *a), 0.5 * lca);
                // midsegments are parallel to, and half of, the opposite side
                map.insert(edge_key(*ab, *bc), 0.5 * lca);
                map.insert(edge_key(*bc, *ca), 0.5 * lab);
                map.insert(edge_key(*ca, *ab), 0.5 * lbc);
            }
            Some(map)
        }
    };

    let parts = MeshParts {
        vertices,
        triangles,
        vertex_identifications: identifications,
        metric_edge_lengths: metric,
        boundary_curves: old.boundary_curves.clone(),
        chart: old.chart,
    };
    SurfaceMesh::new(parts, mesh.topology())
}
