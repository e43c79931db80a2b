//! Triangulated surfaces with boundary.
//!
//! A [`SurfaceMesh`] stores raw vertices and triangles exactly as a builder
//! produced them. Gluings (periodic seams, the reversed seam of a Möbius band)
//! are kept as explicit vertex identifications and only resolved when the
//! [`Connectivity`] is derived. Everything downstream (assembly, boundary
//! partitions, densities) works on the compact canonical vertex numbering of
//! that connectivity.

pub mod builders;
pub mod off;
mod refine;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use builders::{
    build_annulus_mesh, build_collar_mesh, build_disc_mesh, build_flat_cylinder_mesh,
    build_graded_cylinder_mesh, build_graded_moebius_mesh, build_half_disc_mesh,
    build_moebius_mesh, build_notched_disc_mesh, build_rectangle_mesh, collar_width,
    graded_nodes, Focus, Grading,
};
pub use refine::{refine, refine_nested};

/// Genus, number of boundary circles and orientability of a compact surface.
///
/// For non-orientable surfaces `genus` is the genus of the orientable double
/// cover.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurfaceTopology {
    pub genus: u32,
    pub boundary_components: u32,
    pub orientable: bool,
}

impl SurfaceTopology {
    pub fn new(genus: u32, boundary_components: u32, orientable: bool) -> Result<Self> {
        if boundary_components == 0 {
            return Err(Error::param("a surface with boundary needs at least one boundary component"));
        }
        Ok(Self { genus, boundary_components, orientable })
    }

    pub fn disc() -> Self {
        Self { genus: 0, boundary_components: 1, orientable: true }
    }

    pub fn annulus() -> Self {
        Self { genus: 0, boundary_components: 2, orientable: true }
    }

    pub fn moebius() -> Self {
        Self { genus: 0, boundary_components: 1, orientable: false }
    }

    pub fn euler_characteristic(&self) -> i64 {
        let g = self.genus as i64;
        let l = self.boundary_components as i64;
        if self.orientable {
            2 - 2 * g - l
        } else {
            // half of the double cover, which has 2l boundary circles
            1 - g - l
        }
    }

    /// Upper bound on the normalized eigenvalue `sigma_bar_k` valid for every
    /// metric on a surface of this topology: `2 pi k (genus + l)` when
    /// orientable, `4 pi k (genus + 2 l)` otherwise.
    pub fn sigma_bar_bound(&self, k: usize) -> f64 {
        let g = self.genus as f64;
        let l = self.boundary_components as f64;
        let k = k as f64;
        if self.orientable {
            2.0 * std::f64::consts::PI * k * (g + l)
        } else {
            4.0 * std::f64::consts::PI * k * (g + 2.0 * l)
        }
    }
}

/// Analytic boundary curve used to snap new boundary vertices on refinement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BoundaryCurve {
    Circle { center: [f64; 2], radius: f64 },
}

impl BoundaryCurve {
    pub fn contains(&self, p: [f64; 3]) -> bool {
        match *self {
            BoundaryCurve::Circle { center, radius } => {
                let d = (p[0] - center[0]).hypot(p[1] - center[1]);
                (d - radius).abs() <= 1e-9 * radius.max(1.0)
            }
        }
    }

    pub fn project(&self, p: [f64; 3]) -> [f64; 3] {
        match *self {
            BoundaryCurve::Circle { center, radius } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                let d = dx.hypot(dy);
                [center[0] + radius * dx / d, center[1] + radius * dy / d, p[2]]
            }
        }
    }
}

/// Kind of region covered by a collar chart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StripType {
    /// `[0, w) x S^1`, a collar around a boundary geodesic.
    BoundaryCollar,
    /// `(-w, w) x S^1`, a collar around an interior geodesic.
    InteriorCollar,
    /// `(-w, w) x [0, 2 pi]` left unglued, a strip around a geodesic arc
    /// crossing the boundary twice.
    CrossingStrip,
}

/// Explicit collar coordinates `(t, theta)` around a closed geodesic of length
/// `l`, with metric `(l / (2 pi cos(l t / 2 pi)))^2 (dt^2 + dtheta^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollarChart {
    pub geodesic_length: f64,
    pub width: f64,
    pub strip_type: StripType,
}

impl CollarChart {
    pub fn new(geodesic_length: f64, strip_type: StripType) -> Result<Self> {
        if !(geodesic_length > 0.0 && geodesic_length.is_finite()) {
            return Err(Error::param(format!("geodesic length must be positive, got {geodesic_length}")));
        }
        Ok(Self { geodesic_length, width: collar_width(geodesic_length), strip_type })
    }

    /// Conformal factor of the collar metric at height `t`.
    pub fn metric_factor(&self, t: f64) -> f64 {
        self.length_scale(t).powi(2)
    }

    /// Square root of [`Self::metric_factor`]: the local length scale.
    pub fn length_scale(&self, t: f64) -> f64 {
        let l = self.geodesic_length;
        l / (2.0 * std::f64::consts::PI * (l * t / (2.0 * std::f64::consts::PI)).cos())
    }

    /// Metric length of the segment between two chart points `(theta, t)`,
    /// using the length scale at the midpoint.
    pub fn edge_length(&self, p: [f64; 3], q: [f64; 3]) -> f64 {
        let coord = (p[0] - q[0]).hypot(p[1] - q[1]);
        coord * self.length_scale(0.5 * (p[1] + q[1]))
    }
}

/// An edge of the boundary, in canonical vertex numbering.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    /// Endpoints in the order they are met walking the loop.
    pub a: usize,
    pub b: usize,
    pub length: f64,
    /// Midpoint of the raw coordinates of the owning triangle's edge.
    pub midpoint: [f64; 3],
    pub loop_index: usize,
    pub face: usize,
}

impl BoundaryEdge {
    pub fn key(&self) -> (usize, usize) {
        (self.a.min(self.b), self.a.max(self.b))
    }
}

#[derive(Clone, Debug)]
pub struct EdgeRecord {
    pub faces: Vec<usize>,
    pub length: f64,
    /// Raw endpoints in the first face that uses this edge.
    pub raw: (usize, usize),
}

/// Canonical (gluing-resolved) view of a [`SurfaceMesh`].
#[derive(Clone, Debug)]
pub struct Connectivity {
    /// Raw vertex index to canonical index.
    pub canon: Vec<usize>,
    /// Canonical index to its smallest raw representative.
    pub representative: Vec<usize>,
    pub faces: Vec<[usize; 3]>,
    /// `face_lengths[f][i]` is the length of the edge `faces[f][i] -> faces[f][(i + 1) % 3]`.
    pub face_lengths: Vec<[f64; 3]>,
    pub edges: BTreeMap<(usize, usize), EdgeRecord>,
    /// Boundary edges, loop by loop, in walking order.
    pub boundary_edges: Vec<BoundaryEdge>,
    pub loops: Vec<Vec<usize>>,
}

impl Connectivity {
    pub fn vertex_count(&self) -> usize {
        self.representative.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_count() as i64 - self.edges.len() as i64 + self.faces.len() as i64
    }

    /// Sorted canonical indices of all boundary vertices.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.loops.iter().flatten().copied().collect();
        v.sort_unstable();
        v
    }

    pub fn boundary_length(&self) -> f64 {
        self.boundary_edges.iter().map(|e| e.length).sum()
    }

    /// Connected components as a label per canonical vertex.
    pub fn component_labels(&self) -> (Vec<usize>, usize) {
        let n = self.vertex_count();
        let mut uf = UnionFind::new(n);
        for f in &self.faces {
            uf.union(f[0], f[1]);
            uf.union(f[1], f[2]);
        }
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        let mut roots = BTreeMap::new();
        for (v, slot) in label.iter_mut().enumerate() {
            let r = uf.find(v);
            *slot = *roots.entry(r).or_insert_with(|| {
                next += 1;
                next - 1
            });
        }
        (label, next)
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Links the larger root under the smaller one so roots are class minima.
    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// Triangulated compact surface with non-empty boundary.
///
/// Immutable once built; the derived [`Connectivity`] is computed and
/// validated at construction.
#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    vertices: Vec<[f64; 3]>,
    triangles: Vec<[usize; 3]>,
    boundary_loops: Vec<Vec<usize>>,
    vertex_identifications: Vec<(usize, usize)>,
    topology: SurfaceTopology,
    metric_edge_lengths: Option<BTreeMap<(usize, usize), f64>>,
    boundary_curves: Vec<BoundaryCurve>,
    chart: Option<CollarChart>,
    conn: Connectivity,
}

/// Unvalidated pieces of a mesh, as produced by builders and loaders.
#[derive(Clone, Debug, Default)]
pub struct MeshParts {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
    pub vertex_identifications: Vec<(usize, usize)>,
    pub metric_edge_lengths: Option<BTreeMap<(usize, usize), f64>>,
    pub boundary_curves: Vec<BoundaryCurve>,
    pub chart: Option<CollarChart>,
}

pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl SurfaceMesh {
    /// Assembles and validates a mesh. Fails when the triangulation is not a
    /// surface with simple boundary loops, when a face violates the triangle
    /// inequality, or when the Euler characteristic or loop count disagree
    /// with `topology`.
    pub fn new(parts: MeshParts, topology: SurfaceTopology) -> Result<Self> {
        let conn = build_connectivity(&parts)?;
        let boundary_loops = conn
            .loops
            .iter()
            .map(|lp| lp.iter().map(|&c| conn.representative[c]).collect())
            .collect();
        let mesh = Self {
            vertices: parts.vertices,
            triangles: parts.triangles,
            boundary_loops,
            vertex_identifications: parts.vertex_identifications,
            topology,
            metric_edge_lengths: parts.metric_edge_lengths,
            boundary_curves: parts.boundary_curves,
            chart: parts.chart,
            conn,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<()> {
        let conn = &self.conn;
        if conn.loops.is_empty() {
            return Err(Error::mesh("mesh has no boundary"));
        }
        if conn.loops.len() != self.topology.boundary_components as usize {
            return Err(Error::mesh(format!(
                "found {} boundary loops, topology declares {}",
                conn.loops.len(),
                self.topology.boundary_components
            )));
        }
        let chi = conn.euler_characteristic();
        if chi != self.topology.euler_characteristic() {
            return Err(Error::mesh(format!(
                "Euler characteristic {chi} does not match topology {:?}",
                self.topology
            )));
        }
        for (f, l) in conn.face_lengths.iter().enumerate() {
            let [a, b, c] = *l;
            if !(a < b + c && b < a + c && c < a + b) {
                return Err(Error::DegenerateFace { face: f, lengths: *l });
            }
        }
        Ok(())
    }

    pub fn parts(&self) -> MeshParts {
        MeshParts {
            vertices: self.vertices.clone(),
            triangles: self.triangles.clone(),
            vertex_identifications: self.vertex_identifications.clone(),
            metric_edge_lengths: self.metric_edge_lengths.clone(),
            boundary_curves: self.boundary_curves.clone(),
            chart: self.chart,
        }
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Boundary cycles, listed by the smallest raw index of each glued class.
    pub fn boundary_loops(&self) -> &[Vec<usize>] {
        &self.boundary_loops
    }

    pub fn vertex_identifications(&self) -> &[(usize, usize)] {
        &self.vertex_identifications
    }

    pub fn topology(&self) -> SurfaceTopology {
        self.topology
    }

    pub fn metric_edge_lengths(&self) -> Option<&BTreeMap<(usize, usize), f64>> {
        self.metric_edge_lengths.as_ref()
    }

    pub fn boundary_curves(&self) -> &[BoundaryCurve] {
        &self.boundary_curves
    }

    pub fn chart(&self) -> Option<&CollarChart> {
        self.chart.as_ref()
    }

    pub fn connectivity(&self) -> &Connectivity {
        &self.conn
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.conn.euler_characteristic()
    }

    pub fn boundary_length(&self) -> f64 {
        self.conn.boundary_length()
    }

    pub fn max_edge_length(&self) -> f64 {
        self.conn.edges.values().map(|e| e.length).fold(0.0, f64::max)
    }

    /// Length of a raw edge in the mesh metric.
    pub fn raw_edge_length(&self, a: usize, b: usize) -> f64 {
        raw_length(&self.vertices, self.metric_edge_lengths.as_ref(), a, b).unwrap_or(f64::NAN)
    }

    /// Canonical index of a raw vertex.
    pub fn canonical(&self, raw: usize) -> usize {
        self.conn.canon[raw]
    }

    /// Position of a canonical vertex (its smallest raw representative).
    pub fn position(&self, canonical: usize) -> [f64; 3] {
        self.vertices[self.conn.representative[canonical]]
    }

    /// Copy of this mesh with every metric length multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::param("scale factor must be positive"));
        }
        let mut parts = self.parts();
        match parts.metric_edge_lengths.as_mut() {
            Some(map) => map.values_mut().for_each(|l| *l *= factor),
            None => {
                for v in &mut parts.vertices {
                    v.iter_mut().for_each(|x| *x *= factor);
                }
                for c in &mut parts.boundary_curves {
                    let BoundaryCurve::Circle { center, radius } = c;
                    center.iter_mut().for_each(|x| *x *= factor);
                    *radius *= factor;
                }
            }
        }
        parts.chart = None;
        SurfaceMesh::new(parts, self.topology)
    }

    /// Copy of this mesh whose metric lengths are replaced by
    /// `f(canonical_a, canonical_b, current_length)`, called once per
    /// canonical edge so glued copies stay consistent.
    pub fn with_edge_lengths(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Result<Self> {
        let new_len: BTreeMap<(usize, usize), f64> =
            self.conn.edges.iter().map(|(&(a, b), rec)| ((a, b), f(a, b, rec.length))).collect();
        let mut map = BTreeMap::new();
        for t in &self.triangles {
            for i in 0..3 {
                let key = edge_key(t[i], t[(i + 1) % 3]);
                let ckey = edge_key(self.conn.canon[key.0], self.conn.canon[key.1]);
                map.insert(key, new_len[&ckey]);
            }
        }
        let mut parts = self.parts();
        parts.metric_edge_lengths = Some(map);
        parts.chart = None;
        SurfaceMesh::new(parts, self.topology)
    }
}

fn raw_length(
    vertices: &[[f64; 3]],
    metric: Option<&BTreeMap<(usize, usize), f64>>,
    a: usize,
    b: usize,
) -> Option<f64> {
    match metric {
        Some(map) => map.get(&edge_key(a, b)).copied(),
        None => {
            let (p, q) = (vertices[a], vertices[b]);
            Some(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt())
        }
    }
}

pub(crate) fn build_connectivity(parts: &MeshParts) -> Result<Connectivity> {
    let n_raw = parts.vertices.len();
    if parts.triangles.is_empty() {
        return Err(Error::mesh("mesh has no triangles"));
    }
    let mut uf = UnionFind::new(n_raw);
    for &(a, b) in &parts.vertex_identifications {
        if a >= n_raw || b >= n_raw {
            return Err(Error::mesh(format!("identification ({a}, {b}) out of range")));
        }
        uf.union(a, b);
    }
    let mut canon = vec![usize::MAX; n_raw];
    let mut representative = Vec::new();
    for v in 0..n_raw {
        let r = uf.find(v);
        if r == v {
            canon[v] = representative.len();
            representative.push(v);
        }
    }
    for v in 0..n_raw {
        canon[v] = canon[uf.find(v)];
    }

    let mut faces = Vec::with_capacity(parts.triangles.len());
    let mut face_lengths = Vec::with_capacity(parts.triangles.len());
    let mut edges: BTreeMap<(usize, usize), EdgeRecord> = BTreeMap::new();
    let mut used = vec![false; representative.len()];
    for (fi, t) in parts.triangles.iter().enumerate() {
        if t.iter().any(|&v| v >= n_raw) {
            return Err(Error::mesh(format!("triangle {fi} references a missing vertex")));
        }
        let c = [canon[t[0]], canon[t[1]], canon[t[2]]];
        if c[0] == c[1] || c[1] == c[2] || c[0] == c[2] {
            return Err(Error::mesh(format!("triangle {fi} collapses under vertex identification")));
        }
        let mut lens = [0.0; 3];
        for i in 0..3 {
            let (ra, rb) = (t[i], t[(i + 1) % 3]);
            let l = raw_length(&parts.vertices, parts.metric_edge_lengths.as_ref(), ra, rb)
                .ok_or_else(|| Error::mesh(format!("missing metric length for edge ({ra}, {rb})")))?;
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::DegenerateFace { face: fi, lengths: [l, l, l] });
            }
            lens[i] = l;
            let key = edge_key(c[i], c[(i + 1) % 3]);
            let rec = edges.entry(key).or_insert_with(|| EdgeRecord { faces: Vec::new(), length: l, raw: (ra, rb) });
            if (rec.length - l).abs() > 1e-9 * l.max(rec.length) {
                return Err(Error::mesh(format!(
                    "glued edge {key:?} has inconsistent lengths {} and {l}",
                    rec.length
                )));
            }
            rec.faces.push(fi);
        }
        for &v in &c {
            used[v] = true;
        }
        faces.push(c);
        face_lengths.push(lens);
    }
    if let Some(v) = used.iter().position(|u| !u) {
        return Err(Error::mesh(format!("vertex {} is not used by any triangle", representative[v])));
    }

    let mut bnbr: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (key, rec) in &edges {
        match rec.faces.len() {
            1 => {
                bnbr.entry(key.0).or_default().push(key.1);
                bnbr.entry(key.1).or_default().push(key.0);
            }
            2 => {}
            n => return Err(Error::mesh(format!("edge {key:?} belongs to {n} triangles"))),
        }
    }
    for (v, nb) in &bnbr {
        if nb.len() != 2 {
            return Err(Error::mesh(format!(
                "boundary vertex {} has {} boundary edges; loops must be simple",
                representative[*v],
                nb.len()
            )));
        }
    }

    let mut loops = Vec::new();
    let mut boundary_edges = Vec::new();
    let mut visited: BTreeMap<usize, bool> = bnbr.keys().map(|&v| (v, false)).collect();
    for &start in bnbr.keys() {
        if visited[&start] {
            continue;
        }
        let loop_index = loops.len();
        let mut lp = vec![start];
        visited.insert(start, true);
        let nb = &bnbr[&start];
        let mut prev = start;
        let mut cur = nb[0].min(nb[1]);
        loop {
            let rec = &edges[&edge_key(prev, cur)];
            boundary_edges.push(make_boundary_edge(parts, rec, prev, cur, loop_index));
            if cur == start {
                break;
            }
            visited.insert(cur, true);
            lp.push(cur);
            let nb = &bnbr[&cur];
            let next = if nb[0] == prev { nb[1] } else { nb[0] };
            prev = cur;
            cur = next;
        }
        loops.push(lp);
    }

    Ok(Connectivity { canon, representative, faces, face_lengths, edges, boundary_edges, loops })
}

fn make_boundary_edge(parts: &MeshParts, rec: &EdgeRecord, a: usize, b: usize, loop_index: usize) -> BoundaryEdge {
    let (p, q) = (parts.vertices[rec.raw.0], parts.vertices[rec.raw.1]);
    BoundaryEdge {
        a,
        b,
        length: rec.length,
        midpoint: [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]), 0.5 * (p[2] + q[2])],
        loop_index,
        face: rec.faces[0],
    }
}

/// Splitting of the boundary edges into a Steklov part and a Neumann part.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryPartition {
    /// One flag per entry of [`Connectivity::boundary_edges`].
    steklov: Vec<bool>,
}

impl BoundaryPartition {
    /// Every boundary edge carries the Steklov condition.
    pub fn all_steklov(mesh: &SurfaceMesh) -> Self {
        Self { steklov: vec![true; mesh.conn.boundary_edges.len()] }
    }

    pub fn from_flags(mesh: &SurfaceMesh, steklov: Vec<bool>) -> Result<Self> {
        if steklov.len() != mesh.conn.boundary_edges.len() {
            return Err(Error::param(format!(
                "partition has {} flags, mesh has {} boundary edges",
                steklov.len(),
                mesh.conn.boundary_edges.len()
            )));
        }
        if !steklov.iter().any(|&s| s) {
            return Err(Error::ZeroCapacity);
        }
        Ok(Self { steklov })
    }

    pub fn is_steklov(&self, boundary_edge: usize) -> bool {
        self.steklov[boundary_edge]
    }

    pub fn flags(&self) -> &[bool] {
        &self.steklov
    }

    pub fn is_pure_steklov(&self) -> bool {
        self.steklov.iter().all(|&s| s)
    }

    pub fn steklov_edges(&self, mesh: &SurfaceMesh) -> Vec<(usize, usize)> {
        self.select(mesh, true)
    }

    pub fn neumann_edges(&self, mesh: &SurfaceMesh) -> Vec<(usize, usize)> {
        self.select(mesh, false)
    }

    fn select(&self, mesh: &SurfaceMesh, flag: bool) -> Vec<(usize, usize)> {
        mesh.conn
            .boundary_edges
            .iter()
            .zip(&self.steklov)
            .filter(|(_, &s)| s == flag)
            .map(|(e, _)| e.key())
            .collect()
    }

    /// Sorted canonical vertices touched by at least one Steklov edge.
    pub fn steklov_vertices(&self, mesh: &SurfaceMesh) -> Vec<usize> {
        let mut v: Vec<usize> = mesh
            .conn
            .boundary_edges
            .iter()
            .zip(&self.steklov)
            .filter(|(_, &s)| s)
            .flat_map(|(e, _)| [e.a, e.b])
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Length of the Steklov part in the mesh metric.
    pub fn steklov_length(&self, mesh: &SurfaceMesh) -> f64 {
        mesh.conn
            .boundary_edges
            .iter()
            .zip(&self.steklov)
            .filter(|(_, &s)| s)
            .map(|(e, _)| e.length)
            .sum()
    }
}

/// Marks each boundary edge Steklov when `selector` returns true, Neumann
/// otherwise.
pub fn partition_boundary(
    mesh: &SurfaceMesh,
    selector: impl Fn(&BoundaryEdge) -> bool,
) -> Result<BoundaryPartition> {
    let flags = mesh.conn.boundary_edges.iter().map(selector).collect();
    BoundaryPartition::from_flags(mesh, flags)
}

/// Selector for edges whose endpoints both lie on `curve`.
pub fn on_curve(mesh: &SurfaceMesh, curve: BoundaryCurve) -> impl Fn(&BoundaryEdge) -> bool + '_ {
    move |e: &BoundaryEdge| curve.contains(mesh.position(e.a)) && curve.contains(mesh.position(e.b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_triangle() -> SurfaceMesh {
        let parts = MeshParts {
            vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            triangles: vec![[0, 1, 2]],
            ..Default::default()
        };
        SurfaceMesh::new(parts, SurfaceTopology::disc()).unwrap()
    }

    #[test]
    fn single_triangle_is_a_disc() {
        let m = single_triangle();
        assert_eq!(m.euler_characteristic(), 1);
        assert_eq!(m.boundary_loops().len(), 1);
        assert_eq!(m.boundary_loops()[0].len(), 3);
        assert!((m.boundary_length() - (2.0 + 2f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn topology_requires_boundary() {
        assert!(SurfaceTopology::new(1, 0, true).is_err());
        assert_eq!(SurfaceTopology::moebius().euler_characteristic(), 0);
        assert_eq!(SurfaceTopology::new(1, 2, true).unwrap().euler_characteristic(), -2);
    }

    #[test]
    fn rejects_triangle_inequality_violation() {
        let mut lens = BTreeMap::new();
        lens.insert((0, 1), 1.0);
        lens.insert((1, 2), 1.0);
        lens.insert((0, 2), 2.5);
        let parts = MeshParts {
            vertices: vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            triangles: vec![[0, 1, 2]],
            metric_edge_lengths: Some(lens),
            ..Default::default()
        };
        assert!(matches!(SurfaceMesh::new(parts, SurfaceTopology::disc()), Err(Error::DegenerateFace { .. })));
    }

    #[test]
    fn rejects_wrong_topology() {
        let parts = single_triangle().parts();
        assert!(SurfaceMesh::new(parts, SurfaceTopology::annulus()).is_err());
    }

    #[test]
    fn all_edges_selector_is_pure_steklov() {
        let m = single_triangle();
        let p = partition_boundary(&m, |_| true).unwrap();
        assert!(p.is_pure_steklov());
        assert!(p.neumann_edges(&m).is_empty());
        assert_eq!(p.steklov_edges(&m).len(), 3);
    }

    #[test]
    fn empty_selector_is_zero_capacity() {
        let m = single_triangle();
        assert!(matches!(partition_boundary(&m, |_| false), Err(Error::ZeroCapacity)));
    }
}
