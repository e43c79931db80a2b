//! Piecewise-linear finite elements: the cotangent stiffness matrix, boundary
//! mass matrices weighted by a density, and the discrete Dirichlet-to-Neumann
//! map obtained by eliminating every non-Steklov vertex.

pub mod sparse;

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{BoundaryPartition, SurfaceMesh};

pub use sparse::{reverse_cuthill_mckee, CsrMatrix, EnvelopeCholesky};

/// How the boundary mass is integrated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MassKind {
    /// Exact integral of the product of hat functions against the linear
    /// interpolant of the density.
    #[default]
    Consistent,
    /// Row-sum lumping of the consistent matrix.
    Lumped,
}

/// Positive linear density on the Steklov vertices: boundary length is
/// measured as `w ds`. Vertices are canonical indices, sorted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDensity {
    vertex_ids: Vec<usize>,
    weights: Vec<f64>,
    region_tags: Option<Vec<u32>>,
}

impl BoundaryDensity {
    pub fn new(vertex_ids: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if vertex_ids.len() != weights.len() {
            return Err(Error::param(format!(
                "{} vertices but {} weights",
                vertex_ids.len(),
                weights.len()
            )));
        }
        if vertex_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("density vertex ids must be strictly increasing"));
        }
        for (&v, &w) in vertex_ids.iter().zip(&weights) {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::NonPositiveWeight { vertex: v, weight: w });
            }
        }
        Ok(Self { vertex_ids, weights, region_tags: None })
    }

    pub fn uniform(mesh: &SurfaceMesh, partition: &BoundaryPartition) -> Self {
        let ids = partition.steklov_vertices(mesh);
        let weights = vec![1.0; ids.len()];
        Self { vertex_ids: ids, weights, region_tags: None }
    }

    /// Samples `f` at the position of every Steklov vertex.
    pub fn from_fn(mesh: &SurfaceMesh, partition: &BoundaryPartition, f: impl Fn([f64; 3]) -> f64) -> Result<Self> {
        let ids = partition.steklov_vertices(mesh);
        let weights = ids.iter().map(|&v| f(mesh.position(v))).collect();
        Self::new(ids, weights)
    }

    /// Same vertices, new weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        let mut d = Self::new(self.vertex_ids.clone(), weights)?;
        d.region_tags = self.region_tags.clone();
        Ok(d)
    }

    /// Attaches one integer tag per vertex, e.g. to mark the two sides of a
    /// density jump.
    pub fn with_region_tags(mut self, tags: Vec<u32>) -> Result<Self> {
        if tags.len() != self.vertex_ids.len() {
            return Err(Error::param("one region tag per density vertex required"));
        }
        self.region_tags = Some(tags);
        Ok(self)
    }

    pub fn vertex_ids(&self) -> &[usize] {
        &self.vertex_ids
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn region_tags(&self) -> Option<&[u32]> {
        self.region_tags.as_deref()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        self.with_weights(self.weights.iter().map(|w| w * factor).collect())
    }

    /// Ratio of the largest to the smallest weight.
    pub fn weight_ratio(&self) -> f64 {
        let max = self.weights.iter().cloned().fold(0.0, f64::max);
        let min = self.weights.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }

    fn check_matches(&self, mesh: &SurfaceMesh, partition: &BoundaryPartition) -> Result<()> {
        if self.vertex_ids != partition.steklov_vertices(mesh) {
            return Err(Error::param("density vertices differ from the Steklov vertices of the partition"));
        }
        Ok(())
    }
}

/// Cotangent of each angle of a triangle with side lengths `l`, where
/// `l[i]` joins corners `i` and `i + 1`; entry `i` is the cotangent of the
/// angle opposite side `i`.
pub fn cotangents(l: [f64; 3]) -> [f64; 3] {
    // Kahan's stable Heron formula on sorted sides
    let mut s = l;
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let [a, b, c] = s;
    let area = 0.25 * ((a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))).max(0.0).sqrt();
    let sq = [l[0] * l[0], l[1] * l[1], l[2] * l[2]];
    [
        (sq[1] + sq[2] - sq[0]) / (4.0 * area),
        (sq[2] + sq[0] - sq[1]) / (4.0 * area),
        (sq[0] + sq[1] - sq[2]) / (4.0 * area),
    ]
}

/// P1 stiffness matrix in canonical vertex numbering, from edge lengths only.
pub fn assemble_stiffness(mesh: &SurfaceMesh) -> CsrMatrix {
    let conn = mesh.connectivity();
    let mut t = Vec::with_capacity(conn.faces.len() * 12);
    for (f, lens) in conn.faces.iter().zip(&conn.face_lengths) {
        let cot = cotangents(*lens);
        for i in 0..3 {
            let (a, b) = (f[i], f[(i + 1) % 3]);
            let w = 0.5 * cot[i];
            t.push((a, b, -w));
            t.push((b, a, -w));
            t.push((a, a, w));
            t.push((b, b, w));
        }
    }
    CsrMatrix::from_triplets(conn.vertex_count(), &t)
}

/// Local mass of an edge of length `len` with endpoint densities `wa`, `wb`.
pub fn edge_mass(len: f64, wa: f64, wb: f64, kind: MassKind) -> [[f64; 2]; 2] {
    let aa = len * (3.0 * wa + wb) / 12.0;
    let bb = len * (wa + 3.0 * wb) / 12.0;
    let ab = len * (wa + wb) / 12.0;
    match kind {
        MassKind::Consistent => [[aa, ab], [ab, bb]],
        MassKind::Lumped => [[aa + ab, 0.0], [0.0, bb + ab]],
    }
}

/// Boundary mass over the Steklov edges, indexed by position in
/// `density.vertex_ids()`.
pub fn assemble_boundary_mass(
    mesh: &SurfaceMesh,
    partition: &BoundaryPartition,
    density: &BoundaryDensity,
    kind: MassKind,
) -> Result<CsrMatrix> {
    density.check_matches(mesh, partition)?;
    let ids = density.vertex_ids();
    let local = |v: usize| ids.binary_search(&v).expect("Steklov vertex");
    let mut t = Vec::new();
    for (e, &s) in mesh.connectivity().boundary_edges.iter().zip(partition.flags()) {
        if !s {
            continue;
        }
        let (a, b) = (local(e.a), local(e.b));
        let m = edge_mass(e.length, density.weights[a], density.weights[b], kind);
        t.push((a, a, m[0][0]));
        t.push((a, b, m[0][1]));
        t.push((b, a, m[1][0]));
        t.push((b, b, m[1][1]));
    }
    Ok(CsrMatrix::from_triplets(ids.len(), &t))
}

/// Weighted length of the Steklov boundary, `integral of w ds`.
pub fn weighted_steklov_length(mesh: &SurfaceMesh, partition: &BoundaryPartition, density: &BoundaryDensity) -> Result<f64> {
    density.check_matches(mesh, partition)?;
    let ids = density.vertex_ids();
    let w = |v: usize| density.weights[ids.binary_search(&v).expect("Steklov vertex")];
    Ok(mesh
        .connectivity()
        .boundary_edges
        .iter()
        .zip(partition.flags())
        .filter(|(_, &s)| s)
        .map(|(e, _)| 0.5 * e.length * (w(e.a) + w(e.b)))
        .sum())
}

/// Discrete Dirichlet-to-Neumann matrix on the Steklov vertices: the Schur
/// complement of the stiffness matrix after eliminating interior and Neumann
/// vertices.
#[derive(Clone, Debug)]
pub struct DtNOperator {
    matrix: DMatrix<f64>,
    steklov_vertices: Vec<usize>,
    eliminated: Vec<usize>,
    stiffness: Arc<CsrMatrix>,
    factor: Option<Arc<EnvelopeCholesky>>,
}

impl DtNOperator {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn steklov_vertices(&self) -> &[usize] {
        &self.steklov_vertices
    }

    pub fn dim(&self) -> usize {
        self.steklov_vertices.len()
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    /// Extends Steklov values harmonically: returns a value per canonical
    /// vertex.
    pub fn harmonic_extension(&self, steklov_values: &[f64]) -> Vec<f64> {
        let n = self.stiffness.dim();
        let mut full = vec![0.0; n];
        for (&v, &x) in self.steklov_vertices.iter().zip(steklov_values) {
            full[v] = x;
        }
        if let Some(f) = &self.factor {
            let rhs: Vec<f64> = self
                .eliminated
                .iter()
                .map(|&i| -self.stiffness.row(i).map(|(j, k)| k * full[j]).sum::<f64>())
                .collect();
            // eliminated rows only see eliminated and Steklov columns; the
            // eliminated entries of `full` are still zero here
            let x = f.solve(&rhs);
            for (&i, xi) in self.eliminated.iter().zip(x) {
                full[i] = xi;
            }
        }
        full
    }
}

/// Builds the DtN matrix for the Steklov part of `partition`.
///
/// Fails with [`Error::UnpinnedComponent`] when some connected component has
/// no Steklov vertex, since the eliminated block is then singular.
pub fn schur_dtn(mesh: &SurfaceMesh, partition: &BoundaryPartition) -> Result<DtNOperator> {
    let k = Arc::new(assemble_stiffness(mesh));
    let n = k.dim();
    let steklov = partition.steklov_vertices(mesh);
    let mut is_s = vec![false; n];
    for &v in &steklov {
        is_s[v] = true;
    }
    let (labels, count) = mesh.connectivity().component_labels();
    let mut pinned = vec![false; count];
    for &v in &steklov {
        pinned[labels[v]] = true;
    }
    if let Some(v) = (0..n).find(|&v| !pinned[labels[v]]) {
        return Err(Error::UnpinnedComponent { vertex: mesh.connectivity().representative[v] });
    }
    let eliminated: Vec<usize> = (0..n).filter(|&v| !is_s[v]).collect();
    let ns = steklov.len();
    let mut matrix = DMatrix::zeros(ns, ns);
    let mut s_local = vec![usize::MAX; n];
    for (a, &v) in steklov.iter().enumerate() {
        s_local[v] = a;
    }
    for (a, &v) in steklov.iter().enumerate() {
        for (j, val) in k.row(v) {
            if is_s[j] {
                matrix[(a, s_local[j])] += val;
            }
        }
    }
    let factor = if eliminated.is_empty() {
        None
    } else {
        let mut i_local = vec![usize::MAX; n];
        for (a, &v) in eliminated.iter().enumerate() {
            i_local[v] = a;
        }
        let kii = k.submatrix(&eliminated);
        // eliminated vertices touching the Steklov set go last, so each
        // coupling column only fills the tail of its forward solve
        let seeds: Vec<usize> = eliminated
            .iter()
            .enumerate()
            .filter(|(_, &v)| k.row(v).any(|(j, _)| is_s[j]))
            .map(|(a, _)| a)
            .collect();
        let order = sparse::reverse_cuthill_mckee_from(&kii, &seeds);
        let f = Arc::new(EnvelopeCholesky::factor_with_ordering(&kii, order)?);
        // DtN = K_SS - Y^T Y with Y = L^{-1} P K_IS
        let tails: Vec<(usize, Vec<f64>)> = steklov
            .par_iter()
            .map(|&s| {
                let mut rhs = vec![0.0; eliminated.len()];
                for (j, val) in k.row(s) {
                    if !is_s[j] {
                        rhs[i_local[j]] = val;
                    }
                }
                f.forward_tail(&rhs)
            })
            .collect();
        let ni = eliminated.len();
        let columns: Vec<Vec<f64>> = (0..ns)
            .into_par_iter()
            .map(|b| {
                let (sb, yb) = &tails[b];
                (0..ns)
                    .map(|a| {
                        let (sa, ya) = &tails[a];
                        let lo = (*sa).max(*sb);
                        if lo >= ni {
                            return 0.0;
                        }
                        ya[lo - sa..].iter().zip(&yb[lo - sb..]).map(|(x, y)| x * y).sum()
                    })
                    .collect()
            })
            .collect();
        for (b, col) in columns.iter().enumerate() {
            for (a, v) in col.iter().enumerate() {
                matrix[(a, b)] -= v;
            }
        }
        Some(f)
    };
    let matrix = 0.5 * (&matrix + matrix.transpose());
    Ok(DtNOperator { matrix, steklov_vertices: steklov, eliminated, stiffness: k, factor })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_disc_mesh, build_flat_cylinder_mesh, build_rectangle_mesh, partition_boundary};

    #[test]
    fn cotangents_of_right_isoceles() {
        let c = cotangents([1.0, 2f64.sqrt(), 1.0]);
        // sides: 0-1 = 1, 1-2 = sqrt 2, 2-0 = 1; right angle at corner 0
        assert!((c[0] - 1.0).abs() < 1e-14);
        assert!(c[1].abs() < 1e-14);
        assert!((c[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn stiffness_annihilates_constants_and_is_symmetric() {
        let m = build_disc_mesh(2).unwrap();
        let k = assemble_stiffness(&m);
        let ones = vec![1.0; k.dim()];
        assert!(k.mul_vec(&ones).iter().all(|x| x.abs() < 1e-12));
        assert!(k.max_asymmetry() < 1e-14);
    }

    #[test]
    fn stiffness_reproduces_dirichlet_energy_of_linear_function() {
        let m = build_rectangle_mesh(2.0, 1.0, 8, 5).unwrap();
        let k = assemble_stiffness(&m);
        let u: Vec<f64> = (0..k.dim()).map(|v| 3.0 * m.position(v)[0] - m.position(v)[1]).collect();
        let energy: f64 = u.iter().zip(k.mul_vec(&u)).map(|(a, b)| a * b).sum();
        assert!((energy - 10.0 * 2.0).abs() < 1e-10);
    }

    #[test]
    fn mass_total_is_weighted_length() {
        let m = build_disc_mesh(2).unwrap();
        let p = BoundaryPartition::all_steklov(&m);
        let d = BoundaryDensity::from_fn(&m, &p, |x| 1.0 + x[0] * x[0]).unwrap();
        let len = weighted_steklov_length(&m, &p, &d).unwrap();
        for kind in [MassKind::Consistent, MassKind::Lumped] {
            let mass = assemble_boundary_mass(&m, &p, &d, kind).unwrap();
            let ones = vec![1.0; mass.dim()];
            let total: f64 = mass.mul_vec(&ones).iter().sum();
            assert!((total - len).abs() < 1e-12);
        }
        assert!((len - 1.5 * 2.0 * std::f64::consts::PI).abs() < 0.02);
    }

    #[test]
    fn nonpositive_weights_rejected() {
        assert!(matches!(
            BoundaryDensity::new(vec![0, 1], vec![1.0, 0.0]),
            Err(Error::NonPositiveWeight { vertex: 1, .. })
        ));
        assert!(BoundaryDensity::new(vec![1, 0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn dtn_is_symmetric_psd_with_constant_kernel() {
        let m = build_disc_mesh(2).unwrap();
        let p = BoundaryPartition::all_steklov(&m);
        let d = schur_dtn(&m, &p).unwrap();
        let a = d.matrix();
        assert!((a - a.transpose()).amax() < 1e-12);
        let ones = nalgebra::DVector::from_element(d.dim(), 1.0);
        assert!((a * &ones).amax() < 1e-10);
        let eig = a.clone().symmetric_eigen();
        assert!(eig.eigenvalues.min() > -1e-10);
    }

    #[test]
    fn harmonic_extension_of_linear_function_on_rectangle() {
        // linear functions are discretely harmonic on a flat mesh
        let m = build_rectangle_mesh(1.0, 1.0, 6, 6).unwrap();
        let p = BoundaryPartition::all_steklov(&m);
        let d = schur_dtn(&m, &p).unwrap();
        let f = |x: [f64; 3]| 2.0 * x[0] + 0.5 * x[1] - 1.0;
        let vals: Vec<f64> = d.steklov_vertices().iter().map(|&v| f(m.position(v))).collect();
        let ext = d.harmonic_extension(&vals);
        for (v, u) in ext.iter().enumerate() {
            assert!((u - f(m.position(v))).abs() < 1e-12);
        }
    }

    #[test]
    fn partial_steklov_is_pinned() {
        let m = build_flat_cylinder_mesh(1.0, 1).unwrap();
        let top = partition_boundary(&m, |e| e.loop_index == 0).unwrap();
        assert!(schur_dtn(&m, &top).is_ok());
        assert!(matches!(partition_boundary(&m, |_| false), Err(Error::ZeroCapacity)));
    }
}
