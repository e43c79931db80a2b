//! Steklov and mixed Steklov-Neumann spectra of the reduced pencil
//! `DtN v = sigma M v`, normalization by weighted boundary length, and the
//! composition laws.

pub mod compose;
pub mod eigen;

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{assemble_stiffness, edge_mass, schur_dtn, BoundaryDensity, DtNOperator, MassKind};
use crate::mesh::{BoundaryPartition, SurfaceMesh};

pub use compose::{brute_force, combine_disjoint, degeneration_limit, CompositionTable};
pub use eigen::{block_lanczos, dense_generalized};

/// Solver settings shared by every spectral computation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub mass: MassKind,
    /// Largest Steklov dimension solved densely; Lanczos above.
    pub dense_limit: usize,
    /// Relative gap below which neighbouring eigenvalues form a cluster.
    pub cluster_tol: f64,
    /// Eigenpairs computed beyond the requested count, so that clusters
    /// straddling the last requested index are seen whole.
    pub extra_modes: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { mass: MassKind::Consistent, dense_limit: 2000, cluster_tol: 1e-6, extra_modes: 3 }
    }
}

/// Eigenvalues `sigma_0 <= sigma_1 <= ...` with `M`-orthonormal eigenvectors
/// on the Steklov vertices.
///
/// At least `requested + 1` pairs are stored; a few more may follow so that
/// cluster information at index `requested` is complete.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// One column per eigenvalue, indexed like `steklov_vertices`.
    pub eigenvectors: DMatrix<f64>,
    pub steklov_vertices: Vec<usize>,
    /// Weighted length of the Steklov boundary.
    pub boundary_length: f64,
    /// `sigma_k * boundary_length`.
    pub normalized: Vec<f64>,
    pub cluster_ids: Vec<usize>,
    pub requested: usize,
}

pub type SteklovSpectrum = Spectrum;
pub type MixedSpectrum = Spectrum;

impl Spectrum {
    pub fn sigma(&self, k: usize) -> f64 {
        self.eigenvalues[k]
    }

    pub fn sigma_bar(&self, k: usize) -> f64 {
        self.normalized[k]
    }

    /// Indices sharing the cluster of `k`.
    pub fn cluster_of(&self, k: usize) -> Vec<usize> {
        let id = self.cluster_ids[k];
        (0..self.cluster_ids.len()).filter(|&i| self.cluster_ids[i] == id).collect()
    }

    /// CSV with columns `k,sigma,sigma_bar,cluster_id` for `k = 0..=requested`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,sigma,sigma_bar,cluster_id\n");
        for k in 0..=self.requested.min(self.eigenvalues.len() - 1) {
            let _ = writeln!(s, "{k},{},{},{}", self.eigenvalues[k], self.normalized[k], self.cluster_ids[k]);
        }
        s
    }
}

/// Groups consecutive sorted eigenvalues whose relative gap is at most `tol`.
pub fn cluster_ids(values: &[f64], tol: f64) -> Vec<usize> {
    let mut ids = Vec::with_capacity(values.len());
    let mut id = 0;
    for (i, &v) in values.iter().enumerate() {
        if i > 0 && (v - values[i - 1]).abs() > tol * v.abs().max(values[i - 1].abs()) {
            id += 1;
        }
        ids.push(id);
    }
    ids
}

/// `sigma * length`.
pub fn normalized_value(sigma: f64, length: f64) -> Result<f64> {
    if !(length > 0.0) {
        return Err(Error::param(format!("boundary length must be positive, got {length}")));
    }
    Ok(sigma * length)
}

/// Solves `d v = sigma m v` for the `count` smallest pairs, densely or by
/// block Lanczos according to `options`.
pub fn solve_pencil(d: &DMatrix<f64>, m: &DMatrix<f64>, count: usize, options: &SolverOptions) -> Result<eigen::EigenPairs> {
    if d.nrows() <= options.dense_limit {
        dense_generalized(d, m, count)
    } else {
        // shift to the scale of the first nonzero eigenvalue of a disc with
        // the same total mass
        let total = m.sum();
        eigen::block_lanczos(d, m, count, 2.0 * std::f64::consts::PI / total, 3)
    }
}

/// A mesh and boundary partition with the DtN matrix computed once, ready
/// for repeated solves under different densities.
#[derive(Clone, Debug)]
pub struct SpectralProblem {
    mesh: SurfaceMesh,
    partition: BoundaryPartition,
    dtn: DtNOperator,
    /// Steklov edges as (local a, local b, length).
    edges: Vec<(usize, usize, f64)>,
    options: SolverOptions,
}

impl SpectralProblem {
    pub fn new(mesh: SurfaceMesh, partition: BoundaryPartition, options: SolverOptions) -> Result<Self> {
        let dtn = schur_dtn(&mesh, &partition)?;
        let ids = dtn.steklov_vertices();
        let edges = mesh
            .connectivity()
            .boundary_edges
            .iter()
            .zip(partition.flags())
            .filter(|(_, &s)| s)
            .map(|(e, _)| {
                (ids.binary_search(&e.a).unwrap(), ids.binary_search(&e.b).unwrap(), e.length)
            })
            .collect();
        Ok(Self { mesh, partition, dtn, edges, options })
    }

    /// Whole boundary Steklov.
    pub fn steklov(mesh: SurfaceMesh, options: SolverOptions) -> Result<Self> {
        let p = BoundaryPartition::all_steklov(&mesh);
        Self::new(mesh, p, options)
    }

    pub fn mesh(&self) -> &SurfaceMesh {
        &self.mesh
    }

    pub fn partition(&self) -> &BoundaryPartition {
        &self.partition
    }

    pub fn dtn(&self) -> &DtNOperator {
        &self.dtn
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    pub fn steklov_vertices(&self) -> &[usize] {
        self.dtn.steklov_vertices()
    }

    pub fn dim(&self) -> usize {
        self.dtn.dim()
    }

    /// Steklov edges as (local index a, local index b, length).
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn uniform_density(&self) -> BoundaryDensity {
        BoundaryDensity::uniform(&self.mesh, &self.partition)
    }

    /// Density built from one weight per Steklov vertex, in local order.
    pub fn density(&self, weights: Vec<f64>) -> Result<BoundaryDensity> {
        BoundaryDensity::new(self.steklov_vertices().to_vec(), weights)
    }

    fn check(&self, density: &BoundaryDensity) -> Result<()> {
        if density.vertex_ids() != self.steklov_vertices() {
            return Err(Error::param("density does not live on this problem's Steklov vertices"));
        }
        Ok(())
    }

    pub fn mass_matrix(&self, density: &BoundaryDensity) -> Result<DMatrix<f64>> {
        self.check(density)?;
        let w = density.weights();
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for &(a, b, len) in &self.edges {
            let e = edge_mass(len, w[a], w[b], self.options.mass);
            m[(a, a)] += e[0][0];
            m[(a, b)] += e[0][1];
            m[(b, a)] += e[1][0];
            m[(b, b)] += e[1][1];
        }
        Ok(m)
    }

    /// Weighted Steklov length `sum len (w_a + w_b) / 2`.
    pub fn length(&self, density: &BoundaryDensity) -> Result<f64> {
        self.check(density)?;
        let w = density.weights();
        Ok(self.edges.iter().map(|&(a, b, len)| 0.5 * len * (w[a] + w[b])).sum())
    }

    /// First `k_max + 1` eigenpairs (plus the configured extras).
    pub fn solve(&self, density: &BoundaryDensity, k_max: usize) -> Result<Spectrum> {
        let n = self.dim();
        if k_max >= n {
            return Err(Error::ModesExceedSpace { requested: k_max + 1, available: n });
        }
        let m = self.mass_matrix(density)?;
        let count = (k_max + 1 + self.options.extra_modes).min(n);
        let (values, vectors) = solve_pencil(self.dtn.matrix(), &m, count, &self.options)?;
        let length = m.sum();
        let normalized = values.iter().map(|s| s * length).collect();
        let clusters = cluster_ids(&values, self.options.cluster_tol);
        Ok(Spectrum {
            eigenvalues: values,
            eigenvectors: vectors,
            steklov_vertices: self.steklov_vertices().to_vec(),
            boundary_length: length,
            normalized,
            cluster_ids: clusters,
            requested: k_max,
        })
    }
}

/// Steklov spectrum with the whole boundary carrying the Steklov condition.
/// `None` means unit density.
pub fn steklov_spectrum(
    mesh: &SurfaceMesh,
    density: Option<&BoundaryDensity>,
    k_max: usize,
    options: &SolverOptions,
) -> Result<SteklovSpectrum> {
    let problem = SpectralProblem::steklov(mesh.clone(), *options)?;
    let uniform;
    let d = match density {
        Some(d) => d,
        None => {
            uniform = problem.uniform_density();
            &uniform
        }
    };
    problem.solve(d, k_max)
}

/// Mixed Steklov-Neumann spectrum; the density lives on the Steklov vertices.
pub fn mixed_spectrum(
    mesh: &SurfaceMesh,
    partition: &BoundaryPartition,
    density: Option<&BoundaryDensity>,
    k_max: usize,
    options: &SolverOptions,
) -> Result<MixedSpectrum> {
    let problem = SpectralProblem::new(mesh.clone(), partition.clone(), *options)?;
    let uniform;
    let d = match density {
        Some(d) => d,
        None => {
            uniform = problem.uniform_density();
            &uniform
        }
    };
    problem.solve(d, k_max)
}

/// Finite eigenvalues of the full pencil `(K, M)` over all vertices, computed
/// without the Schur reduction through `(K + s M)^{-1} M` for a positive
/// shift `s`. Dense; meant for coarse meshes as an independent check.
pub fn full_pencil_eigenvalues(
    mesh: &SurfaceMesh,
    partition: &BoundaryPartition,
    density: &BoundaryDensity,
    count: usize,
    shift: f64,
    mass: MassKind,
) -> Result<Vec<f64>> {
    let k = assemble_stiffness(mesh).to_dense();
    let n = k.nrows();
    let ids = density.vertex_ids();
    if ids != partition.steklov_vertices(mesh).as_slice() {
        return Err(Error::param("density does not match partition"));
    }
    let w = density.weights();
    let mut m = DMatrix::zeros(n, n);
    for (e, &s) in mesh.connectivity().boundary_edges.iter().zip(partition.flags()) {
        if s {
            let (la, lb) = (ids.binary_search(&e.a).unwrap(), ids.binary_search(&e.b).unwrap());
            let em = edge_mass(e.length, w[la], w[lb], mass);
            m[(e.a, e.a)] += em[0][0];
            m[(e.a, e.b)] += em[0][1];
            m[(e.b, e.a)] += em[1][0];
            m[(e.b, e.b)] += em[1][1];
        }
    }
    let a = (&k + &m * shift)
        .cholesky()
        .ok_or_else(|| Error::EigenSolver("K + sM not positive definite".into()))?;
    let l = a.l();
    let x = l.solve_lower_triangular(&m).unwrap();
    let c = l.solve_lower_triangular(&x.transpose()).unwrap();
    let c = 0.5 * (&c + c.transpose());
    let mu: DVector<f64> = c.symmetric_eigenvalues();
    let scale = mu.amax();
    let mut sigma: Vec<f64> = mu.iter().filter(|&&x| x > 1e-12 * scale).map(|&x| 1.0 / x - shift).collect();
    sigma.sort_by(f64::total_cmp);
    sigma.truncate(count);
    Ok(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_disc_mesh, build_rectangle_mesh, partition_boundary};
    use std::f64::consts::PI;

    #[test]
    fn disc_spectrum_pairs_and_normalization() {
        let m = build_disc_mesh(3).unwrap();
        let s = steklov_spectrum(&m, None, 6, &SolverOptions::default()).unwrap();
        assert!(s.sigma(0).abs() < 1e-9 * s.sigma(1));
        for n in 1..=3 {
            let (a, b) = (s.sigma(2 * n - 1), s.sigma(2 * n));
            assert!((a - n as f64).abs() < 0.02 * n as f64, "sigma {a} for mode {n}");
            assert!((a - b).abs() < 1e-6 * a);
            assert_eq!(s.cluster_ids[2 * n - 1], s.cluster_ids[2 * n]);
        }
        assert!((s.sigma_bar(1) - 2.0 * PI).abs() < 0.05);
        let csv = s.to_csv();
        assert_eq!(csv.lines().count(), 8);
        assert!(csv.starts_with("k,sigma,sigma_bar,cluster_id\n0,"));
    }

    #[test]
    fn density_scaling_leaves_normalized_values() {
        let m = build_disc_mesh(2).unwrap();
        let p = SpectralProblem::steklov(m, SolverOptions::default()).unwrap();
        let d = p.density((0..p.dim()).map(|i| 1.0 + 0.3 * (i as f64).sin()).collect()).unwrap();
        let a = p.solve(&d, 4).unwrap();
        let b = p.solve(&d.scaled(4.0).unwrap(), 4).unwrap();
        for k in 1..=4 {
            assert!((a.sigma(k) - 4.0 * b.sigma(k)).abs() < 1e-10 * a.sigma(k));
            assert!((a.sigma_bar(k) - b.sigma_bar(k)).abs() < 1e-10 * a.sigma_bar(k));
        }
    }

    #[test]
    fn schur_route_matches_full_pencil() {
        let m = build_disc_mesh(2).unwrap();
        let p = BoundaryPartition::all_steklov(&m);
        let d = BoundaryDensity::from_fn(&m, &p, |x| 1.0 + 0.5 * x[0]).unwrap();
        let s = steklov_spectrum(&m, Some(&d), 8, &SolverOptions::default()).unwrap();
        let full = full_pencil_eigenvalues(&m, &p, &d, 9, 1.0, MassKind::Consistent).unwrap();
        for k in 1..=8 {
            assert!((s.sigma(k) - full[k]).abs() < 1e-9 * s.sigma(k));
        }
    }

    #[test]
    fn lanczos_route_matches_dense() {
        let m = build_disc_mesh(3).unwrap();
        let dense = steklov_spectrum(&m, None, 6, &SolverOptions::default()).unwrap();
        let opts = SolverOptions { dense_limit: 0, ..Default::default() };
        let lanczos = steklov_spectrum(&m, None, 6, &opts).unwrap();
        for k in 0..=6 {
            assert!((dense.sigma(k) - lanczos.sigma(k)).abs() < 1e-8 * (1.0 + dense.sigma(k)));
        }
    }

    #[test]
    fn modes_exceeding_space_rejected() {
        let m = build_rectangle_mesh(1.0, 1.0, 1, 1).unwrap();
        let r = steklov_spectrum(&m, None, 4, &SolverOptions::default());
        assert!(matches!(r, Err(Error::ModesExceedSpace { .. })));
        // single triangle: all vertices Steklov, DtN equals K
        assert!(steklov_spectrum(&m, None, 3, &SolverOptions::default()).is_ok());
    }

    #[test]
    fn sloshing_rectangle_first_mode() {
        let m = build_rectangle_mesh(PI, 1.0, 96, 32).unwrap();
        let top = partition_boundary(&m, |e| e.midpoint[1] > 1.0 - 1e-12).unwrap();
        let s = mixed_spectrum(&m, &top, None, 3, &SolverOptions::default()).unwrap();
        assert!((s.sigma(1) - 1f64.tanh()).abs() < 2e-3);
        assert!((s.boundary_length - PI).abs() < 1e-12);
    }

    #[test]
    fn clusters_group_close_values() {
        assert_eq!(cluster_ids(&[0.0, 1.0, 1.0 + 1e-9, 2.0], 1e-6), vec![0, 1, 1, 2]);
        assert!(normalized_value(1.0, 0.0).is_err());
        assert_eq!(normalized_value(1.0, 2.0 * PI).unwrap(), 2.0 * PI);
    }
}
