//! Compressed sparse rows, reverse Cuthill-McKee ordering and an envelope
//! (skyline) Cholesky factorization for the symmetric positive definite
//! systems that arise from pinned stiffness matrices.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Square sparse matrix in CSR form with sorted, duplicate-free columns.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate entries.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            rows[i].push((j, v));
        }
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for row in &mut rows {
            row.sort_by_key(|e| e.0);
            let mut last = usize::MAX;
            for &(j, v) in row.iter() {
                if j == last {
                    *data.last_mut().unwrap() += v;
                } else {
                    indices.push(j);
                    data.push(v);
                    last = j;
                }
            }
            indptr.push(indices.len());
        }
        Self { n, indptr, indices, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.data[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(p) => self.data[r.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// Principal submatrix on `keep` (in the given order).
    pub fn submatrix(&self, keep: &[usize]) -> Self {
        let mut local = vec![usize::MAX; self.n];
        for (k, &g) in keep.iter().enumerate() {
            local[g] = k;
        }
        let mut t = Vec::new();
        for (k, &g) in keep.iter().enumerate() {
            for (j, v) in self.row(g) {
                if local[j] != usize::MAX {
                    t.push((k, local[j], v));
                }
            }
        }
        Self::from_triplets(keep.len(), &t)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Writes the matrix in Matrix Market coordinate format (general, real).
    pub fn to_matrix_market(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.n, self.n, self.nnz());
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                let _ = writeln!(s, "{} {} {}", i + 1, j + 1, v);
            }
        }
        s
    }
}

/// Reverse Cuthill-McKee ordering of the sparsity graph. Returns `perm` with
/// `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    reverse_cuthill_mckee_from(a, &[])
}

/// Reverse Cuthill-McKee ordering whose breadth-first search starts from all
/// of `seeds` at once, so the seeds come last. With no seeds each component
/// starts at a pseudo-peripheral vertex.
pub fn reverse_cuthill_mckee_from(a: &CsrMatrix, seeds: &[usize]) -> Vec<usize> {
    let n = a.dim();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).filter(|&(j, _)| j != i).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let bfs = |start: &[usize], visited: &mut Vec<bool>, out: &mut Vec<usize>| {
        let mut queue = VecDeque::new();
        for &s in start {
            if !visited[s] {
                visited[s] = true;
                queue.push_back(s);
            }
        }
        while let Some(v) = queue.pop_front() {
            out.push(v);
            let mut nb: Vec<usize> = a.row(v).map(|(j, _)| j).filter(|&j| !visited[j]).collect();
            nb.sort_by_key(|&j| (degree[j], j));
            for j in nb {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    };
    let mut sorted_seeds = seeds.to_vec();
    sorted_seeds.sort_by_key(|&i| (degree[i], i));
    bfs(&sorted_seeds, &mut visited, &mut order);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        // move to a pseudo-peripheral vertex: the last vertex of a BFS
        let mut scratch = visited.clone();
        let mut probe = Vec::new();
        bfs(&[seed], &mut scratch, &mut probe);
        let start = *probe.last().unwrap();
        bfs(&[start], &mut visited, &mut order);
    }
    order.reverse();
    order
}

/// Envelope Cholesky factor `P A P^T = L L^T` with `P` from
/// [`reverse_cuthill_mckee`]. Row `i` of `L` is stored densely from its first
/// structural nonzero to the diagonal.
#[derive(Clone, Debug)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    values: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        Self::factor_with_ordering(a, reverse_cuthill_mckee(a))
    }

    /// Factors `P A P^T` for a caller-supplied ordering `perm[new] = old`.
    pub fn factor_with_ordering(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.dim();
        if perm.len() != n {
            return Err(Error::param("ordering length differs from matrix dimension"));
        }
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let first: Vec<usize> = (0..n)
            .map(|i| a.row(perm[i]).map(|(j, _)| inv[j]).min().unwrap_or(i).min(i))
            .collect();
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            offset.push(offset[i] + i - first[i] + 1);
        }
        let mut values = vec![0.0; offset[n]];
        for i in 0..n {
            let base = offset[i] - first[i];
            for (j, v) in a.row(perm[i]) {
                let jj = inv[j];
                if jj <= i {
                    values[base + jj] += v;
                }
            }
        }
        for i in 0..n {
            let (fi, oi) = (first[i], offset[i]);
            let (done, rest) = values.split_at_mut(oi);
            let row = &mut rest[..i - fi + 1];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let lj = &done[offset[j]..offset[j + 1]];
                let dot: f64 = row[k0 - fi..j - fi].iter().zip(&lj[k0 - fj..j - fj]).map(|(x, y)| x * y).sum();
                row[j - fi] = (row[j - fi] - dot) / lj[j - fj];
            }
            let diag = row[i - fi];
            let d = diag - row[..i - fi].iter().map(|x| x * x).sum::<f64>();
            if !(d > 1e-14 * diag.abs()) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { row: perm[i], pivot: d });
            }
            row[i - fi] = d.sqrt();
        }
        Ok(Self { perm, first, offset, values })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Stored entries of `L`, a measure of fill.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut z: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.offset[i]..self.offset[i + 1]];
            let dot: f64 = row[..i - fi].iter().zip(&z[fi..i]).map(|(x, y)| x * y).sum();
            z[i] = (z[i] - dot) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.values[self.offset[i]..self.offset[i + 1]];
            z[i] /= row[i - fi];
            let xi = z[i];
            for (k, l) in (fi..i).zip(row) {
                z[k] -= l * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = z[i];
        }
        x
    }

    /// Forward substitution `z = L^{-1} P b`. Returns the index of the first
    /// nonzero of `P b` and `z` from that index on; earlier entries of `z`
    /// are zero.
    pub fn forward_tail(&self, b: &[f64]) -> (usize, Vec<f64>) {
        let n = self.dim();
        let start = (0..n).find(|&i| b[self.perm[i]] != 0.0).unwrap_or(n);
        let mut z: Vec<f64> = self.perm[start..].iter().map(|&p| b[p]).collect();
        for i in start..n {
            let fi = self.first[i].max(start);
            let row = &self.values[self.offset[i]..self.offset[i + 1]];
            let skip = fi - self.first[i];
            let dot: f64 = row[skip..i - self.first[i]].iter().zip(&z[fi - start..i - start]).map(|(x, y)| x * y).sum();
            z[i - start] = (z[i - start] - dot) / row[i - self.first[i]];
        }
        (start, z)
    }

    /// Solves for many right-hand sides in parallel.
    pub fn solve_many(&self, rhs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rhs.par_iter().map(|b| self.solve(b)).collect()
    }
}
