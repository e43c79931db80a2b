//! Symmetric-definite generalized eigensolvers for `D v = sigma M v` with
//! `M` positive definite.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Smallest `count` eigenpairs, ascending. Eigenvectors are `M`-orthonormal
/// columns.
pub type EigenPairs = (Vec<f64>, DMatrix<f64>);

fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    m.clone()
        .cholesky()
        .ok_or_else(|| Error::EigenSolver(format!("{what} is not positive definite")))
}

/// Dense reduction to a standard symmetric problem through the Cholesky
/// factor of `M`. Only the wanted pairs are extracted: Householder
/// tridiagonalization, Sturm bisection for the eigenvalues and inverse
/// iteration for the vectors.
pub fn dense_generalized(d: &DMatrix<f64>, m: &DMatrix<f64>, count: usize) -> Result<EigenPairs> {
    let n = d.nrows();
    let count = count.min(n);
    let chol = cholesky(m, "boundary mass")?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(d)
        .ok_or_else(|| Error::EigenSolver("singular mass factor".into()))?;
    let c = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::EigenSolver("singular mass factor".into()))?;
    let c = 0.5 * (&c + c.transpose());
    let (values, y) = if 2 * count > n || n < 3 {
        full_symmetric(c, count)
    } else {
        let (q, diag, off) = nalgebra::SymmetricTridiagonal::new(c).unpack();
        let diag: Vec<f64> = diag.iter().copied().collect();
        let off: Vec<f64> = off.iter().copied().collect();
        let values: Vec<f64> = (0..count).map(|j| tridiagonal_eigenvalue(&diag, &off, j)).collect();
        let z = tridiagonal_vectors(&diag, &off, &values);
        (values, q * z)
    };
    let v = l
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or_else(|| Error::EigenSolver("singular mass factor".into()))?;
    Ok((values, v))
}

fn full_symmetric(c: DMatrix<f64>, count: usize) -> (Vec<f64>, DMatrix<f64>) {
    let n = c.nrows();
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut values = Vec::with_capacity(count);
    let mut y = DMatrix::zeros(n, count);
    for (col, &i) in order.iter().take(count).enumerate() {
        values.push(eig.eigenvalues[i]);
        y.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, y)
}

fn tridiagonal_norm(diag: &[f64], off: &[f64]) -> f64 {
    (0..diag.len())
        .map(|i| {
            let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
            let right = if i < off.len() { off[i].abs() } else { 0.0 };
            diag[i].abs() + left + right
        })
        .fold(0.0, f64::max)
}

/// Number of eigenvalues of the tridiagonal matrix below `x`.
fn sturm_count(diag: &[f64], off: &[f64], x: f64, tiny: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    for i in 0..diag.len() {
        if i > 0 {
            q = diag[i] - x - off[i - 1] * off[i - 1] / q;
        }
        if q == 0.0 {
            q = -tiny;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// `j`-th smallest eigenvalue (from 0) by bisection.
fn tridiagonal_eigenvalue(diag: &[f64], off: &[f64], j: usize) -> f64 {
    let norm = tridiagonal_norm(diag, off);
    let tiny = f64::EPSILON * norm.max(f64::MIN_POSITIVE);
    let (mut lo, mut hi) = (-norm - tiny, norm + tiny);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid, tiny) > j {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) + tiny {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `(T - shift) x = b` by Gaussian elimination with partial pivoting.
fn tridiagonal_solve(diag: &[f64], off: &[f64], shift: f64, b: &mut [f64], tiny: f64) {
    let n = diag.len();
    // rows hold (u0, u1, u2): entries on the diagonal and two superdiagonals
    let mut u = vec![[0.0f64; 3]; n];
    let mut lower = vec![0.0f64; n];
    let mut swapped = vec![false; n];
    let mut cur = [diag[0] - shift, if n > 1 { off[0] } else { 0.0 }, 0.0];
    for i in 0..n - 1 {
        let next = [off[i], diag[i + 1] - shift, if i + 2 < n { off[i + 1] } else { 0.0 }];
        let (mut piv, mut other) = (cur, [next[0], next[1], next[2]]);
        if next[0].abs() > cur[0].abs() {
            std::mem::swap(&mut piv, &mut other);
            swapped[i] = true;
            b.swap(i, i + 1);
        }
        if piv[0] == 0.0 {
            piv[0] = tiny;
        }
        let f = other[0] / piv[0];
        lower[i] = f;
        u[i] = piv;
        b[i + 1] -= f * b[i];
        cur = [other[1] - f * piv[1], other[2] - f * piv[2], 0.0];
    }
    if cur[0] == 0.0 {
        cur[0] = tiny;
    }
    u[n - 1] = cur;
    for i in (0..n).rev() {
        let mut s = b[i];
        if i + 1 < n {
            s -= u[i][1] * b[i + 1];
        }
        if i + 2 < n {
            s -= u[i][2] * b[i + 2];
        }
        b[i] = s / u[i][0];
    }
}

/// Eigenvectors of the tridiagonal matrix for the given ascending
/// eigenvalues by inverse iteration; vectors of close eigenvalues are
/// orthogonalized against each other.
fn tridiagonal_vectors(diag: &[f64], off: &[f64], values: &[f64]) -> DMatrix<f64> {
    let n = diag.len();
    let norm = tridiagonal_norm(diag, off).max(f64::MIN_POSITIVE);
    let tiny = f64::EPSILON * norm;
    let mut z = DMatrix::zeros(n, values.len());
    let mut rng = ChaCha8Rng::seed_from_u64(0x7a11);
    let mut cluster_start = 0;
    for (j, &lambda) in values.iter().enumerate() {
        if j > 0 && (lambda - values[j - 1]) > 1e-3 * norm {
            cluster_start = j;
        }
        // distinct perturbations inside a cluster
        let shift = lambda + (j - cluster_start) as f64 * 10.0 * tiny;
        let mut x = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        for _ in 0..3 {
            tridiagonal_solve(diag, off, shift, x.as_mut_slice(), tiny);
            for _ in 0..2 {
                for p in cluster_start..j {
                    let c = z.column(p).dot(&x);
                    x.axpy(-c, &z.column(p), 1.0);
                }
            }
            let nrm = x.norm();
            x /= nrm;
        }
        z.set_column(j, &x);
    }
    z
}

/// `M`-orthonormalizes the columns of `w` against `basis` and among
/// themselves with two Gram-Schmidt passes. Columns that vanish are replaced
/// by fresh random directions.
fn m_orthonormalize(w: &mut DMatrix<f64>, basis: &[DMatrix<f64>], m: &DMatrix<f64>, rng: &mut ChaCha8Rng) {
    let n = w.nrows();
    let scale = m.diagonal().amax().sqrt();
    for j in 0..w.ncols() {
        let mut reference = w.column(j).norm().max(1e-300);
        for _attempt in 0..4 {
            // classical Gram-Schmidt, repeated once
            for _ in 0..2 {
                let mw = m * w.column(j);
                let mut upd = DVector::zeros(n);
                for q in basis {
                    upd += q * (q.transpose() * &mw);
                }
                for i in 0..j {
                    let qi = w.column(i);
                    upd.axpy(qi.dot(&mw), &qi, 1.0);
                }
                let mut col = w.column_mut(j);
                col -= upd;
            }
            let norm = w.column(j).dot(&(m * w.column(j))).max(0.0).sqrt();
            if norm > 1e-10 * reference * scale {
                let mut col = w.column_mut(j);
                col /= norm;
                break;
            }
            let fresh = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            reference = fresh.norm();
            w.set_column(j, &fresh);
        }
    }
}

/// Block shift-invert Lanczos on `(D + s M)^{-1} M` in the `M` inner product
/// with full reorthogonalization and a Rayleigh-Ritz step on the Krylov
/// basis. The block size covers eigenvalue multiplicities up to `block`.
pub fn block_lanczos(
    d: &DMatrix<f64>,
    m: &DMatrix<f64>,
    count: usize,
    shift: f64,
    block: usize,
) -> Result<EigenPairs> {
    let n = d.nrows();
    let count = count.min(n);
    if shift <= 0.0 {
        return Err(Error::param("shift must be positive so that D + s M is definite"));
    }
    let a = cholesky(&(d + m * shift), "shifted operator")?;
    let b = block.max(1).min(n);
    let max_steps = n.div_ceil(b);
    let mut steps = ((2 * count + 20).div_ceil(b)).max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    loop {
        let steps_now = steps.min(max_steps);
        let mut blocks: Vec<DMatrix<f64>> = Vec::new();
        let mut images: Vec<DMatrix<f64>> = Vec::new();
        let mut next = DMatrix::from_fn(n, b, |_, _| rng.gen_range(-1.0..1.0));
        m_orthonormalize(&mut next, &[], m, &mut rng);
        for _ in 0..steps_now {
            let z = a.solve(&(m * &next));
            let mut w = z.clone();
            blocks.push(next);
            images.push(z);
            m_orthonormalize(&mut w, &blocks, m, &mut rng);
            next = w;
        }
        let dim = blocks.len() * b;
        let mut q = DMatrix::zeros(n, dim);
        let mut z = DMatrix::zeros(n, dim);
        for (k, (blk, img)) in blocks.iter().zip(&images).enumerate() {
            q.view_mut((0, k * b), (n, b)).copy_from(blk);
            z.view_mut((0, k * b), (n, b)).copy_from(img);
        }
        let mq = m * &q;
        let t = mq.transpose() * &z;
        let t = 0.5 * (&t + t.transpose());
        let eig = t.symmetric_eigen();
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
        let mut converged = true;
        let mut pairs = Vec::with_capacity(count);
        for &i in order.iter().take(count) {
            let theta = eig.eigenvalues[i];
            let y = eig.eigenvectors.column(i);
            let u = &q * y;
            let r = &z * y - &u * theta;
            let residual = r.dot(&(m * &r)).max(0.0).sqrt();
            if residual > 1e-10 * theta.abs() {
                converged = false;
            }
            pairs.push((1.0 / theta - shift, u));
        }
        if converged || steps_now == max_steps {
            pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
            let values = pairs.iter().map(|p| p.0).collect();
            let mut vectors = DMatrix::zeros(n, count);
            for (c, p) in pairs.iter().enumerate() {
                vectors.set_column(c, &p.1);
            }
            return Ok((values, vectors));
        }
        steps *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_pencil(n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        // circulant second difference (double eigenvalues) and a tridiagonal mass
        let mut d = DMatrix::zeros(n, n);
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            let j = (i + 1) % n;
            d[(i, i)] += 2.0;
            d[(i, j)] -= 1.0;
            d[(j, i)] -= 1.0;
            m[(i, i)] += 4.0 / 6.0;
            m[(i, j)] += 1.0 / 6.0;
            m[(j, i)] += 1.0 / 6.0;
        }
        (d, m)
    }

    #[test]
    fn dense_matches_closed_form() {
        let n = 40;
        let (d, m) = test_pencil(n);
        let (vals, vecs) = dense_generalized(&d, &m, 7).unwrap();
        // discrete periodic modes: (2 - 2 cos t) / ((4 + 2 cos t) / 6)
        let mode = |j: usize| {
            let t = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            (2.0 - 2.0 * t.cos()) / ((4.0 + 2.0 * t.cos()) / 6.0)
        };
        let expect = [mode(0), mode(1), mode(1), mode(2), mode(2), mode(3), mode(3)];
        for (v, e) in vals.iter().zip(expect) {
            assert!((v - e).abs() < 1e-12);
        }
        let gram = vecs.transpose() * &m * &vecs;
        assert!((gram - DMatrix::identity(7, 7)).amax() < 1e-10);
    }

    #[test]
    fn partial_path_matches_full_decomposition() {
        let (d, m) = test_pencil(61);
        let (pv, pvec) = dense_generalized(&d, &m, 9).unwrap();
        let chol = m.clone().cholesky().unwrap();
        let l = chol.l();
        let c = l.solve_lower_triangular(&l.solve_lower_triangular(&d).unwrap().transpose()).unwrap();
        let (fv, _) = full_symmetric(0.5 * (&c + c.transpose()), 9);
        for (a, b) in pv.iter().zip(&fv) {
            assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
        let res = &d * &pvec - &m * &pvec * DMatrix::from_diagonal(&DVector::from_vec(pv));
        assert!(res.amax() < 1e-10);
        let gram = pvec.transpose() * &m * &pvec;
        assert!((gram - DMatrix::identity(9, 9)).amax() < 1e-10);
    }

    #[test]
    fn lanczos_agrees_with_dense_including_multiplicity() {
        let (d, m) = test_pencil(300);
        let (dv, _) = dense_generalized(&d, &m, 9).unwrap();
        let (lv, lvec) = block_lanczos(&d, &m, 9, 0.5, 3).unwrap();
        for (a, b) in dv.iter().zip(&lv) {
            assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()), "{a} vs {b}");
        }
        let gram = lvec.transpose() * &m * &lvec;
        assert!((gram - DMatrix::identity(9, 9)).amax() < 1e-8);
        let res = &d * &lvec - &m * &lvec * DMatrix::from_diagonal(&DVector::from_vec(lv.clone()));
        assert!(res.amax() < 1e-7);
    }
}
