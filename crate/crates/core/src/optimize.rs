//! Maximization of the normalized eigenvalue `sigma_bar_k` over boundary
//! densities on a fixed mesh. The interior conformal factor never enters: the
//! Dirichlet energy is conformally invariant, so only the boundary weight
//! `w = rho^{1/2}` is a variable.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{BoundaryDensity, MassKind};
use crate::mesh::{refine_nested, BoundaryPartition, SurfaceMesh};
use crate::spectrum::{cluster_ids, SolverOptions, SpectralProblem, Spectrum};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerOptions {
    pub max_iters: usize,
    /// First trial step of every line search, as the max-norm of the change
    /// in log-weights.
    pub initial_step: f64,
    /// Line searches give up below this step.
    pub min_step: f64,
    /// Stop when the relative gain over `stall_window` iterations is below this.
    pub stall_tolerance: f64,
    pub stall_window: usize,
    /// Relative gap below which eigenvalues are treated as one cluster and
    /// the cluster mean is ascended instead.
    pub multiplicity_tol: f64,
    /// Rescale to unit weighted length after every step. Only a gauge.
    pub normalize_length: bool,
    /// Cap on `max(w) / min(w)`; reaching it marks the run unconverged.
    pub max_weight_ratio: f64,
    /// Largest change of log-weight across one Steklov edge. Densities that
    /// concentrate below the mesh scale are not resolved by the elements and
    /// their discrete eigenvalues overshoot.
    pub max_log_jump: f64,
    pub seed: u64,
    /// Seeded random smooth starts, tried after the uniform and bubble starts.
    pub random_starts: usize,
    /// Try starts concentrated near `k` and `k + 1` boundary points.
    pub bubble_starts: bool,
    /// Audit `sigma_bar_k` against the topological upper bound at every
    /// iterate (pure Steklov problems only).
    pub audit_bounds: bool,
    /// Nested refinements used to re-examine an iterate whose raw value
    /// exceeds the bound.
    pub audit_levels: usize,
    pub solver: SolverOptions,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_iters: 300,
            initial_step: 0.1,
            min_step: 1e-5,
            stall_tolerance: 1e-7,
            stall_window: 25,
            multiplicity_tol: 1e-3,
            normalize_length: true,
            max_weight_ratio: 1e4,
            max_log_jump: 0.3,
            seed: 0,
            random_starts: 2,
            bubble_starts: true,
            audit_bounds: true,
            audit_levels: 2,
            solver: SolverOptions::default(),
        }
    }
}

impl OptimizerOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::param("max_iters must be at least 1"));
        }
        if !(self.initial_step > 0.0 && self.min_step > 0.0 && self.min_step <= self.initial_step) {
            return Err(Error::param("need 0 < min_step <= initial_step"));
        }
        if !(self.max_weight_ratio > 1.0) {
            return Err(Error::param("max_weight_ratio must exceed 1"));
        }
        if !(self.max_log_jump > 0.0) {
            return Err(Error::param("max_log_jump must be positive"));
        }
        if self.stall_window == 0 {
            return Err(Error::param("stall_window must be at least 1"));
        }
        Ok(())
    }
}

/// One accepted iterate. `sigma_bar` is the best value so far.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub sigma_bar: f64,
    pub step: f64,
    pub cluster_size: usize,
    pub weight_ratio: f64,
}

/// Lower-bound estimate of the conformal supremum of `sigma_bar_k`.
#[derive(Clone, Debug)]
pub struct ConformalSupremumEstimate {
    pub k: usize,
    /// `sigma_bar_k` recomputed at `density`.
    pub value: f64,
    pub density: BoundaryDensity,
    pub trace: Vec<TraceRecord>,
    pub converged: bool,
    /// `sigma_bar_k` at the uniform density of unit length.
    pub uniform_value: f64,
    /// Label of the start that produced the best run.
    pub start: String,
}

impl ConformalSupremumEstimate {
    /// CSV with columns `iter,sigma_bar,step,cluster_size,weight_ratio`.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iter,sigma_bar,step,cluster_size,weight_ratio\n");
        for r in &self.trace {
            let _ = writeln!(s, "{},{},{},{},{}", r.iter, r.sigma_bar, r.step, r.cluster_size, r.weight_ratio);
        }
        s
    }
}

/// `d sigma_bar_j / d w` for every computed mode `j` in `modes`, summed.
fn summed_gradient(problem: &SpectralProblem, spectrum: &Spectrum, modes: &[usize]) -> Vec<f64> {
    let n = problem.dim();
    let length = spectrum.boundary_length;
    let lumped = problem.options().mass == MassKind::Lumped;
    let mut dl = vec![0.0; n];
    for &(a, b, len) in problem.edges() {
        dl[a] += 0.5 * len;
        dl[b] += 0.5 * len;
    }
    let mut grad = vec![0.0; n];
    for &j in modes {
        let sigma = spectrum.eigenvalues[j];
        let v = spectrum.eigenvectors.column(j);
        // v^T (dM/dw_i) v, edge by edge
        let mut dm = vec![0.0; n];
        for &(a, b, len) in problem.edges() {
            let (va, vb) = (v[a], v[b]);
            let c = len / 12.0;
            if lumped {
                dm[a] += c * (4.0 * va * va + 2.0 * vb * vb);
                dm[b] += c * (2.0 * va * va + 4.0 * vb * vb);
            } else {
                dm[a] += c * (3.0 * va * va + 2.0 * va * vb + vb * vb);
                dm[b] += c * (va * va + 2.0 * va * vb + 3.0 * vb * vb);
            }
        }
        for i in 0..n {
            grad[i] += -sigma * dm[i] * length + sigma * dl[i];
        }
    }
    grad
}

/// Indices in the cluster of `k` under relative tolerance `tol`.
fn cluster_members(spectrum: &Spectrum, k: usize, tol: f64) -> Vec<usize> {
    let ids = cluster_ids(&spectrum.eigenvalues, tol);
    (0..ids.len()).filter(|&i| ids[i] == ids[k]).collect()
}

/// Gradient of `sigma_bar_k` with respect to the per-vertex weights, in the
/// local order of the Steklov vertices. Exact for the discrete pencil while
/// `sigma_k` is simple.
pub fn eigenvalue_gradient(
    mesh: &SurfaceMesh,
    partition: &BoundaryPartition,
    density: &BoundaryDensity,
    k: usize,
    options: &SolverOptions,
) -> Result<Vec<f64>> {
    let problem = SpectralProblem::new(mesh.clone(), partition.clone(), *options)?;
    problem_gradient(&problem, density, k)
}

/// [`eigenvalue_gradient`] on a prepared problem.
pub fn problem_gradient(problem: &SpectralProblem, density: &BoundaryDensity, k: usize) -> Result<Vec<f64>> {
    let spectrum = problem.solve(density, k)?;
    let cluster = spectrum.cluster_of(k);
    if cluster.len() > 1 {
        return Err(Error::ClusteredEigenvalue { k, size: cluster.len() });
    }
    Ok(summed_gradient(problem, &spectrum, &[k]))
}

/// Arclength position of every Steklov vertex along its boundary loop.
#[derive(Clone, Debug)]
pub struct BoundaryCoordinates {
    /// Per local Steklov vertex: (loop index, arclength from the loop start).
    pub position: Vec<(usize, f64)>,
    pub loop_lengths: Vec<f64>,
}

impl BoundaryCoordinates {
    pub fn new(problem: &SpectralProblem) -> Self {
        let conn = problem.mesh().connectivity();
        let ids = problem.steklov_vertices();
        let loops = conn.loops.len();
        let mut loop_lengths = vec![0.0; loops];
        let mut position = vec![(usize::MAX, 0.0); ids.len()];
        for e in &conn.boundary_edges {
            if let Ok(i) = ids.binary_search(&e.a) {
                if position[i].0 == usize::MAX {
                    position[i] = (e.loop_index, loop_lengths[e.loop_index]);
                }
            }
            loop_lengths[e.loop_index] += e.length;
        }
        // Steklov vertices met only as the end of an edge
        for e in &conn.boundary_edges {
            if let Ok(i) = ids.binary_search(&e.b) {
                if position[i].0 == usize::MAX {
                    position[i] = (e.loop_index, 0.0);
                }
            }
        }
        Self { position, loop_lengths }
    }

    /// Periodic arclength distance, infinite across loops.
    pub fn distance(&self, i: usize, loop_index: usize, s: f64) -> f64 {
        let (l, si) = self.position[i];
        if l != loop_index {
            return f64::INFINITY;
        }
        let d = (si - s).abs();
        d.min(self.loop_lengths[l] - d)
    }

    /// Walks `offset` along the concatenated loops, starting at local
    /// vertex `anchor`, and returns (loop, arclength).
    fn walk(&self, anchor: usize, offset: f64) -> (usize, f64) {
        let total: f64 = self.loop_lengths.iter().sum();
        let (l0, s0) = self.position[anchor];
        let before: f64 = self.loop_lengths[..l0].iter().sum();
        let mut s = (before + s0 + offset).rem_euclid(total);
        for (l, &len) in self.loop_lengths.iter().enumerate() {
            if s < len {
                return (l, s);
            }
            s -= len;
        }
        (l0, s0)
    }

    /// Local vertex with the shortest adjacent Steklov edge, where the mesh
    /// resolves concentration best.
    pub fn finest_vertex(problem: &SpectralProblem) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for &(a, b, len) in problem.edges() {
            for v in [a, b] {
                if len < best.1 || (len == best.1 && v < best.0) {
                    best = (v, len);
                }
            }
        }
        best
    }
}

/// Sum of `count` Poisson-kernel bumps of arclength width `width`, the first
/// centered at local vertex `anchor` and the rest evenly spaced along the
/// boundary. Each loop is rescaled to length 2 pi and the bump is
/// `(1 - r^2) / ((1 - r)^2 + r c^2)` in the chordal distance `c`, with
/// `1 - r` the rescaled width.
pub fn bubble_weights(coords: &BoundaryCoordinates, anchor: usize, count: usize, width: f64) -> Vec<f64> {
    let total: f64 = coords.loop_lengths.iter().sum();
    let centers: Vec<(usize, f64)> =
        (0..count).map(|c| coords.walk(anchor, total * c as f64 / count as f64)).collect();
    (0..coords.position.len())
        .map(|i| {
            let floor = 1e-3;
            floor
                + centers
                    .iter()
                    .map(|&(l, s)| {
                        let scale = 2.0 * std::f64::consts::PI / coords.loop_lengths[l];
                        let r = (1.0 - width * scale).clamp(0.05, 1.0 - 1e-9);
                        let d = coords.distance(i, l, s) * scale;
                        if !d.is_finite() {
                            return 0.0;
                        }
                        let chord = 2.0 * (d / 2.0).sin();
                        (1.0 - r * r) / ((1.0 - r) * (1.0 - r) + r * chord * chord)
                    })
                    .sum::<f64>()
        })
        .collect()
}

/// Smooth random log-weights: a trigonometric series in arclength on every
/// loop with coefficients uniform in `[-1, 1]`, decaying like `1 / m`, scaled
/// so that the largest coefficient magnitude sum is `amplitude`.
pub fn smooth_random_log_weights(coords: &BoundaryCoordinates, rng: &mut impl Rng, amplitude: f64, modes: usize) -> Vec<f64> {
    let coeffs: Vec<Vec<(f64, f64)>> = coords
        .loop_lengths
        .iter()
        .map(|_| (1..=modes).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
        .collect();
    let norm: f64 = (1..=modes).map(|m| std::f64::consts::SQRT_2 / m as f64).sum();
    coords
        .position
        .iter()
        .map(|&(l, s)| {
            let phase = 2.0 * std::f64::consts::PI * s / coords.loop_lengths[l];
            let v: f64 = coeffs[l]
                .iter()
                .enumerate()
                .map(|(m, &(a, b))| {
                    let m = (m + 1) as f64;
                    (a * (m * phase).cos() + b * (m * phase).sin()) / m
                })
                .sum();
            amplitude * v / norm
        })
        .collect()
}

/// Raises `x` to its smallest majorant that changes by at most `jump`
/// across every edge.
pub fn lipschitz_envelope(x: &mut [f64], edges: &[(usize, usize, f64)], jump: f64) {
    if !jump.is_finite() {
        return;
    }
    loop {
        let mut changed = false;
        for &(a, b, _) in edges {
            if x[a] < x[b] - jump {
                x[a] = x[b] - jump;
                changed = true;
            } else if x[b] < x[a] - jump {
                x[b] = x[a] - jump;
                changed = true;
            }
        }
        if !changed {
            return;
        }
    }
}

struct Iterate {
    log_w: Vec<f64>,
    density: BoundaryDensity,
    spectrum: Spectrum,
    value: f64,
}

struct Ascent<'a> {
    problem: &'a SpectralProblem,
    k: usize,
    opts: &'a OptimizerOptions,
    bound: Option<(f64, f64)>,
    nested: NestedHierarchy<'a>,
}

impl Ascent<'_> {
    fn evaluate(&self, mut log_w: Vec<f64>) -> Result<Iterate> {
        lipschitz_envelope(&mut log_w, self.problem.edges(), self.opts.max_log_jump);
        let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let floor = max - self.opts.max_weight_ratio.ln();
        for x in log_w.iter_mut() {
            *x = x.max(floor) - max;
        }
        let mut density = self.problem.density(log_w.iter().map(|x| x.exp()).collect())?;
        if self.opts.normalize_length {
            let shift = self.problem.length(&density)?.ln();
            for x in log_w.iter_mut() {
                *x -= shift;
            }
            density = self.problem.density(log_w.iter().map(|x| x.exp()).collect())?;
        }
        let spectrum = self.problem.solve(&density, self.k)?;
        let value = spectrum.sigma_bar(self.k);
        Ok(Iterate { log_w, density, spectrum, value })
    }

    /// Hard bound check of an accepted iterate. A raw value above the bound
    /// is re-examined on nested refinements before it counts as a violation,
    /// since unresolved concentration makes the elements overshoot.
    fn audit(&self, it: &Iterate) -> Result<()> {
        let Some((bound, slack)) = self.bound else {
            return Ok(());
        };
        let limit = bound * (1.0 + slack);
        if it.value <= limit {
            return Ok(());
        }
        let values = self.nested.sigma_bars(&it.density, self.k, self.opts.audit_levels, limit)?;
        let last = values[values.len() - 1];
        if last <= limit {
            return Ok(());
        }
        let corrected = extrapolate_nested(&values);
        if values.len() > 1 && corrected <= limit {
            return Ok(());
        }
        Err(Error::BoundViolation { k: self.k, value: corrected, bound })
    }

    fn capped(&self, it: &Iterate) -> bool {
        it.density.weight_ratio() >= self.opts.max_weight_ratio * (1.0 - 1e-9)
    }

    /// Gradient of the cluster-mean surrogate in log-weights.
    fn direction(&self, it: &Iterate) -> (Vec<f64>, usize) {
        let members = cluster_members(&it.spectrum, self.k, self.opts.multiplicity_tol);
        let g = summed_gradient(self.problem, &it.spectrum, &members);
        let w = it.density.weights();
        let d = g.iter().zip(w).map(|(g, w)| g * w / members.len() as f64).collect();
        (d, members.len())
    }

    fn run(&self, start: Vec<f64>) -> Result<(Iterate, Vec<TraceRecord>, bool)> {
        let opts = self.opts;
        let mut cur = self.evaluate(start)?;
        self.audit(&cur)?;
        let mut capped = self.capped(&cur);
        let mut trace = vec![TraceRecord {
            iter: 0,
            sigma_bar: cur.value,
            step: 0.0,
            cluster_size: cluster_members(&cur.spectrum, self.k, opts.multiplicity_tol).len(),
            weight_ratio: cur.density.weight_ratio(),
        }];
        let mut converged = false;
        for iter in 1..=opts.max_iters {
            let (g, cluster_size) = self.direction(&cur);
            let gmax = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if gmax == 0.0 || !gmax.is_finite() {
                converged = true;
                break;
            }
            let mut step = opts.initial_step;
            let mut accepted = None;
            while step >= opts.min_step {
                let trial: Vec<f64> = cur.log_w.iter().zip(&g).map(|(x, d)| x + step * d / gmax).collect();
                let next = self.evaluate(trial)?;
                if next.value > cur.value {
                    accepted = Some(next);
                    break;
                }
                step *= 0.5;
            }
            let Some(next) = accepted else {
                converged = true;
                break;
            };
            self.audit(&next)?;
            cur = next;
            capped |= self.capped(&cur);
            trace.push(TraceRecord {
                iter,
                sigma_bar: cur.value,
                step,
                cluster_size,
                weight_ratio: cur.density.weight_ratio(),
            });
            if iter >= opts.stall_window {
                let old = trace[iter - opts.stall_window].sigma_bar;
                if (cur.value - old) <= opts.stall_tolerance * old.abs() {
                    converged = true;
                    break;
                }
            }
        }
        Ok((cur, trace, converged && !capped))
    }
}

fn starts(problem: &SpectralProblem, k: usize, opts: &OptimizerOptions) -> Vec<(String, Vec<f64>)> {
    let n = problem.dim();
    let mut out = vec![("uniform".to_string(), vec![0.0; n])];
    let coords = BoundaryCoordinates::new(problem);
    if opts.bubble_starts {
        let (anchor, finest) = BoundaryCoordinates::finest_vertex(problem);
        let total: f64 = coords.loop_lengths.iter().sum();
        for count in [k, k + 1] {
            for (label, width) in [("wide", total / 12.0), ("narrow", 4.0 * finest)] {
                let w = bubble_weights(&coords, anchor, count, width);
                out.push((format!("bubbles-{count}-{label}"), w.iter().map(|w| w.ln()).collect()));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for i in 0..opts.random_starts {
        out.push((format!("random-{i}"), smooth_random_log_weights(&coords, &mut rng, 1.0, 6)));
    }
    out
}

/// Nested 1-to-4 refinement of `mesh` with the partition carried along.
/// The third component maps every fine Steklov vertex to the two coarse
/// local indices whose mean gives its weight (equal for kept vertices).
pub fn refine_partition(
    mesh: &SurfaceMesh,
    partition: &BoundaryPartition,
) -> Result<(SurfaceMesh, BoundaryPartition, Vec<(usize, usize)>)> {
    let fine = refine_nested(mesh)?;
    let n_old = mesh.connectivity().vertex_count();
    let steklov: BTreeSet<(usize, usize)> = partition.steklov_edges(mesh).into_iter().collect();
    let boundary = &fine.connectivity().boundary_edges;
    // each new boundary vertex sits between two old ones
    let mut parents: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for e in boundary {
        let (old, new) = if e.a < n_old { (e.a, e.b) } else { (e.b, e.a) };
        if old >= n_old || new < n_old {
            return Err(Error::mesh("refined boundary edge does not split a coarse edge"));
        }
        parents.entry(new).or_default().push(old);
    }
    let parent_key = |m: usize| -> Result<(usize, usize)> {
        match parents[&m][..] {
            [a, b] => Ok((a.min(b), a.max(b))),
            _ => Err(Error::mesh("refined boundary vertex without two coarse neighbours")),
        }
    };
    let mut flags = Vec::with_capacity(boundary.len());
    for e in boundary {
        let new = if e.a < n_old { e.b } else { e.a };
        flags.push(steklov.contains(&parent_key(new)?));
    }
    let fine_partition = BoundaryPartition::from_flags(&fine, flags)?;
    let coarse_ids = partition.steklov_vertices(mesh);
    let local = |v: usize| coarse_ids.binary_search(&v).expect("Steklov vertex");
    let mut transfer = Vec::new();
    for v in fine_partition.steklov_vertices(&fine) {
        transfer.push(if v < n_old {
            (local(v), local(v))
        } else {
            let (a, b) = parent_key(v)?;
            (local(a), local(b))
        });
    }
    Ok((fine, fine_partition, transfer))
}

/// Nested refinement carrying the partition and the density along. The
/// piecewise-linear density is reproduced exactly, so `sigma_k` can only
/// decrease.
pub fn refine_with_density(
    mesh: &SurfaceMesh,
    partition: &BoundaryPartition,
    density: &BoundaryDensity,
) -> Result<(SurfaceMesh, BoundaryPartition, BoundaryDensity)> {
    let (fine, fine_partition, transfer) = refine_partition(mesh, partition)?;
    let w = density.weights();
    let weights = transfer.iter().map(|&(a, b)| 0.5 * (w[a] + w[b])).collect();
    let fine_density = BoundaryDensity::new(fine_partition.steklov_vertices(&fine), weights)?;
    Ok((fine, fine_partition, fine_density))
}

/// `h^2` extrapolation of the last two values of a nested sequence.
pub fn extrapolate_nested(values: &[f64]) -> f64 {
    match values {
        [] => f64::NAN,
        [v] => *v,
        [.., a, b] => (4.0 * b - a) / 3.0,
    }
}

/// Nested refinements of a problem, built on demand, for estimating the
/// discretization error of `sigma_bar_k` at a given density.
///
/// Galerkin monotonicity makes every refined value, and the extrapolation,
/// no larger than the coarse one.
pub struct NestedHierarchy<'a> {
    base: &'a SpectralProblem,
    levels: RefCell<Vec<(SpectralProblem, Vec<(usize, usize)>)>>,
}

impl<'a> NestedHierarchy<'a> {
    pub fn new(base: &'a SpectralProblem) -> Self {
        Self { base, levels: RefCell::new(Vec::new()) }
    }

    fn ensure(&self, count: usize) -> Result<()> {
        let mut levels = self.levels.borrow_mut();
        while levels.len() < count {
            let coarse = levels.last().map_or(self.base, |l| &l.0);
            let (mesh, partition, transfer) = refine_partition(coarse.mesh(), coarse.partition())?;
            let problem = SpectralProblem::new(mesh, partition, *self.base.options())?;
            levels.push((problem, transfer));
        }
        Ok(())
    }

    /// `sigma_bar_k` on the base mesh and up to `levels` refinements, stopping
    /// early once a value is at most `stop_below`.
    pub fn sigma_bars(&self, density: &BoundaryDensity, k: usize, levels: usize, stop_below: f64) -> Result<Vec<f64>> {
        let mut values = vec![self.base.solve(density, k)?.sigma_bar(k)];
        let mut w = density.weights().to_vec();
        for level in 0..levels {
            if values[values.len() - 1] <= stop_below {
                break;
            }
            self.ensure(level + 1)?;
            let levels = self.levels.borrow();
            let (problem, transfer) = &levels[level];
            w = transfer.iter().map(|&(a, b)| 0.5 * (w[a] + w[b])).collect();
            values.push(problem.solve(&problem.density(w.clone())?, k)?.sigma_bar(k));
        }
        Ok(values)
    }
}

/// `sigma_bar_k` at `density` on the mesh and on `levels` nested
/// refinements of it, with the extrapolation of the last two.
pub fn refined_sigma_bar(
    mesh: &SurfaceMesh,
    partition: &BoundaryPartition,
    density: &BoundaryDensity,
    k: usize,
    levels: usize,
    options: &SolverOptions,
) -> Result<(Vec<f64>, f64)> {
    let problem = SpectralProblem::new(mesh.clone(), partition.clone(), *options)?;
    let values = NestedHierarchy::new(&problem).sigma_bars(density, k, levels, f64::NEG_INFINITY)?;
    let extrapolated = extrapolate_nested(&values);
    Ok((values, extrapolated))
}

/// Multi-start ascent on a prepared problem.
pub fn maximize_on_problem(problem: &SpectralProblem, k: usize, opts: &OptimizerOptions) -> Result<ConformalSupremumEstimate> {
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    opts.validate()?;
    if k >= problem.dim() {
        return Err(Error::ModesExceedSpace { requested: k + 1, available: problem.dim() });
    }
    let bound = (opts.audit_bounds && problem.partition().is_pure_steklov())
        .then(|| (problem.mesh().topology().sigma_bar_bound(k), 1e-6));
    let ascent = Ascent { problem, k, opts, bound, nested: NestedHierarchy::new(problem) };
    let mut uniform_value = f64::NAN;
    let mut best: Option<(String, Iterate, Vec<TraceRecord>, bool)> = None;
    for (label, start) in starts(problem, k, opts) {
        let (it, trace, converged) = ascent.run(start)?;
        if label == "uniform" {
            uniform_value = trace[0].sigma_bar;
        }
        if best.as_ref().is_none_or(|b| it.value > b.1.value) {
            best = Some((label, it, trace, converged));
        }
    }
    let (start, it, trace, converged) = best.expect("at least the uniform start");
    let value = problem.solve(&it.density, k)?.sigma_bar(k);
    Ok(ConformalSupremumEstimate { k, value, density: it.density, trace, converged, uniform_value, start })
}

/// Estimate of the conformal supremum of `sigma_bar_k` for the Steklov
/// problem on the whole boundary.
pub fn maximize_normalized_eigenvalue(
    mesh: &SurfaceMesh,
    partition: &BoundaryPartition,
    k: usize,
    opts: &OptimizerOptions,
) -> Result<ConformalSupremumEstimate> {
    if !partition.is_pure_steklov() {
        return Err(Error::param("partition has Neumann edges; use estimate_mixed_supremum"));
    }
    let problem = SpectralProblem::new(mesh.clone(), partition.clone(), opts.solver)?;
    maximize_on_problem(&problem, k, opts)
}

/// Same for the mixed Steklov-Neumann problem; the density lives on the
/// Steklov part only.
pub fn estimate_mixed_supremum(
    mesh: &SurfaceMesh,
    partition: &BoundaryPartition,
    k: usize,
    opts: &OptimizerOptions,
) -> Result<ConformalSupremumEstimate> {
    let problem = SpectralProblem::new(mesh.clone(), partition.clone(), opts.solver)?;
    maximize_on_problem(&problem, k, opts)
}

/// Dense mass derivative check helper: `v^T M(w) v` for a weight vector.
#[cfg(test)]
fn quadratic_mass(problem: &SpectralProblem, w: &[f64], v: &[f64]) -> f64 {
    let m = problem.mass_matrix(&problem.density(w.to_vec()).unwrap()).unwrap();
    let v = nalgebra::DVector::from_column_slice(v);
    v.dot(&(&m * &v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_disc_mesh, build_flat_cylinder_mesh};
    use std::f64::consts::PI;

    fn disc_problem(r: u32) -> SpectralProblem {
        SpectralProblem::steklov(build_disc_mesh(r).unwrap(), SolverOptions::default()).unwrap()
    }

    fn random_density(problem: &SpectralProblem, seed: u64, amplitude: f64) -> BoundaryDensity {
        let coords = BoundaryCoordinates::new(problem);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = smooth_random_log_weights(&coords, &mut rng, amplitude, 5);
        problem.density(x.iter().map(|x| x.exp()).collect()).unwrap()
    }

    #[test]
    fn mass_derivative_is_linear() {
        // M is linear in w, so v^T M v is too: check the per-edge formula
        let p = disc_problem(2);
        let n = p.dim();
        let w: Vec<f64> = (0..n).map(|i| 1.0 + 0.3 * (i as f64).sin()).collect();
        let v: Vec<f64> = (0..n).map(|i| (0.7 * i as f64).cos()).collect();
        let mut e = vec![0.0; n];
        e[3] = 1.0;
        let mut dm = 0.0;
        for &(a, b, len) in p.edges() {
            if a == 3 {
                dm += len / 12.0 * (3.0 * v[a] * v[a] + 2.0 * v[a] * v[b] + v[b] * v[b]);
            }
            if b == 3 {
                dm += len / 12.0 * (v[a] * v[a] + 2.0 * v[a] * v[b] + 3.0 * v[b] * v[b]);
            }
        }
        let w2: Vec<f64> = w.iter().zip(&e).map(|(w, e)| w + e).collect();
        let fd = quadratic_mass(&p, &w2, &v) - quadratic_mass(&p, &w, &v);
        assert!((fd - dm).abs() < 1e-12 * dm.abs().max(1.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for mass in [MassKind::Consistent, MassKind::Lumped] {
            let opts = SolverOptions { mass, ..SolverOptions::default() };
            let p = SpectralProblem::steklov(build_disc_mesh(2).unwrap(), opts).unwrap();
            let d = random_density(&p, 7, 0.8);
            for k in [1, 2, 3] {
                let g = problem_gradient(&p, &d, k).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
                let dir: Vec<f64> = (0..p.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let h = 1e-6;
                let at = |s: f64| {
                    let w = d.weights().iter().zip(&dir).map(|(w, e)| w + s * e).collect();
                    p.solve(&p.density(w).unwrap(), k).unwrap().sigma_bar(k)
                };
                let fd = (at(h) - at(-h)) / (2.0 * h);
                let an: f64 = g.iter().zip(&dir).map(|(g, e)| g * e).sum();
                assert!((fd - an).abs() < 1e-5 * an.abs(), "{mass:?} k={k}: fd {fd} analytic {an}");
            }
        }
    }

    #[test]
    fn scaling_direction_has_zero_derivative() {
        let p = disc_problem(2);
        let d = random_density(&p, 3, 0.5);
        let g = problem_gradient(&p, &d, 2).unwrap();
        let along: f64 = g.iter().zip(d.weights()).map(|(g, w)| g * w).sum();
        let scale: f64 = g.iter().map(|g| g.abs()).sum::<f64>();
        assert!(along.abs() < 1e-10 * scale, "{along}");
    }

    #[test]
    fn clustered_disc_mode_is_refused() {
        let p = disc_problem(2);
        let err = problem_gradient(&p, &p.uniform_density(), 1).unwrap_err();
        assert!(matches!(err, Error::ClusteredEigenvalue { k: 1, size: 2 }));
        assert!(err.to_string().contains("subgradient"));
    }

    #[test]
    fn disc_first_mode_stays_at_uniform() {
        let mesh = build_disc_mesh(3).unwrap();
        let part = BoundaryPartition::all_steklov(&mesh);
        let opts = OptimizerOptions { random_starts: 0, bubble_starts: false, max_iters: 60, ..OptimizerOptions::default() };
        let est = maximize_normalized_eigenvalue(&mesh, &part, 1, &opts).unwrap();
        assert_eq!(est.start, "uniform");
        assert!(est.value >= est.uniform_value);
        assert!((est.value - est.uniform_value).abs() < 1e-3 * est.uniform_value, "{} vs {}", est.value, est.uniform_value);
        assert!(est.value <= 2.0 * PI * (1.0 + 1e-6));
        assert!(est.trace.windows(2).all(|w| w[1].sigma_bar >= w[0].sigma_bar));
        assert!(est.trace_csv().starts_with("iter,sigma_bar,step,cluster_size,weight_ratio\n"));
    }

    #[test]
    fn concentrated_disc_optimum_corrects_below_two_pi() {
        let mesh = build_disc_mesh(3).unwrap();
        let part = BoundaryPartition::all_steklov(&mesh);
        let opts = OptimizerOptions { random_starts: 1, max_iters: 60, ..OptimizerOptions::default() };
        let est = maximize_normalized_eigenvalue(&mesh, &part, 1, &opts).unwrap();
        assert!(est.value >= est.uniform_value);
        let (values, corrected) = refined_sigma_bar(&mesh, &part, &est.density, 1, 2, &opts.solver).unwrap();
        assert_eq!(values[0], est.value);
        assert!(values.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)), "{values:?}");
        assert!(corrected <= 2.0 * PI * (1.0 + 1e-3), "{corrected}");
    }

    #[test]
    fn nested_refinement_keeps_density_and_partition() {
        let mesh = crate::mesh::build_half_disc_mesh(2).unwrap();
        let unit = crate::mesh::BoundaryCurve::Circle { center: [0.0, 0.0], radius: 1.0 };
        let part = crate::mesh::partition_boundary(&mesh, crate::mesh::on_curve(&mesh, unit)).unwrap();
        let problem = SpectralProblem::new(mesh.clone(), part.clone(), SolverOptions::default()).unwrap();
        let density = random_density(&problem, 5, 1.5);
        let (fine, fine_part, fine_density) = refine_with_density(&mesh, &part, &density).unwrap();
        assert!((fine_part.steklov_length(&fine) - part.steklov_length(&mesh)).abs() < 1e-12);
        assert_eq!(fine_part.neumann_edges(&fine).len(), 2 * part.neumann_edges(&mesh).len());
        let fine_problem = SpectralProblem::new(fine, fine_part, SolverOptions::default()).unwrap();
        let l0 = problem.length(&density).unwrap();
        assert!((fine_problem.length(&fine_density).unwrap() - l0).abs() < 1e-12 * l0);
        let coarse = problem.solve(&density, 4).unwrap();
        let refined = fine_problem.solve(&fine_density, 4).unwrap();
        for k in 1..=4 {
            assert!(refined.sigma(k) <= coarse.sigma(k) * (1.0 + 1e-12));
        }
        assert_eq!(extrapolate_nested(&[3.0, 2.0]), 5.0 / 3.0);
    }

    #[test]
    fn cylinder_ascent_improves_and_is_deterministic() {
        let mesh = build_flat_cylinder_mesh(1.0, 2).unwrap();
        let part = BoundaryPartition::all_steklov(&mesh);
        let opts = OptimizerOptions { max_iters: 40, random_starts: 1, ..OptimizerOptions::default() };
        let a = maximize_normalized_eigenvalue(&mesh, &part, 1, &opts).unwrap();
        let b = maximize_normalized_eigenvalue(&mesh, &part, 1, &opts).unwrap();
        assert!(a.value > a.uniform_value * 1.01, "{} vs {}", a.value, a.uniform_value);
        assert_eq!(a.value, b.value);
        assert_eq!(a.density.weights(), b.density.weights());
        assert!(a.value <= 4.0 * PI * (1.0 + 1e-6));
    }

    #[test]
    fn options_are_validated() {
        let mesh = build_disc_mesh(2).unwrap();
        let part = BoundaryPartition::all_steklov(&mesh);
        let bad = OptimizerOptions { max_iters: 0, ..OptimizerOptions::default() };
        assert!(maximize_normalized_eigenvalue(&mesh, &part, 1, &bad).is_err());
        assert!(maximize_normalized_eigenvalue(&mesh, &part, 0, &OptimizerOptions::default()).is_err());
    }
}
