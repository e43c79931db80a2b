//! Builders for the model geometries: discs, annuli, flat cylinders and
//! Möbius bands of a given modulus, collar charts, and the notched disc used
//! for ball-removal experiments.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{edge_key, BoundaryCurve, CollarChart, MeshParts, StripType, SurfaceMesh, SurfaceTopology};

/// Half-width of the standard collar around a closed geodesic of length `l`:
/// `(pi / l) (pi - 2 atan(sinh(l / 2)))`.
pub fn collar_width(l: f64) -> f64 {
    (PI / l) * (PI - 2.0 * (0.5 * l).sinh().atan())
}

fn check_refinement(refinement: u32) -> Result<()> {
    if refinement == 0 || refinement > 12 {
        return Err(Error::param(format!("refinement must be in 1..=12, got {refinement}")));
    }
    Ok(())
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::param(format!("{name} must be positive, got {value}")));
    }
    Ok(())
}

/// Geometric grading of node spacing: the step next to the focus is `fine`
/// and each following step grows by `ratio` until it reaches the coarse
/// spacing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grading {
    pub fine: f64,
    pub ratio: f64,
}

/// Where a graded node sequence is refined.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Focus {
    Start,
    End,
    Both,
}

/// Ascending nodes from `0` to `length`, uniform with spacing at most
/// `coarse`, or graded toward `focus`.
pub fn graded_nodes(length: f64, coarse: f64, grading: Option<Grading>, focus: Focus) -> Vec<f64> {
    let Some(g) = grading else {
        let n = (length / coarse).ceil().max(1.0) as usize;
        return (0..=n).map(|i| length * i as f64 / n as f64).collect();
    };
    let half = |len: f64| -> Vec<f64> {
        // steps outward from the focus
        let mut steps = Vec::new();
        let mut total = 0.0;
        let mut s = g.fine.min(coarse);
        while total < len {
            steps.push(s);
            total += s;
            s = (s * g.ratio).min(coarse);
        }
        if steps.len() > 1 && total - len > 0.5 * steps[steps.len() - 1] {
            total -= steps.pop().unwrap();
        }
        let scale = len / total;
        let mut pos = vec![0.0];
        let mut acc = 0.0;
        for st in &steps {
            acc += st * scale;
            pos.push(acc);
        }
        *pos.last_mut().unwrap() = len;
        pos
    };
    match focus {
        Focus::Start => half(length),
        Focus::End => half(length).iter().rev().map(|x| length - x).collect(),
        Focus::Both => {
            let h = half(0.5 * length);
            let mut out = h.clone();
            out.extend(h.iter().rev().skip(1).map(|x| length - x));
            out
        }
    }
}

fn flat_lengths(vertices: &[[f64; 3]], triangles: &[[usize; 3]]) -> BTreeMap<(usize, usize), f64> {
    let mut map = BTreeMap::new();
    for t in triangles {
        for i in 0..3 {
            let (a, b) = (t[i], t[(i + 1) % 3]);
            let (p, q) = (vertices[a], vertices[b]);
            map.entry(edge_key(a, b)).or_insert_with(|| (p[0] - q[0]).hypot(p[1] - q[1]));
        }
    }
    map
}

/// Tensor grid over `theta x t`, triangulated with one diagonal per cell.
/// Returns raw vertices `(theta, t, 0)` and CCW triangles.
fn tensor_grid(theta: &[f64], t: &[f64]) -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let nx = theta.len();
    let mut vertices = Vec::with_capacity(nx * t.len());
    for &tj in t {
        for &th in theta {
            vertices.push([th, tj, 0.0]);
        }
    }
    let idx = |i: usize, j: usize| j * nx + i;
    let mut triangles = Vec::new();
    for j in 0..t.len() - 1 {
        for i in 0..nx - 1 {
            triangles.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    (vertices, triangles)
}

/// Uniform triangulation of the rectangle `[0, width] x [0, height]`.
pub fn build_rectangle_mesh(width: f64, height: f64, nx: usize, ny: usize) -> Result<SurfaceMesh> {
    check_positive("width", width)?;
    check_positive("height", height)?;
    if nx == 0 || ny == 0 {
        return Err(Error::param("rectangle needs at least one cell per direction"));
    }
    let xs: Vec<f64> = (0..=nx).map(|i| width * i as f64 / nx as f64).collect();
    let ys: Vec<f64> = (0..=ny).map(|j| height * j as f64 / ny as f64).collect();
    let (vertices, triangles) = tensor_grid(&xs, &ys);
    SurfaceMesh::new(MeshParts { vertices, triangles, ..Default::default() }, SurfaceTopology::disc())
}

/// Cells per unit-length direction used by the flat builders at a given
/// refinement level: `16 * 2^(r - 1)` columns around a circle of length 2 pi.
fn circle_columns(refinement: u32) -> usize {
    16 << (refinement - 1)
}

fn periodic_mesh(theta: &[f64], t: &[f64], reversed: bool, topology: SurfaceTopology) -> Result<SurfaceMesh> {
    let nx = theta.len();
    let nt = t.len();
    if nx < 4 {
        return Err(Error::param("need at least three columns around the seam"));
    }
    let (vertices, triangles) = tensor_grid(theta, t);
    let metric = flat_lengths(&vertices, &triangles);
    let top = t[nt - 1];
    let mut glue = Vec::with_capacity(nt);
    for j in 0..nt {
        let jj = if reversed {
            let mirrored = nt - 1 - j;
            if (t[mirrored] - (top - t[j])).abs() > 1e-12 * top.max(1.0) {
                return Err(Error::param("reversed gluing needs a height grid symmetric under t -> h - t"));
            }
            mirrored
        } else {
            j
        };
        glue.push((jj * nx, j * nx + nx - 1));
    }
    let parts = MeshParts {
        vertices,
        triangles,
        vertex_identifications: glue,
        metric_edge_lengths: Some(metric),
        ..Default::default()
    };
    SurfaceMesh::new(parts, topology)
}

/// Flat cylinder of circumference 2 pi and height `modulus`, realized as a
/// rectangle with its vertical sides glued.
pub fn build_flat_cylinder_mesh(modulus: f64, refinement: u32) -> Result<SurfaceMesh> {
    check_positive("cylinder modulus", modulus)?;
    check_refinement(refinement)?;
    let coarse = 2.0 * PI / circle_columns(refinement) as f64;
    let theta = graded_nodes(2.0 * PI, coarse, None, Focus::Both);
    let t = graded_nodes(modulus, coarse, None, Focus::End);
    periodic_mesh(&theta, &t, false, SurfaceTopology::annulus())
}

/// Flat cylinder with spacing refined geometrically toward the boundary point
/// `(theta, t) = (0, modulus)` on the top circle.
pub fn build_graded_cylinder_mesh(modulus: f64, refinement: u32, grading: Grading) -> Result<SurfaceMesh> {
    check_positive("cylinder modulus", modulus)?;
    check_refinement(refinement)?;
    let coarse = (2.0 * PI / circle_columns(refinement) as f64).min(modulus / 2.0);
    let half = graded_nodes(PI, coarse, Some(grading), Focus::Start);
    let mut theta = half.clone();
    theta.extend(half.iter().rev().skip(1).map(|x| 2.0 * PI - x));
    let t = graded_nodes(modulus, coarse, Some(grading), Focus::End);
    periodic_mesh(&theta, &t, false, SurfaceTopology::annulus())
}

/// Flat Möbius band: the rectangle `[0, 2 pi] x [0, modulus]` with
/// `(0, t) ~ (2 pi, modulus - t)`.
pub fn build_moebius_mesh(modulus: f64, refinement: u32) -> Result<SurfaceMesh> {
    check_positive("Moebius modulus", modulus)?;
    check_refinement(refinement)?;
    let coarse = 2.0 * PI / circle_columns(refinement) as f64;
    let theta = graded_nodes(2.0 * PI, coarse, None, Focus::Both);
    let t = graded_nodes(modulus, coarse, None, Focus::Both);
    periodic_mesh(&theta, &t, true, SurfaceTopology::moebius())
}

/// Möbius band refined toward the boundary point `(pi, 0)` (and, by the
/// symmetric height grid, `(pi, modulus)`).
pub fn build_graded_moebius_mesh(modulus: f64, refinement: u32, grading: Grading) -> Result<SurfaceMesh> {
    check_positive("Moebius modulus", modulus)?;
    check_refinement(refinement)?;
    let coarse = (2.0 * PI / circle_columns(refinement) as f64).min(modulus / 2.0);
    let half = graded_nodes(PI, coarse, Some(grading), Focus::End);
    let mut theta = half.clone();
    theta.extend(half.iter().rev().skip(1).map(|x| 2.0 * PI - x));
    let t = graded_nodes(modulus, coarse, Some(grading), Focus::Both);
    periodic_mesh(&theta, &t, true, SurfaceTopology::moebius())
}

/// Collar chart mesh over `(theta, t)`, with `t` in `[0, a]` for boundary
/// collars and `[-a, a]` otherwise. Metric lengths come from the collar
/// metric at edge midpoints; the `t` spacing is graded so every row step has
/// the same metric length.
pub fn build_collar_mesh(chart: CollarChart, truncation: f64, refinement: u32) -> Result<SurfaceMesh> {
    check_positive("truncation", truncation)?;
    check_refinement(refinement)?;
    if truncation >= chart.width {
        return Err(Error::param(format!(
            "truncation {truncation} must be below the collar width {}",
            chart.width
        )));
    }
    let l = chart.geodesic_length;
    let n_theta = circle_columns(refinement);
    let dtheta = 2.0 * PI / n_theta as f64;
    // metric arclength in t: F(t) = asinh(tan(l t / 2 pi))
    let big_f = |t: f64| (l * t / (2.0 * PI)).tan().asinh();
    let inv_f = |f: f64| (2.0 * PI / l) * f.sinh().atan();
    let rows_for = |a: f64| ((big_f(a) / (l / (2.0 * PI) * dtheta)).ceil() as usize).max(1);
    let t: Vec<f64> = match chart.strip_type {
        StripType::BoundaryCollar => {
            let n = rows_for(truncation);
            let fa = big_f(truncation);
            (0..=n).map(|j| inv_f(fa * j as f64 / n as f64)).collect()
        }
        StripType::InteriorCollar | StripType::CrossingStrip => {
            let n = rows_for(truncation);
            let fa = big_f(truncation);
            (0..=2 * n).map(|j| inv_f(fa * (j as f64 / n as f64 - 1.0))).collect()
        }
    };
    let theta: Vec<f64> = (0..=n_theta).map(|i| dtheta * i as f64).collect();
    let (vertices, triangles) = tensor_grid(&theta, &t);
    let mut metric = BTreeMap::new();
    for tri in &triangles {
        for i in 0..3 {
            let (a, b) = (tri[i], tri[(i + 1) % 3]);
            metric.entry(edge_key(a, b)).or_insert_with(|| chart.edge_length(vertices[a], vertices[b]));
        }
    }
    let nt = t.len();
    let (glue, topology) = match chart.strip_type {
        StripType::CrossingStrip => (Vec::new(), SurfaceTopology::disc()),
        _ => ((0..nt).map(|j| (j * (n_theta + 1), j * (n_theta + 1) + n_theta)).collect(), SurfaceTopology::annulus()),
    };
    let parts = MeshParts {
        vertices,
        triangles,
        vertex_identifications: glue,
        metric_edge_lengths: Some(metric),
        boundary_curves: Vec::new(),
        chart: Some(chart),
    };
    SurfaceMesh::new(parts, topology)
}

/// Triangulates the band between two open chains `a` and `b` by always taking
/// the shorter diagonal. Triangles are oriented CCW when `b` lies
/// to the left of `a` walking along increasing parameter.
fn chain_strip(a: &[(usize, f64)], b: &[(usize, f64)], pos: &[[f64; 3]], out: &mut Vec<[usize; 3]>) {
    let dist = |u: usize, v: usize| (pos[u][0] - pos[v][0]).hypot(pos[u][1] - pos[v][1]);
    let (mut i, mut j) = (0, 0);
    while i + 1 < a.len() || j + 1 < b.len() {
        let advance_a = if j + 1 == b.len() {
            true
        } else if i + 1 == a.len() {
            false
        } else {
            dist(a[i + 1].0, b[j].0) <= dist(a[i].0, b[j + 1].0)
        };
        if advance_a {
            out.push([a[i].0, b[j].0, a[i + 1].0]);
            i += 1;
        } else {
            out.push([a[i].0, b[j].0, b[j + 1].0]);
            j += 1;
        }
    }
}

/// Closed version of [`chain_strip`] for two concentric rings whose first
/// nodes sit close to angle 0.
fn ring_strip(a: &[usize], b: &[usize], pos: &[[f64; 3]], out: &mut Vec<[usize; 3]>) {
    let chain = |r: &[usize]| -> Vec<(usize, f64)> {
        let n = r.len();
        let mut c: Vec<(usize, f64)> = r.iter().enumerate().map(|(i, &v)| (v, i as f64 / n as f64)).collect();
        c.push((r[0], 1.0));
        c
    };
    chain_strip(&chain(a), &chain(b), pos, out);
}

/// Radii from `outer` down to `inner`: steps of at most `h`, shrinking
/// proportionally to the radius (ratio `1 + c`) close to `inner` when
/// `c * r < h`.
fn shrinking_radii(outer: f64, inner: f64, h: f64, c: f64) -> Vec<f64> {
    let mut r = vec![outer];
    loop {
        let cur = *r.last().unwrap();
        let step = h.min(c * cur / (1.0 + c));
        let next = cur - step;
        if next <= inner + 0.3 * step.min(h) {
            r.push(inner);
            break;
        }
        r.push(next);
    }
    r
}

/// Unit disc from concentric rings: ring `i` of `R = 3 * 2^(refinement - 1)`
/// has radius `i / R` and `7 i` nodes, with a seven-triangle fan at the center.
/// Rings of level 5 and up have edges shorter than 0.03.
pub fn build_disc_mesh(refinement: u32) -> Result<SurfaceMesh> {
    check_refinement(refinement)?;
    let rings = 3usize << (refinement - 1);
    let mut vertices = vec![[0.0, 0.0, 0.0]];
    let mut ring_ids: Vec<Vec<usize>> = Vec::with_capacity(rings);
    for i in 1..=rings {
        let r = i as f64 / rings as f64;
        let n = 7 * i;
        // odd rings are staggered by half a step so cells are not rectangles
        let shift = if i % 2 == 1 { 0.5 } else { 0.0 };
        let ids = (0..n)
            .map(|j| {
                let a = 2.0 * PI * (j as f64 + shift) / n as f64;
                vertices.push([r * a.cos(), r * a.sin(), 0.0]);
                vertices.len() - 1
            })
            .collect();
        ring_ids.push(ids);
    }
    let mut triangles = Vec::new();
    let first = &ring_ids[0];
    for j in 0..first.len() {
        triangles.push([0, first[j], first[(j + 1) % first.len()]]);
    }
    for w in ring_ids.windows(2) {
        ring_strip(&w[0], &w[1], &vertices, &mut triangles);
    }
    let parts = MeshParts {
        vertices,
        triangles,
        boundary_curves: vec![BoundaryCurve::Circle { center: [0.0, 0.0], radius: 1.0 }],
        ..Default::default()
    };
    SurfaceMesh::new(parts, SurfaceTopology::disc())
}

/// Annulus `inner <= |z| <= 1`, with ring spacing `h = 1 / (3 * 2^(refinement - 1))`
/// refined proportionally to the radius near a small inner circle.
pub fn build_annulus_mesh(inner: f64, refinement: u32) -> Result<SurfaceMesh> {
    check_positive("inner radius", inner)?;
    if inner >= 1.0 {
        return Err(Error::param("inner radius must be below 1"));
    }
    check_refinement(refinement)?;
    let h = 1.0 / (3usize << (refinement - 1)) as f64;
    let n_min = 24usize;
    let c = 2.0 * PI / n_min as f64;
    let radii = shrinking_radii(1.0, inner, h, c);
    let mut vertices = Vec::new();
    let mut ring_ids = Vec::new();
    for &r in radii.iter().rev() {
        let n = ((2.0 * PI * r / h).round() as usize).max(n_min);
        let ids: Vec<usize> = (0..n)
            .map(|j| {
                let a = 2.0 * PI * j as f64 / n as f64;
                vertices.push([r * a.cos(), r * a.sin(), 0.0]);
                vertices.len() - 1
            })
            .collect();
        ring_ids.push(ids);
    }
    let mut triangles = Vec::new();
    for w in ring_ids.windows(2) {
        ring_strip(&w[0], &w[1], &vertices, &mut triangles);
    }
    let parts = MeshParts {
        vertices,
        triangles,
        boundary_curves: vec![
            BoundaryCurve::Circle { center: [0.0, 0.0], radius: inner },
            BoundaryCurve::Circle { center: [0.0, 0.0], radius: 1.0 },
        ],
        ..Default::default()
    };
    SurfaceMesh::new(parts, SurfaceTopology::annulus())
}

/// Upper half of the unit disc: rings of `3 i` segments over `[0, pi]`
/// around a center vertex on the diameter.
pub fn build_half_disc_mesh(refinement: u32) -> Result<SurfaceMesh> {
    check_refinement(refinement)?;
    let rings = 3usize << (refinement - 1);
    let mut vertices = vec![[0.0, 0.0, 0.0]];
    let mut chains: Vec<Vec<(usize, f64)>> = Vec::new();
    for i in 1..=rings {
        let r = i as f64 / rings as f64;
        let n = 3 * i;
        let chain = (0..=n)
            .map(|j| {
                let s = j as f64 / n as f64;
                let a = PI * s;
                vertices.push([r * a.cos(), r * a.sin(), 0.0]);
                (vertices.len() - 1, s)
            })
            .collect();
        chains.push(chain);
    }
    let mut triangles = Vec::new();
    for w in chains[0].windows(2) {
        triangles.push([0, w[0].0, w[1].0]);
    }
    for w in chains.windows(2) {
        chain_strip(&w[0], &w[1], &vertices, &mut triangles);
    }
    let parts = MeshParts {
        vertices,
        triangles,
        boundary_curves: vec![BoundaryCurve::Circle { center: [0.0, 0.0], radius: 1.0 }],
        ..Default::default()
    };
    SurfaceMesh::new(parts, SurfaceTopology::disc())
}

/// Circular arc from `e^{i beta}` through `(x, 0)` to `e^{-i beta}`,
/// evaluated at arclength fraction `s`.
struct SymmetricArc {
    beta: f64,
    x: f64,
    center: Option<f64>,
    start: f64,
    sweep: f64,
    radius: f64,
}

impl SymmetricArc {
    fn new(beta: f64, x: f64) -> Self {
        let denom = beta.cos() - x;
        if denom.abs() < 1e-12 {
            return Self { beta, x, center: None, start: 0.0, sweep: 0.0, radius: 0.0 };
        }
        let c = (1.0 - x * x) / (2.0 * denom);
        let radius = (x - c).abs();
        let start = beta.sin().atan2(beta.cos() - c);
        let sweep = if x < c { 2.0 * (PI - start) } else { -2.0 * start };
        Self { beta, x, center: Some(c), start, sweep, radius }
    }

    fn length(&self) -> f64 {
        match self.center {
            Some(_) => self.radius * self.sweep.abs(),
            None => 2.0 * self.beta.sin(),
        }
    }

    fn point(&self, s: f64) -> [f64; 3] {
        if s == 0.0 {
            return [self.beta.cos(), self.beta.sin(), 0.0];
        }
        if s == 1.0 {
            return [self.beta.cos(), -self.beta.sin(), 0.0];
        }
        match self.center {
            Some(c) => {
                let a = self.start + s * self.sweep;
                [c + self.radius * a.cos(), self.radius * a.sin(), 0.0]
            }
            None => [self.x, self.beta.sin() * (1.0 - 2.0 * s), 0.0],
        }
    }
}

fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let u = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Half-angle of the boundary endpoints of the row crossing the real axis at
/// `x`: circles centered at `p = 1` near `p`, hyperbolic geodesics of the
/// disc (orthogonal to the unit circle) far from `p`, blended in between.
fn row_beta(x: f64) -> f64 {
    let ball = 2.0 * (0.5 * (1.0 - x)).min(1.0).asin();
    let geodesic = 0.5 * PI - 2.0 * x.atan();
    let w = smoothstep(-0.2, 0.5, x);
    w * ball + (1.0 - w) * geodesic
}

/// Unit disc with the half-disc `|z - 1| < epsilon` removed. The cut arc is
/// boundary loop material lying on the circle of radius `epsilon` about
/// `p = (1, 0)`; the rest lies on the unit circle. Mesh rows are circular
/// arcs joining boundary points symmetric about the real axis; the rows
/// above a given radius are the same for every `epsilon`, so a sequence of
/// cuts only changes the mesh next to `p`.
pub fn build_notched_disc_mesh(epsilon: f64, refinement: u32) -> Result<SurfaceMesh> {
    check_positive("cut radius", epsilon)?;
    if epsilon > 0.5 {
        return Err(Error::param("cut radius must not exceed 0.5"));
    }
    check_refinement(refinement)?;
    let h = 1.0 / (3usize << (refinement - 1)) as f64;
    let n_near = 12usize;
    let c = PI / n_near as f64;

    // rows from the far end toward p; the sequence does not depend on epsilon
    let mut xs = Vec::new();
    let mut x = -1.0 + h;
    let x_cut = 1.0 - epsilon;
    loop {
        xs.push(x);
        let dbeta = (row_beta(x + 1e-6) - row_beta(x - 1e-6)).abs() / 2e-6;
        let step = h.min(h / dbeta.max(1e-12)).min(c * (1.0 - x) / (1.0 + c));
        let next = x + step;
        if next >= x_cut - 0.3 * step {
            break;
        }
        x = next;
    }
    xs.push(x_cut);

    let mut vertices = vec![[-1.0, 0.0, 0.0]];
    let mut chains: Vec<Vec<(usize, f64)>> = Vec::new();
    for &x in &xs {
        let arc = SymmetricArc::new(row_beta(x), x);
        let n_min = if x > 0.0 { n_near } else { 2 };
        let n = ((arc.length() / h).ceil() as usize).max(n_min);
        let chain = (0..=n)
            .map(|j| {
                let s = j as f64 / n as f64;
                vertices.push(arc.point(s));
                (vertices.len() - 1, s)
            })
            .collect();
        chains.push(chain);
    }
    // cut row endpoints must sit exactly on both circles
    let cut = chains.last().unwrap();
    let beta_cut = 2.0 * (0.5 * epsilon).asin();
    vertices[cut[0].0] = [beta_cut.cos(), beta_cut.sin(), 0.0];
    vertices[cut[cut.len() - 1].0] = [beta_cut.cos(), -beta_cut.sin(), 0.0];

    let mut triangles = Vec::new();
    let cap = &chains[0];
    for w in cap.windows(2) {
        triangles.push([0, w[1].0, w[0].0]);
    }
    for w in chains.windows(2) {
        // rows are walked top to bottom; the next row lies to the right
        chain_strip(&w[1], &w[0], &vertices, &mut triangles);
    }
    for t in &mut triangles {
        let [a, b, c] = *t;
        let (p, q, r) = (vertices[a], vertices[b], vertices[c]);
        let area = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
        if area < 0.0 {
            *t = [a, c, b];
        }
    }
    let parts = MeshParts {
        vertices,
        triangles,
        boundary_curves: vec![
            BoundaryCurve::Circle { center: [0.0, 0.0], radius: 1.0 },
            BoundaryCurve::Circle { center: [1.0, 0.0], radius: epsilon },
        ],
        ..Default::default()
    };
    SurfaceMesh::new(parts, SurfaceTopology::disc())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn min_signed_area(mesh: &SurfaceMesh) -> f64 {
        let v = mesh.vertices();
        mesh.triangles()
            .iter()
            .map(|t| {
                let (p, q, r) = (v[t[0]], v[t[1]], v[t[2]]);
                0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn disc_level_one() {
        let m = build_disc_mesh(1).unwrap();
        assert_eq!(m.boundary_loops().len(), 1);
        assert_eq!(m.topology(), SurfaceTopology::disc());
        assert_eq!(m.euler_characteristic(), 1);
        assert!(min_signed_area(&m) > 0.0);
    }

    #[test]
    fn disc_perimeter_error_decreases() {
        // inscribed regular 21 * 2^(r-1)-gon
        let mut prev = f64::INFINITY;
        for r in 1..=6 {
            let m = build_disc_mesh(r).unwrap();
            let n = (21usize << (r - 1)) as f64;
            let polygon = 2.0 * n * (PI / n).sin();
            assert!((m.boundary_length() - polygon).abs() < 1e-12);
            let err = 2.0 * PI - m.boundary_length();
            assert!(err > 0.0 && err < prev);
            prev = err;
        }
    }

    #[test]
    fn disc_edges_shrink() {
        let mut prev = f64::INFINITY;
        for r in 1..=5 {
            let h = build_disc_mesh(r).unwrap().max_edge_length();
            assert!(h < prev);
            prev = h;
        }
        assert!(build_disc_mesh(5).unwrap().max_edge_length() < 0.03);
    }

    #[test]
    fn cylinder_topology_and_length() {
        for &h in &[1.0, 0.01, 4.0] {
            let m = build_flat_cylinder_mesh(h, 2).unwrap();
            assert_eq!(m.boundary_loops().len(), 2);
            assert_eq!(m.euler_characteristic(), 0);
            assert!((m.boundary_length() - 4.0 * PI).abs() < 1e-12);
        }
        assert!(build_flat_cylinder_mesh(0.0, 1).is_err());
        assert!(build_flat_cylinder_mesh(-1.0, 1).is_err());
    }

    #[test]
    fn graded_cylinder_is_valid() {
        let g = Grading { fine: 0.002, ratio: 1.25 };
        let m = build_graded_cylinder_mesh(0.1, 3, g).unwrap();
        assert_eq!(m.euler_characteristic(), 0);
        assert!((m.boundary_length() - 4.0 * PI).abs() < 1e-10);
        let lens: Vec<f64> = m.connectivity().boundary_edges.iter().map(|e| e.length).collect();
        let min = lens.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min < 0.0025, "finest boundary spacing {min}");
    }

    #[test]
    fn moebius_topology() {
        for &m in &[1.0, 0.2, 3.0] {
            let mesh = build_moebius_mesh(m, 2).unwrap();
            assert_eq!(mesh.boundary_loops().len(), 1);
            assert!(!mesh.topology().orientable);
            assert_eq!(mesh.topology().genus, 0);
            assert_eq!(mesh.euler_characteristic(), 0);
            assert!((mesh.boundary_length() - 4.0 * PI).abs() < 1e-12);
        }
        assert!(build_moebius_mesh(0.0, 1).is_err());
        let g = Grading { fine: 0.003, ratio: 1.3 };
        let mesh = build_graded_moebius_mesh(0.3, 2, g).unwrap();
        assert_eq!(mesh.euler_characteristic(), 0);
    }

    #[test]
    fn collar_width_values() {
        assert!((collar_width(1.0) - 6.851_281_062_829_234).abs() < 1e-6);
        assert!(collar_width(0.01) > 100.0 * collar_width(1.0));
        assert!(collar_width(10.0) < 0.05 * collar_width(1.0));
        let mut prev = f64::INFINITY;
        for i in 0..=60 {
            let l = 0.01 * 1000f64.powf(i as f64 / 60.0);
            let w = collar_width(l);
            assert!(w < prev);
            prev = w;
        }
    }

    #[test]
    fn collar_mesh_respects_width() {
        let chart = CollarChart::new(1.0, StripType::BoundaryCollar).unwrap();
        assert!((chart.metric_factor(0.0) - 0.025_330_295_910_584_444).abs() < 1e-15);
        assert!(build_collar_mesh(chart, 3.0, 2).is_ok());
        assert!(build_collar_mesh(chart, chart.width, 2).is_err());
        assert!(build_collar_mesh(chart, 7.0, 2).is_err());
        for st in [StripType::InteriorCollar, StripType::CrossingStrip] {
            let chart = CollarChart::new(0.5, st).unwrap();
            let m = build_collar_mesh(chart, 0.8 * chart.width, 2).unwrap();
            let chi = if st == StripType::CrossingStrip { 1 } else { 0 };
            assert_eq!(m.euler_characteristic(), chi);
        }
    }

    #[test]
    fn collar_longest_edge_grows_with_truncation() {
        let chart = CollarChart::new(1.0, StripType::BoundaryCollar).unwrap();
        let mut prev = 0.0;
        for frac in [0.5, 0.7, 0.9, 0.99] {
            let m = build_collar_mesh(chart, frac * chart.width, 2).unwrap();
            let longest = m.max_edge_length();
            assert!(longest > prev);
            prev = longest;
        }
        let mut prev = 0.0;
        for i in 0..50 {
            let f = chart.metric_factor(i as f64 * chart.width / 50.0);
            assert!(f > prev);
            prev = f;
        }
    }

    #[test]
    fn notched_disc_is_valid_and_nested() {
        for &eps in &[0.2, 0.1, 0.05, 0.025] {
            let m = build_notched_disc_mesh(eps, 2).unwrap();
            assert!(min_signed_area(&m) > 0.0, "eps {eps}");
            assert_eq!(m.euler_characteristic(), 1);
            let cut = BoundaryCurve::Circle { center: [1.0, 0.0], radius: eps };
            let outer = BoundaryCurve::Circle { center: [0.0, 0.0], radius: 1.0 };
            for e in &m.connectivity().boundary_edges {
                let (a, b) = (m.position(e.a), m.position(e.b));
                let on_outer = outer.contains(a) && outer.contains(b);
                let on_cut = cut.contains(a) && cut.contains(b);
                assert!(on_outer ^ on_cut);
            }
        }
        let a = build_notched_disc_mesh(0.1, 2).unwrap();
        let b = build_notched_disc_mesh(0.05, 2).unwrap();
        let far = |m: &SurfaceMesh| m.vertices().iter().filter(|v| v[0] < 0.0).count();
        assert_eq!(far(&a), far(&b));
    }

    #[test]
    fn half_disc_and_annulus() {
        let m = build_half_disc_mesh(2).unwrap();
        assert!(min_signed_area(&m) > 0.0);
        assert_eq!(m.euler_characteristic(), 1);
        assert!((m.boundary_length() - (2.0 + PI)).abs() < 0.01);
        let a = build_annulus_mesh(0.05, 2).unwrap();
        assert!(min_signed_area(&a) > 0.0);
        assert_eq!(a.euler_characteristic(), 0);
        assert_eq!(a.boundary_loops().len(), 2);
    }

    #[test]
    fn graded_nodes_cover_interval() {
        let g = Grading { fine: 0.01, ratio: 1.2 };
        for focus in [Focus::Start, Focus::End, Focus::Both] {
            let n = graded_nodes(2.0, 0.1, Some(g), focus);
            assert_eq!(n[0], 0.0);
            assert_eq!(*n.last().unwrap(), 2.0);
            assert!(n.windows(2).all(|w| w[1] > w[0]));
        }
        let n = graded_nodes(2.0, 0.1, Some(g), Focus::End);
        assert!(n[n.len() - 1] - n[n.len() - 2] < 0.011);
    }
}
