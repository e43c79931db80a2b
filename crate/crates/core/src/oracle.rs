//! Closed-form spectra and conformal maps used as ground truth for the
//! finite element results.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Problems with a known spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "problem", rename_all = "kebab-case")]
pub enum OracleProblem {
    /// Unit disc, Steklov on the whole circle.
    Disc,
    /// Rectangle `[0, length] x [0, depth]`, Steklov on the top side only.
    SloshingRectangle { length: f64, depth: f64 },
    /// Cylinder of circumference 2 pi and height `height`, Steklov on both ends.
    FlatCylinder { height: f64 },
    /// Annulus `inner <= |z| <= 1`, Steklov outside, Neumann on the hole.
    NeumannHoleAnnulus { inner: f64 },
    /// Upper half disc, Steklov on the arc, Neumann on the diameter.
    HalfDisc,
    /// Cylinder of circumference 2 pi and height `depth`, Steklov on the top
    /// circle, Neumann on the bottom.
    SloshingCylinder { depth: f64 },
}

/// A closed-form eigenvalue sequence with a note on how it is derived.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSpectrum {
    pub id: String,
    pub problem: OracleProblem,
    pub note: String,
}

impl OracleSpectrum {
    pub fn new(problem: OracleProblem) -> Self {
        let (id, note) = match problem {
            OracleProblem::Disc => ("disc".to_string(), "u = r^n cos/sin(n theta), sigma = n"),
            OracleProblem::SloshingRectangle { length, depth } => (
                format!("sloshing-rectangle-L{length}-h{depth}"),
                "u = cos(n pi x / L) cosh(n pi y / L), sigma = (n pi / L) tanh(n pi h / L)",
            ),
            OracleProblem::FlatCylinder { height } => (
                format!("flat-cylinder-h{height}"),
                "even/odd in t: n tanh(n h / 2), n coth(n h / 2); n = 0 gives 0 and 2 / h",
            ),
            OracleProblem::NeumannHoleAnnulus { inner } => (
                format!("neumann-hole-annulus-e{inner}"),
                "u = (r^n + e^2n r^-n) cos/sin(n theta), sigma = n (1 - e^2n) / (1 + e^2n)",
            ),
            OracleProblem::HalfDisc => ("half-disc".to_string(), "u = r^n cos(n theta), sigma = n, simple"),
            OracleProblem::SloshingCylinder { depth } => (
                format!("sloshing-cylinder-h{depth}"),
                "u = cosh(n t) cos/sin(n theta), sigma = n tanh(n h)",
            ),
        };
        Self { id, problem, note: note.to_string() }
    }

    /// `sigma_k`, counted from `sigma_0`.
    pub fn value(&self, k: usize) -> f64 {
        match self.problem {
            OracleProblem::Disc => disc_steklov(k),
            OracleProblem::SloshingRectangle { length, depth } => sloshing_rectangle(length, depth, k),
            OracleProblem::FlatCylinder { height } => flat_cylinder_steklov(height, k),
            OracleProblem::NeumannHoleAnnulus { inner } => neumann_hole_annulus(inner, k),
            OracleProblem::HalfDisc => half_disc_sloshing(k),
            OracleProblem::SloshingCylinder { depth } => sloshing_cylinder(depth, k),
        }
    }

    /// `sigma_0 ..= sigma_k_max`.
    pub fn values(&self, k_max: usize) -> Vec<f64> {
        match self.problem {
            OracleProblem::FlatCylinder { height } => flat_cylinder_spectrum(height, k_max),
            _ => (0..=k_max).map(|k| self.value(k)).collect(),
        }
    }
}

/// Unit disc: 0, 1, 1, 2, 2, ...
pub fn disc_steklov(k: usize) -> f64 {
    k.div_ceil(2) as f64
}

/// Sloshing in a rectangle of length `length` and depth `depth`.
pub fn sloshing_rectangle(length: f64, depth: f64, k: usize) -> f64 {
    let q = k as f64 * std::f64::consts::PI / length;
    q * (q * depth).tanh()
}

/// Half disc with Steklov arc and Neumann diameter: 0, 1, 2, ...
pub fn half_disc_sloshing(k: usize) -> f64 {
    k as f64
}

/// Cylinder of circumference 2 pi and height `depth`, Neumann at the bottom.
pub fn sloshing_cylinder(depth: f64, k: usize) -> f64 {
    let n = k.div_ceil(2) as f64;
    n * (n * depth).tanh()
}

/// Unit disc with a Neumann hole of radius `inner` at the center.
pub fn neumann_hole_annulus(inner: f64, k: usize) -> f64 {
    let n = k.div_ceil(2) as f64;
    n * (n * (1.0 / inner).ln()).tanh()
}

/// Both branches of circular mode `n >= 1` on the cylinder of height `h`.
pub fn cylinder_branches(h: f64, n: usize) -> (f64, f64) {
    let n = n as f64;
    let x = n * h / 2.0;
    (n * x.tanh(), n / x.tanh())
}

/// Sorted `sigma_0 ..= sigma_k_max` of the flat cylinder of height `h`.
pub fn flat_cylinder_spectrum(h: f64, k_max: usize) -> Vec<f64> {
    let mut modes = (k_max / 4 + 1).max(2);
    loop {
        let mut all = vec![0.0, 2.0 / h];
        for n in 1..=modes {
            let (a, b) = cylinder_branches(h, n);
            all.extend([a, a, b, b]);
        }
        all.sort_by(f64::total_cmp);
        // every unlisted value is at least the lower branch of mode `modes + 1`
        let floor = cylinder_branches(h, modes + 1).0;
        if all.len() > k_max && all[k_max] <= floor {
            all.truncate(k_max + 1);
            return all;
        }
        modes *= 2;
    }
}

pub fn flat_cylinder_steklov(h: f64, k: usize) -> f64 {
    flat_cylinder_spectrum(h, k)[k]
}

/// Collar coordinates to the annulus: `e^{i (theta + i t)}`.
pub fn map_collar_to_annulus(t: f64, theta: f64) -> Complex64 {
    (Complex64::new(0.0, 1.0) * Complex64::new(theta, t)).exp()
}

/// Strip coordinates to the disc: `tan((theta - pi + i t) / 4)`.
pub fn map_strip_to_disc(t: f64, theta: f64) -> Complex64 {
    (Complex64::new(theta - std::f64::consts::PI, t) / 4.0).tan()
}

/// `|df/dt - i df/dtheta|` at `(t, theta)` by fourth-order central
/// differences with step `step`. Zero up to truncation for holomorphic
/// functions of `theta + i t`.
pub fn cauchy_riemann_residual(f: impl Fn(f64, f64) -> Complex64, t: f64, theta: f64, step: f64) -> f64 {
    let d = |g: &dyn Fn(f64) -> Complex64| {
        (g(-2.0 * step) - g(2.0 * step) + 8.0 * (g(step) - g(-step))) / (12.0 * step)
    };
    let dt = d(&|s| f(t + s, theta));
    let dtheta = d(&|s| f(t, theta + s));
    (dt - Complex64::new(0.0, 1.0) * dtheta).norm()
}
