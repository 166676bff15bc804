//! Discretizations of the unit 2-sphere.
//!
//! Two node sets are provided:
//!
//! * [`build_grid`]: a product rule (Gauss-Legendre in `z = cos(polar angle)` times the
//!   trapezoidal rule in azimuth). With `n` polar nodes and `2n` azimuthal nodes it integrates
//!   every polynomial in `(x, y, z)` of total degree `<= 2n - 1` exactly. This is the rule used
//!   for every integral.
//! * [`build_icosphere`]: subdivided icosahedron vertices with barycentric dual-cell weights.
//!   Spatially uniform, used for pointwise scans.
//!
//! Local rules over spherical caps, zonal bands and circles are built by [`band`] and
//! [`circle`] and share the [`Quadrature`] representation.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::SphericalFunction;

pub type Vec3 = Vector3<f64>;

/// Nodes on the sphere with positive weights (steradians).
#[derive(Clone, Debug, Default)]
pub struct Quadrature {
    pub nodes: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `sum_i w_i * values_i`, summed in node order.
    pub fn dot(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.weights.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Evaluate `g` at every node in parallel; the returned vector is in node order.
    pub fn map<T, F>(&self, g: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&Vec3) -> T + Sync + Send,
    {
        self.nodes.par_iter().map(g).collect()
    }

    pub fn try_map<T, F>(&self, g: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&Vec3) -> Result<T> + Sync + Send,
    {
        self.nodes.par_iter().map(g).collect()
    }

    pub fn integrate(&self, f: &SphericalFunction) -> Result<f64> {
        let values = self.try_map(|u| f.eval_checked(u))?;
        Ok(self.dot(&values))
    }

    pub fn append(&mut self, other: Quadrature) {
        self.nodes.extend(other.nodes);
        self.weights.extend(other.weights);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridScheme {
    ProductGauss,
    Icosphere,
}

/// Full-sphere grid: unit nodes, strictly positive weights summing to `4 pi`.
#[derive(Clone, Debug)]
pub struct SphereGrid {
    quad: Quadrature,
    level: u32,
    scheme: GridScheme,
}

impl SphereGrid {
    pub fn nodes(&self) -> &[Vec3] {
        &self.quad.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.quad.weights
    }

    pub fn quadrature(&self) -> &Quadrature {
        &self.quad
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn scheme(&self) -> GridScheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.quad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quad.is_empty()
    }

    /// Highest total degree of polynomials integrated exactly, when the scheme declares one.
    pub fn polynomial_degree(&self) -> Option<usize> {
        match self.scheme {
            GridScheme::ProductGauss => Some(2 * polar_nodes(self.level) - 1),
            GridScheme::Icosphere => None,
        }
    }

    /// Points per polar direction used by local rules built at the same level.
    pub fn resolution(&self) -> usize {
        polar_nodes(self.level)
    }

    pub fn entries(&self) -> Vec<GridEntry> {
        self.quad
            .nodes
            .iter()
            .zip(&self.quad.weights)
            .map(|(u, &w)| GridEntry {
                node: [u.x, u.y, u.z],
                weight: w,
            })
            .collect()
    }
}

/// One element of the JSON grid dump.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GridEntry {
    pub node: [f64; 3],
    pub weight: f64,
}

/// Number of Gauss-Legendre nodes in `z` at a given level: `3 * 2^level`.
pub fn polar_nodes(level: u32) -> usize {
    3usize << level.min(12)
}

/// Product Gauss-Legendre x trapezoid grid, exact for polynomials of degree `<= 2n - 1`.
pub fn build_grid(level: u32) -> SphereGrid {
    let n = polar_nodes(level);
    let m = 2 * n;
    let (zs, wz) = gauss_legendre(n);
    let dphi = 2.0 * PI / m as f64;
    let mut quad = Quadrature::default();
    for (z, w) in zs.iter().zip(&wz) {
        let s = (1.0 - z * z).max(0.0).sqrt();
        for j in 0..m {
            // half-step offset keeps the grid symmetric under u -> -u
            let phi = (j as f64 + 0.5) * dphi;
            quad.nodes.push(Vec3::new(s * phi.cos(), s * phi.sin(), *z));
            quad.weights.push(w * dphi);
        }
    }
    SphereGrid {
        quad,
        level,
        scheme: GridScheme::ProductGauss,
    }
}

/// Subdivided icosahedron; each triangle's spherical area is split equally between its vertices.
pub fn build_icosphere(level: u32) -> SphereGrid {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut cache = std::collections::HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push((verts[a] + verts[b]).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let mut weights = vec![0.0; verts.len()];
    for &[a, b, c] in &faces {
        let area = spherical_triangle_area(&verts[a], &verts[b], &verts[c]);
        for i in [a, b, c] {
            weights[i] += area / 3.0;
        }
    }
    let total: f64 = weights.iter().sum();
    let scale = 4.0 * PI / total;
    weights.iter_mut().for_each(|w| *w *= scale);
    SphereGrid {
        quad: Quadrature {
            nodes: verts,
            weights,
        },
        level,
        scheme: GridScheme::Icosphere,
    }
}

fn spherical_triangle_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    // Van Oosterom-Strackee
    let num = a.dot(&b.cross(c)).abs();
    let den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    2.0 * num.atan2(den)
}

/// `sum_i w_i f(u_i)` over the grid.
pub fn integrate_sphere(f: &SphericalFunction, grid: &SphereGrid) -> Result<f64> {
    grid.quad.integrate(f)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_interval(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|wi| wi * half).collect(),
    )
}

/// Zonal band `{u : psi_lo <= angle(u, axis) <= psi_hi}`: Gauss-Legendre in the polar angle,
/// trapezoid in azimuth. The integrand is smooth in `psi` for caps and bands, so the rule
/// converges spectrally.
pub fn band(axis: &Vec3, psi_lo: f64, psi_hi: f64, n_psi: usize, n_phi: usize) -> Quadrature {
    let frame = frame_about(axis);
    let (psis, wpsi) = gauss_interval(n_psi, psi_lo, psi_hi);
    let dphi = 2.0 * PI / n_phi as f64;
    let mut quad = Quadrature::default();
    for (psi, w) in psis.iter().zip(&wpsi) {
        let (s, c) = psi.sin_cos();
        for j in 0..n_phi {
            let phi = (j as f64 + 0.5) * dphi;
            let u = frame.base * c + (frame.e1 * phi.cos() + frame.e2 * phi.sin()) * s;
            quad.nodes.push(u);
            quad.weights.push(w * s * dphi);
        }
    }
    quad
}

/// The circle `{x : (x, center) = cos(radius)}` sampled at `m` equally spaced azimuths.
/// Returns the points (azimuth `phi_j = 2 pi j / m` in the frame of [`frame_about`]) and the
/// arc-length weight per point.
pub fn circle(center: &Vec3, radius: f64, m: usize) -> (Vec<Vec3>, f64) {
    let frame = frame_about(center);
    let (s, c) = radius.sin_cos();
    let pts = (0..m)
        .map(|j| {
            let phi = 2.0 * PI * j as f64 / m as f64;
            frame.base * c + (frame.e1 * phi.cos() + frame.e2 * phi.sin()) * s
        })
        .collect();
    (pts, 2.0 * PI * s / m as f64)
}

/// Orthonormal, right-handed triple `{e1, e2, u}` at a point of the sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentFrame {
    pub base: Vec3,
    pub e1: Vec3,
    pub e2: Vec3,
}

impl TangentFrame {
    /// Tangent vector with components `v` in this frame.
    pub fn tangent(&self, v: [f64; 2]) -> Vec3 {
        self.e1 * v[0] + self.e2 * v[1]
    }

    pub fn components(&self, v: &Vec3) -> [f64; 2] {
        [self.e1.dot(v), self.e2.dot(v)]
    }

    /// Same base point, tangent axes rotated by `angle`.
    pub fn rotated(&self, angle: f64) -> TangentFrame {
        let (s, c) = angle.sin_cos();
        TangentFrame {
            base: self.base,
            e1: self.e1 * c + self.e2 * s,
            e2: -self.e1 * s + self.e2 * c,
        }
    }
}

/// Frame from the azimuthal direction `z x u`. The construction is continuous away from the
/// poles `u = +-z`; exactly at the poles `e1 = x`.
pub fn tangent_basis(u: &Vec3) -> Result<TangentFrame> {
    let norm = u.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::NotUnit { norm });
    }
    Ok(frame_about(&(u / norm)))
}

pub(crate) fn frame_about(u: &Vec3) -> TangentFrame {
    let az = Vec3::new(-u.y, u.x, 0.0);
    let e1 = if az.norm() > 1e-12 {
        az.normalize()
    } else {
        Vec3::new(1.0, 0.0, 0.0)
    };
    let e1 = (e1 - u * u.dot(&e1)).normalize();
    let e2 = u.cross(&e1);
    TangentFrame { base: *u, e1, e2 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::builtin;

    #[test]
    fn gauss_legendre_small_rules() {
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
        let (x, w) = gauss_legendre(5);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        // x^8 integrates exactly with 5 points
        let i: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((i - 2.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn grid_invariants() {
        for level in 0..5 {
            let g = build_grid(level);
            assert!(g.weights().iter().all(|&w| w > 0.0));
            let total: f64 = g.weights().iter().sum();
            assert!((total - 4.0 * PI).abs() < 1e-10, "level {level}: {total}");
            let dev = g
                .nodes()
                .iter()
                .map(|u| (u.norm() - 1.0).abs())
                .fold(0.0, f64::max);
            assert!(dev < 1e-12);
        }
        assert_eq!(build_grid(0).len(), 18);
        assert!(build_grid(1).len() > build_grid(0).len());
    }

    #[test]
    fn icosphere_invariants() {
        let counts: Vec<usize> = (0..4).map(|l| build_icosphere(l).len()).collect();
        assert_eq!(counts, vec![12, 42, 162, 642]);
        let g = build_icosphere(3);
        let total: f64 = g.weights().iter().sum();
        assert!((total - 4.0 * PI).abs() < 1e-10);
        assert!(g.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn integrate_constant_and_odd() {
        let g = build_grid(3);
        let one = builtin::constant(1.0);
        assert!((integrate_sphere(&one, &g).unwrap() - 4.0 * PI).abs() < 1e-10);
        let lin = builtin::linear(Vec3::new(0.3, -1.2, 0.7));
        assert!(integrate_sphere(&lin, &g).unwrap().abs() < 1e-9);
        let sq = SphericalFunction::new("z^2", crate::function::Smoothness::Cinf, |u| u.z * u.z);
        assert!((integrate_sphere(&sq, &g).unwrap() - 4.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn band_measures_caps_exactly() {
        let axis = Vec3::new(1.0, 2.0, -0.5).normalize();
        for theta in [0.1, 0.7, 1.4] {
            let q = band(&axis, 0.0, theta, 16, 32);
            let exact = 2.0 * PI * (1.0 - theta.cos());
            assert!((q.total_weight() - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn tangent_basis_poles_and_equator() {
        for u in [Vec3::z(), -Vec3::z(), Vec3::x()] {
            let f = tangent_basis(&u).unwrap();
            assert!(f.e1.dot(&u).abs() < 1e-12 && f.e2.dot(&u).abs() < 1e-12);
            assert!((f.e1.cross(&f.e2) - u).norm() < 1e-12);
        }
        assert!(matches!(
            tangent_basis(&Vec3::new(1.0, 1.0, 0.0)),
            Err(Error::NotUnit { .. })
        ));
    }
}
