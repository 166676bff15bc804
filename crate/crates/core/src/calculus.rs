//! Second-order calculus on the sphere through the 1-homogeneous extension.
//!
//! For a function `f` on the sphere with extension `H(x) = |x| f(x/|x|)`, the matrix
//! `Q(f, u) = (f_ij + delta_ij f)` in an orthonormal tangent frame `{e1, e2}` at `u` equals the
//! restriction `e_i^T D^2 H(u) e_j`, and the eigenvalues of `D^2 H(u)` are those of `Q` plus a
//! zero in the radial direction. Everything here goes through Euclidean finite differences of
//! `H` (or a closed-form jet when the function carries one), never through charts.

use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{arr, Error, Result};
use crate::function::{Jet, Smoothness, SphericalFunction};
use crate::sphere_grid::{frame_about, Quadrature, SphereGrid, TangentFrame, Vec3};

/// Relative step of plain central differences: `step = CENTRAL_STEP_SCALE * (1 + |f(u)|)`.
pub const CENTRAL_STEP_SCALE: f64 = 1e-4;
/// Relative base step of the extrapolated differences used by [`jet`]. The larger step keeps
/// roundoff near `1e-10` while extrapolation removes the `h^2` truncation term.
pub const RICHARDSON_STEP_SCALE: f64 = 3e-3;
pub const MAX_STEP: f64 = 1e-2;

/// How second derivatives are approximated when no closed-form jet is available.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FdMode {
    Central,
    /// Two central-difference passes (`h`, `h/2`) combined to cancel the `h^2` error term.
    #[default]
    Richardson,
}

fn check_unit(u: &Vec3) -> Result<()> {
    let norm = u.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::NotUnit { norm });
    }
    Ok(())
}

fn h_checked(f: &SphericalFunction, x: &Vec3) -> Result<f64> {
    let v = f.homogeneous(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            label: f.label().to_string(),
            at: arr(x),
        })
    }
}

pub fn default_step(f: &SphericalFunction, u: &Vec3, mode: FdMode) -> f64 {
    let scale = match mode {
        FdMode::Central => CENTRAL_STEP_SCALE,
        FdMode::Richardson => RICHARDSON_STEP_SCALE,
    };
    (scale * (1.0 + f.eval(u).abs())).min(MAX_STEP)
}

/// Central-difference value, gradient and Hessian of `H` at `u` (19 evaluations).
pub fn fd_jet(f: &SphericalFunction, u: &Vec3, step: f64) -> Result<Jet> {
    if !(step > 0.0 && step <= MAX_STEP) {
        return Err(Error::StepOutOfRange(step));
    }
    check_unit(u)?;
    let e = [Vec3::x(), Vec3::y(), Vec3::z()];
    let h0 = h_checked(f, u)?;
    let mut plus = [0.0; 3];
    let mut minus = [0.0; 3];
    for i in 0..3 {
        plus[i] = h_checked(f, &(u + e[i] * step))?;
        minus[i] = h_checked(f, &(u - e[i] * step))?;
    }
    let h2 = step * step;
    let mut hess = Matrix3::zeros();
    let mut grad = Vec3::zeros();
    for i in 0..3 {
        grad[i] = (plus[i] - minus[i]) / (2.0 * step);
        hess[(i, i)] = (plus[i] - 2.0 * h0 + minus[i]) / h2;
        for j in (i + 1)..3 {
            let pp = h_checked(f, &(u + (e[i] + e[j]) * step))?;
            let pm = h_checked(f, &(u + (e[i] - e[j]) * step))?;
            let mp = h_checked(f, &(u - (e[i] - e[j]) * step))?;
            let mm = h_checked(f, &(u - (e[i] + e[j]) * step))?;
            let v = (pp - pm - mp + mm) / (4.0 * h2);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok(Jet {
        value: h0,
        gradient: grad,
        hessian: hess,
    })
}

/// Finite-difference Hessian `D^2 H(u)`.
pub fn homogeneous_hessian(f: &SphericalFunction, u: &Vec3, step: f64) -> Result<Matrix3<f64>> {
    Ok(fd_jet(f, u, step)?.hessian)
}

pub fn fd_jet_mode(f: &SphericalFunction, u: &Vec3, step: f64, mode: FdMode) -> Result<Jet> {
    match mode {
        FdMode::Central => fd_jet(f, u, step),
        FdMode::Richardson => {
            let coarse = fd_jet(f, u, step)?;
            let fine = fd_jet(f, u, step / 2.0)?;
            Ok(Jet {
                value: fine.value,
                gradient: (fine.gradient * 4.0 - coarse.gradient) / 3.0,
                hessian: (fine.hessian * 4.0 - coarse.hessian) / 3.0,
            })
        }
    }
}

/// Jet of `H` at `u`: the closed form when the function has one, extrapolated central
/// differences otherwise. Continuous-only functions are rejected.
pub fn jet(f: &SphericalFunction, u: &Vec3) -> Result<Jet> {
    jet_with(f, u, FdMode::default())
}

pub fn jet_with(f: &SphericalFunction, u: &Vec3, mode: FdMode) -> Result<Jet> {
    if f.smoothness() < Smoothness::C2 {
        return Err(Error::SmoothnessRequired(f.label().to_string()));
    }
    if let Some(j) = f.analytic_jet(u) {
        check_unit(u)?;
        return Ok(j);
    }
    fd_jet_mode(f, u, default_step(f, u, mode), mode)
}

/// Symmetric 2x2 matrix `[[a, b], [b, c]]`.
#[derive(Clone, Copy, Debug, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct SymMatrix2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl SymMatrix2 {
    pub const fn new(a: f64, b: f64, c: f64) -> Self {
        SymMatrix2 { a, b, c }
    }

    pub const fn identity() -> Self {
        SymMatrix2::new(1.0, 0.0, 1.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        SymMatrix2::new(self.a * s, self.b * s, self.c * s)
    }

    pub fn trace(&self) -> f64 {
        self.a + self.c
    }

    pub fn det(&self) -> f64 {
        self.a * self.c - self.b * self.b
    }

    pub fn cofactor(&self) -> SymMatrix2 {
        SymMatrix2::new(self.c, -self.b, self.a)
    }

    /// `sum_ij a_ij b_ij`.
    pub fn frobenius_dot(&self, o: &SymMatrix2) -> f64 {
        self.a * o.a + 2.0 * self.b * o.b + self.c * o.c
    }

    pub fn quad(&self, v: [f64; 2]) -> f64 {
        self.a * v[0] * v[0] + 2.0 * self.b * v[0] * v[1] + self.c * v[1] * v[1]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_dot(self).sqrt()
    }

    /// Ascending eigenvalues with unit eigenvectors.
    pub fn eigen(&self) -> ([f64; 2], [[f64; 2]; 2]) {
        let m = 0.5 * (self.a + self.c);
        let d = 0.5 * (self.a - self.c);
        let r = d.hypot(self.b);
        let angle = 0.5 * self.b.atan2(d);
        let angle = if r == 0.0 { 0.0 } else { angle };
        let (s, c) = angle.sin_cos();
        // (c, s) belongs to the larger eigenvalue
        ([m - r, m + r], [[-s, c], [c, s]])
    }

    pub fn eigenvalues(&self) -> [f64; 2] {
        self.eigen().0
    }

    pub fn spectral_norm(&self) -> f64 {
        let [l0, l1] = self.eigenvalues();
        l0.abs().max(l1.abs())
    }

    /// `[[e1.A.e1, e1.A.e2], [.., e2.A.e2]]`.
    pub fn restrict(m: &Matrix3<f64>, frame: &TangentFrame) -> SymMatrix2 {
        let a = frame.e1.dot(&(m * frame.e1));
        let b1 = frame.e1.dot(&(m * frame.e2));
        let b2 = frame.e2.dot(&(m * frame.e1));
        let c = frame.e2.dot(&(m * frame.e2));
        SymMatrix2::new(a, 0.5 * (b1 + b2), c)
    }
}

impl std::ops::Add for SymMatrix2 {
    type Output = SymMatrix2;
    fn add(self, o: SymMatrix2) -> SymMatrix2 {
        SymMatrix2::new(self.a + o.a, self.b + o.b, self.c + o.c)
    }
}

impl std::ops::Sub for SymMatrix2 {
    type Output = SymMatrix2;
    fn sub(self, o: SymMatrix2) -> SymMatrix2 {
        SymMatrix2::new(self.a - o.a, self.b - o.b, self.c - o.c)
    }
}

/// Cofactor matrix: `C[[a, b], [b, c]] = [[c, -b], [-b, a]]`.
pub fn cofactor(a: &SymMatrix2) -> SymMatrix2 {
    a.cofactor()
}

/// `|det A - 1/2 sum_ij c_ij[A] a_ij|`.
pub fn trace_det_identity_check(a: &SymMatrix2) -> f64 {
    (a.det() - 0.5 * a.cofactor().frobenius_dot(a)).abs()
}

/// `Q(f, u)` in a given frame, with its ascending eigenvalues.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QSample {
    pub point: Vec3,
    pub q: SymMatrix2,
    pub frame: TangentFrame,
    pub eigenvalues: [f64; 2],
}

impl QSample {
    pub fn from_jet(jet: &Jet, frame: &TangentFrame) -> QSample {
        let q = SymMatrix2::restrict(&jet.hessian, frame);
        QSample {
            point: frame.base,
            q,
            frame: *frame,
            eigenvalues: q.eigenvalues(),
        }
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Unit eigenvector of the smallest eigenvalue, in frame components.
    pub fn min_eigvec(&self) -> [f64; 2] {
        self.q.eigen().1[0]
    }
}

pub fn q_matrix(f: &SphericalFunction, u: &Vec3, frame: &TangentFrame) -> Result<QSample> {
    check_unit(u)?;
    if (frame.base - u).norm() > 1e-12 {
        return Err(Error::FrameMismatch {
            frame: arr(&frame.base),
            point: arr(u),
        });
    }
    Ok(QSample::from_jet(&jet(f, u)?, frame))
}

/// Max over the spectrum of `|eig(D^2 H) - (eig(Q) U {0})|`, relative to `1 + |D^2 H|`.
pub fn eigenvalue_correspondence_mismatch(f: &SphericalFunction, u: &Vec3) -> Result<f64> {
    let j = jet(f, u)?;
    let frame = frame_about(u);
    let qs = QSample::from_jet(&j, &frame);
    let mut full: Vec<f64> = SymmetricEigen::new(j.hessian)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    full.sort_by(f64::total_cmp);
    let mut expect = vec![qs.eigenvalues[0], qs.eigenvalues[1], 0.0];
    expect.sort_by(f64::total_cmp);
    let norm = j.hessian.norm();
    let worst = full
        .iter()
        .zip(&expect)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(worst / (1.0 + norm))
}

/// Per-node geometric data of one function: `Q` and the tangential gradient.
#[derive(Clone, Copy, Debug)]
pub(crate) struct NodeData {
    pub value: f64,
    pub q: SymMatrix2,
    pub grad: [f64; 2],
}

pub(crate) fn node_data(f: &SphericalFunction, quad: &Quadrature) -> Result<Vec<NodeData>> {
    quad.try_map(|u| {
        let j = jet(f, u)?;
        let frame = frame_about(u);
        Ok(NodeData {
            value: f.eval_checked(u)?,
            q: SymMatrix2::restrict(&j.hessian, &frame),
            grad: frame.components(&j.gradient),
        })
    })
}

fn require_smooth(fs: &[&SphericalFunction]) -> Result<()> {
    for f in fs {
        if f.smoothness() < Smoothness::C2 {
            return Err(Error::SmoothnessRequired(f.label().to_string()));
        }
    }
    Ok(())
}

/// Test functions for the weak form of the divergence-free property of `C[Q(h)]`.
pub fn cheng_yau_battery() -> Vec<SphericalFunction> {
    use crate::function::builtin::{linear, polynomial};
    use crate::function::Monomial;
    let m = |coef, powers| Monomial { coef, powers };
    vec![
        linear(Vec3::new(1.0, -0.5, 0.25)),
        polynomial(vec![m(1.0, [0, 1, 1])]),
        polynomial(vec![m(1.0, [2, 0, 0]), m(-1.0, [0, 0, 2])]),
        polynomial(vec![m(1.0, [1, 1, 1]), m(0.5, [0, 0, 1])]),
        polynomial(vec![
            m(1.0, [4, 0, 0]),
            m(-0.3, [1, 2, 0]),
            m(0.2, [0, 0, 0]),
        ]),
    ]
}

/// Weak divergence residual of the rows of `C[Q(h)]`: the maximum over the test battery of
/// `|int sum_ij c_ij[Q(h)] psi_ij|`, which vanishes iff `sum_j (c_ij)_j` integrates to zero
/// against every second derivative.
pub fn cheng_yau_residual(h: &SphericalFunction, grid: &SphereGrid) -> Result<f64> {
    require_smooth(&[h])?;
    let quad = grid.quadrature();
    let hd = node_data(h, quad)?;
    let mut worst: f64 = 0.0;
    for psi in cheng_yau_battery() {
        let pd = node_data(&psi, quad)?;
        let vals: Vec<f64> = hd
            .iter()
            .zip(&pd)
            .map(|(h, p)| {
                let psi_ij = p.q - SymMatrix2::identity().scaled(p.value);
                h.q.cofactor().frobenius_dot(&psi_ij)
            })
            .collect();
        worst = worst.max(quad.dot(&vals).abs());
    }
    Ok(worst)
}

/// The three integration-by-parts expressions
/// `(int psi sum phi_ij c_ij, -int sum phi_j psi_i c_ij, int phi sum psi_ij c_ij)`
/// with `c = C[Q(h)]`.
pub fn parts_expressions(
    h: &SphericalFunction,
    psi: &SphericalFunction,
    phi: &SphericalFunction,
    quad: &Quadrature,
) -> Result<[f64; 3]> {
    require_smooth(&[h, psi, phi])?;
    let hd = node_data(h, quad)?;
    let sd = node_data(psi, quad)?;
    let pd = node_data(phi, quad)?;
    let id = SymMatrix2::identity();
    let mut e = [vec![], vec![], vec![]];
    for ((h, s), p) in hd.iter().zip(&sd).zip(&pd) {
        let c = h.q.cofactor();
        let phi_ij = p.q - id.scaled(p.value);
        let psi_ij = s.q - id.scaled(s.value);
        e[0].push(s.value * c.frobenius_dot(&phi_ij));
        let mixed = c.a * p.grad[0] * s.grad[0]
            + c.b * (p.grad[1] * s.grad[0] + p.grad[0] * s.grad[1])
            + c.c * p.grad[1] * s.grad[1];
        e[1].push(-mixed);
        e[2].push(p.value * c.frobenius_dot(&psi_ij));
    }
    Ok([quad.dot(&e[0]), quad.dot(&e[1]), quad.dot(&e[2])])
}

/// `(|E1 - E2|, |E1 - E3|)` for the expressions of [`parts_expressions`].
pub fn parts_identity_residual(
    h: &SphericalFunction,
    psi: &SphericalFunction,
    phi: &SphericalFunction,
    grid: &SphereGrid,
) -> Result<(f64, f64)> {
    let [e1, e2, e3] = parts_expressions(h, psi, phi, grid.quadrature())?;
    Ok(((e1 - e2).abs(), (e1 - e3).abs()))
}

/// Both sides of `2 int f det Q(phi) = int phi^2 tr Q(f) - int sum c_ij[Q(f)] phi_i phi_j`.
pub fn second_variation_sides(
    f: &SphericalFunction,
    phi: &SphericalFunction,
    quad: &Quadrature,
) -> Result<(f64, f64)> {
    require_smooth(&[f, phi])?;
    let fd = node_data(f, quad)?;
    let pd = node_data(phi, quad)?;
    let lhs: Vec<f64> = fd
        .iter()
        .zip(&pd)
        .map(|(f, p)| 2.0 * f.value * p.q.det())
        .collect();
    let rhs: Vec<f64> = fd
        .iter()
        .zip(&pd)
        .map(|(f, p)| p.value * p.value * f.q.trace() - f.q.cofactor().quad(p.grad))
        .collect();
    Ok((quad.dot(&lhs), quad.dot(&rhs)))
}

pub fn second_variation_identity_residual(
    f: &SphericalFunction,
    phi: &SphericalFunction,
    grid: &SphereGrid,
) -> Result<f64> {
    let (l, r) = second_variation_sides(f, phi, grid.quadrature())?;
    Ok((l - r).abs())
}

/// `max |det Q(f_rho, x) - det Q(f, rho^{-1} x)|` and the same for the trace, over `points`.
pub fn rotation_equivariance_residual(
    f: &SphericalFunction,
    rho: &Matrix3<f64>,
    points: &[Vec3],
) -> Result<f64> {
    let g = crate::function::rotate_function(f, rho)?;
    let inv = rho.transpose();
    let mut worst: f64 = 0.0;
    for x in points {
        let a = q_matrix(&g, x, &frame_about(x))?;
        let y = inv * x;
        let b = q_matrix(f, &y, &frame_about(&y))?;
        worst = worst
            .max((a.q.det() - b.q.det()).abs())
            .max((a.q.trace() - b.q.trace()).abs());
    }
    Ok(worst)
}

/// Residual threshold of every identity in [`identity_battery`].
pub const IDENTITY_THRESHOLD: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct IdentityRow {
    pub identity: &'static str,
    pub function: String,
    pub grid_level: u32,
    pub residual: f64,
    pub threshold: f64,
}

impl IdentityRow {
    pub fn passed(&self) -> bool {
        self.residual.is_finite() && self.residual < self.threshold
    }
}

/// Runs the Cheng-Yau, integration-by-parts, second-variation and rotation-equivariance
/// residuals for every smooth builtin on the product grid of the given level.
pub fn identity_battery(level: u32) -> Result<Vec<IdentityRow>> {
    use crate::function::builtin;
    let grid = crate::sphere_grid::build_grid(level);
    let tests = cheng_yau_battery();
    let (psi, phi) = (&tests[1], &tests[3]);
    let rho = nalgebra::Rotation3::from_euler_angles(0.4, -1.1, 2.3).into_inner();
    let points: Vec<Vec3> = grid.nodes().iter().step_by(7).copied().collect();
    let mut rows = vec![];
    for (name, spec) in builtin::support_family()
        .into_iter()
        .chain(builtin::non_support_family())
    {
        let h = spec.build()?;
        let (p1, p2) = parts_identity_residual(&h, psi, phi, &grid)?;
        let residuals = [
            ("cheng_yau", cheng_yau_residual(&h, &grid)?),
            ("parts_gradient", p1),
            ("parts_symmetric", p2),
            (
                "second_variation",
                second_variation_identity_residual(&h, phi, &grid)?,
            ),
            (
                "rotation_equivariance",
                rotation_equivariance_residual(&h, &rho, &points)?,
            ),
        ];
        for (identity, residual) in residuals {
            rows.push(IdentityRow {
                identity,
                function: name.to_string(),
                grid_level: level,
                residual,
                threshold: IDENTITY_THRESHOLD,
            });
        }
    }
    Ok(rows)
}
