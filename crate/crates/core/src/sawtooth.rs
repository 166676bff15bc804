//! Localized sawtooth perturbations.
//!
//! In chart coordinates `x1 = (d, u)`, `x2 = (e, u)` around a center `u0` (with `e = u0 x d`),
//!
//! ```text
//! Phi(x1, x2) = g_eps(x1) * G(x1 / r) * G(x2 / r)
//! ```
//!
//! where `g_eps` is the triangle wave `eps * (1 - |t|)` extended with period `2 eps` (peak `eps`
//! at the origin) and `G` is the plateau cutoff: `1` on `[-1/2, 1/2]`, `2 - 2|t|` on
//! `1/2 <= |t| <= 1`, `0` beyond. The function on the sphere is `Phi` of the chart
//! coordinates on the hemisphere `(u0, u) > 0`, zero elsewhere.
//!
//! Both 1-D factors are sums of `|x - x_k|` terms. The smoothed variant replaces each such term
//! by its convolution with the biweight kernel of half-width `delta` (default `eps / 8`), which is
//! C^2 with a closed form, so the homogeneous-extension jet is exact.

use std::sync::Arc;

use nalgebra::{Matrix2, Matrix3, Vector2};

use crate::error::{arr, Error, Result};
use crate::function::{FunctionSpec, Jet, Smoothness, SphericalFunction, SupportInfo};
use crate::sphere_grid::{gauss_interval, tangent_basis, Quadrature, Vec3};

/// `(value, first, second)` derivative triple of a 1-D function.
type D2 = (f64, f64, f64);

/// `|t|`, or its convolution with the biweight kernel of half-width `delta` inside the window.
fn smooth_abs(t: f64, delta: f64) -> D2 {
    if delta == 0.0 || t.abs() >= delta {
        return (t.abs(), t.signum(), 0.0);
    }
    let s = t / delta;
    let s2 = s * s;
    let v = delta * (5.0 / 16.0 + 15.0 / 8.0 * (s2 / 2.0 - s2 * s2 / 6.0 + s2 * s2 * s2 / 30.0));
    let d1 = 15.0 / 8.0 * (s - 2.0 * s * s2 / 3.0 + s * s2 * s2 / 5.0);
    let d2 = 15.0 / (8.0 * delta) * (1.0 - s2) * (1.0 - s2);
    (v, d1, d2)
}

#[derive(Clone, Debug)]
struct Profile {
    eps: f64,
    r: f64,
    delta: f64,
}

impl Profile {
    /// Near the kink `j eps` the wave is `eps - |x - j eps|` (even `j`) or `|x - j eps|` (odd `j`).
    fn wave(&self, x: f64) -> D2 {
        let j = (x / self.eps).round();
        let (a, a1, a2) = smooth_abs(x - j * self.eps, self.delta);
        if (j as i64).rem_euclid(2) == 0 {
            (self.eps - a, -a1, -a2)
        } else {
            (a, a1, a2)
        }
    }

    /// `G(x / r) = sum_k c_k |x - x_k|` with kinks at `-r, -r/2, r/2, r`.
    fn cutoff(&self, x: f64) -> D2 {
        let r = self.r;
        let mut out = (0.0, 0.0, 0.0);
        for (xk, c) in [(-r, 1.0), (-r / 2.0, -1.0), (r / 2.0, -1.0), (r, 1.0)] {
            let (v, d1, d2) = smooth_abs(x - xk, self.delta);
            out.0 += c / r * v;
            out.1 += c / r * d1;
            out.2 += c / r * d2;
        }
        out
    }

    /// Half-width of the chart square containing the support.
    fn reach(&self) -> f64 {
        self.r + self.delta
    }

    /// `Phi`, its gradient and Hessian in chart coordinates.
    fn chart_jet(&self, x1: f64, x2: f64) -> (f64, Vector2<f64>, Matrix2<f64>) {
        let reach = self.reach();
        if x1.abs() >= reach || x2.abs() >= reach {
            return (0.0, Vector2::zeros(), Matrix2::zeros());
        }
        let (g, g1, g2) = self.wave(x1);
        let (ga, ga1, ga2) = self.cutoff(x1);
        let (b, b1, b2) = self.cutoff(x2);
        let a = g * ga;
        let a1 = g1 * ga + g * ga1;
        let a2 = g2 * ga + 2.0 * g1 * ga1 + g * ga2;
        (
            a * b,
            Vector2::new(a1 * b, a * b1),
            Matrix2::new(a2 * b, a1 * b1, a1 * b1, a * b2),
        )
    }

    fn breakpoints(&self, with_wave: bool) -> Vec<f64> {
        let reach = self.reach();
        let mut pts = vec![-reach, reach];
        let mut kinks = vec![-self.r, -self.r / 2.0, self.r / 2.0, self.r];
        if with_wave {
            let kmax = (reach / self.eps).ceil() as i64;
            kinks.extend((-kmax..=kmax).map(|k| k as f64 * self.eps));
        }
        for k in kinks {
            if self.delta > 0.0 {
                pts.push(k - self.delta);
                pts.push(k + self.delta);
            } else {
                pts.push(k);
            }
        }
        pts.retain(|p| p.abs() <= reach);
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        pts
    }
}

/// Gauss rule with `n` points per piece, `n_window` on smoothing windows (pieces of length at
/// most `2 delta`), where coinciding wave and cutoff windows give high-degree integrands.
fn composite_gauss(breaks: &[f64], n: usize, n_window: usize, delta: f64) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    for w in breaks.windows(2) {
        let is_window = delta > 0.0 && w[1] - w[0] <= 2.0 * delta * (1.0 + 1e-9);
        let (x, wt) = gauss_interval(if is_window { n_window } else { n }, w[0], w[1]);
        xs.extend(x);
        ws.extend(wt);
    }
    (xs, ws)
}

/// Sawtooth test perturbation centred at `u0` with its teeth across `direction`.
#[derive(Clone, Debug)]
pub struct Sawtooth {
    center: Vec3,
    d: Vec3,
    e: Vec3,
    eps: f64,
    r: f64,
    delta: f64,
}

impl Sawtooth {
    /// `direction` is a tangent vector at `center` (its normal component is discarded).
    pub fn new(center: Vec3, direction: Vec3, eps: f64, r: f64) -> Result<Sawtooth> {
        let n = center.norm();
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::NotUnit { norm: n });
        }
        if !(r > 0.0 && r <= 0.5) {
            return Err(Error::InvalidParameter(format!(
                "chart half-width r = {r} out of range (0, 0.5]"
            )));
        }
        if !(eps > 0.0 && eps <= r / 4.0) {
            return Err(Error::InvalidParameter(format!(
                "tooth width eps = {eps} must lie in (0, r/4]"
            )));
        }
        let d = direction - center * center.dot(&direction);
        if d.norm() < 1e-12 {
            return Err(Error::InvalidParameter("direction is not tangent".into()));
        }
        let d = d.normalize();
        let e = center.cross(&d);
        Ok(Sawtooth {
            center,
            d,
            e,
            eps,
            r,
            delta: eps / 8.0,
        })
    }

    /// Same sawtooth with smoothing half-width `delta` in `(0, eps / 4]` (default `eps / 8`).
    pub fn with_delta(mut self, delta: f64) -> Result<Sawtooth> {
        if !(delta > 0.0 && delta <= self.eps / 4.0) {
            return Err(Error::InvalidParameter(format!(
                "smoothing half-width {delta} must lie in (0, eps/4]"
            )));
        }
        self.delta = delta;
        Ok(self)
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn direction(&self) -> Vec3 {
        self.d
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Smoothing half-width used by [`Sawtooth::smoothed`].
    pub fn delta(&self) -> f64 {
        self.delta
    }

    fn profile(&self, smooth: bool) -> Profile {
        Profile {
            eps: self.eps,
            r: self.r,
            delta: if smooth { self.delta() } else { 0.0 },
        }
    }

    /// Rows `d, e, u0`: world coordinates to chart-aligned coordinates.
    fn rotation(&self) -> Matrix3<f64> {
        Matrix3::from_rows(&[
            self.d.transpose(),
            self.e.transpose(),
            self.center.transpose(),
        ])
    }

    /// Angular radius of a cap around the center that contains the support.
    pub fn support_radius(&self, smooth: bool) -> f64 {
        let reach = self.profile(smooth).reach();
        (reach * 2f64.sqrt()).min(1.0).asin()
    }

    fn spec(&self, smoothed: bool) -> FunctionSpec {
        FunctionSpec::Sawtooth {
            center: arr(&self.center),
            direction: arr(&self.d),
            eps: self.eps,
            r: self.r,
            smoothed,
            delta: (smoothed && self.delta != self.eps / 8.0).then_some(self.delta),
        }
    }

    fn support_info(&self, smooth: bool) -> SupportInfo {
        let saw = self.clone();
        SupportInfo::new(self.center, self.support_radius(smooth), move |level| {
            saw.chart_quadrature(level, smooth)
        })
    }

    /// The Lipschitz sawtooth itself (value `eps` at the center).
    pub fn lipschitz(&self) -> SphericalFunction {
        let p = self.profile(false);
        let rot = self.rotation();
        SphericalFunction::new("sawtooth", Smoothness::C0, move |u| {
            let y = rot * u;
            if y.z <= 0.0 {
                return 0.0;
            }
            p.chart_jet(y.x, y.y).0
        })
        .with_spec(self.spec(false))
        .with_support(self.support_info(false))
    }

    /// The C^2 smoothing at scale [`Sawtooth::delta`], with a closed-form jet.
    pub fn smoothed(&self) -> SphericalFunction {
        let p = Arc::new(self.profile(true));
        let rot = self.rotation();
        let pe = p.clone();
        SphericalFunction::new("sawtooth-smoothed", Smoothness::C2, move |u| {
            let y = rot * u;
            if y.z <= 0.0 {
                return 0.0;
            }
            pe.chart_jet(y.x, y.y).0
        })
        .with_jet(move |u| rot_jet(&p, &rot, u))
        .with_spec(self.spec(true))
        .with_support(self.support_info(true))
    }

    /// Euclidean gradient of the homogeneous extension of the Lipschitz sawtooth, defined
    /// away from the kinks.
    pub fn lipschitz_gradient(&self, u: &Vec3) -> Vec3 {
        rot_jet(&self.profile(false), &self.rotation(), u).gradient
    }

    /// Product Gauss rule over the lifted chart square, split at every kink (or every
    /// smoothing window) so each piece has a polynomial-times-smooth integrand.
    pub fn chart_quadrature(&self, level: u32, smooth: bool) -> Quadrature {
        let p = self.profile(smooth);
        let n1 = 4 + level as usize;
        let n2 = 6 + 2 * level as usize;
        let nw = 14 + level as usize;
        let (x1s, w1s) = composite_gauss(&p.breakpoints(true), n1, nw, p.delta);
        let (x2s, w2s) = composite_gauss(&p.breakpoints(false), n2, nw, p.delta);
        let mut q = Quadrature::default();
        for (x1, w1) in x1s.iter().zip(&w1s) {
            for (x2, w2) in x2s.iter().zip(&w2s) {
                let u3 = (1.0 - x1 * x1 - x2 * x2).sqrt();
                q.nodes.push(self.d * *x1 + self.e * *x2 + self.center * u3);
                q.weights.push(w1 * w2 / u3);
            }
        }
        q
    }

    /// Chart coordinates of `u`, or `None` outside the hemisphere around the center.
    pub fn chart(&self, u: &Vec3) -> Option<[f64; 2]> {
        (self.center.dot(u) > 0.0).then(|| [self.d.dot(u), self.e.dot(u)])
    }
}

/// Jet of `H(x) = |x| Phi(x1/|x|, x2/|x|)` at a unit vector, in world coordinates.
fn rot_jet(p: &Profile, rot: &Matrix3<f64>, u: &Vec3) -> Jet {
    let y = rot * u;
    let zero = Jet {
        value: 0.0,
        gradient: Vec3::zeros(),
        hessian: Matrix3::zeros(),
    };
    if y.z <= 0.0 {
        return zero;
    }
    let (phi, g, h) = p.chart_jet(y.x, y.y);
    if phi == 0.0 && g == Vector2::zeros() && h == Matrix2::zeros() {
        return zero;
    }
    let v = [y.x, y.y];
    let a = phi - v[0] * g[0] - v[1] * g[1];
    let mut grad = Vec3::zeros();
    for k in 0..3 {
        grad[k] = y[k] * a + if k < 2 { g[k] } else { 0.0 };
    }
    // lam[a][l] = d v_a / d y_l at |y| = 1
    let lam = |ai: usize, l: usize| (if ai == l { 1.0 } else { 0.0 }) - v[ai] * y[l];
    let mut hess = Matrix3::zeros();
    for k in 0..3 {
        for l in 0..3 {
            let delta = if k == l { 1.0 } else { 0.0 };
            let mut val = (delta - y[k] * y[l]) * a;
            for ai in 0..2 {
                let vb_phi: f64 = (0..2).map(|b| v[b] * h[(ai, b)]).sum();
                val -= y[k] * vb_phi * lam(ai, l);
                if k < 2 {
                    val += h[(k, ai)] * lam(ai, l);
                }
            }
            hess[(k, l)] = val;
        }
    }
    let hess = (hess + hess.transpose()) * 0.5;
    let rt = rot.transpose();
    Jet {
        value: phi,
        gradient: rt * grad,
        hessian: rt * hess * rot,
    }
}

/// Lipschitz sawtooth at `u0`, teeth across the tangent direction with components
/// `direction` in [`tangent_basis`]`(u0)`.
pub fn build_sawtooth_test(
    u0: &Vec3,
    direction: [f64; 2],
    eps: f64,
    r: f64,
) -> Result<SphericalFunction> {
    let frame = tangent_basis(u0)?;
    Ok(Sawtooth::new(*u0, frame.tangent(direction), eps, r)?.lipschitz())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn saw() -> Sawtooth {
        let c = Vec3::new(0.2, -0.3, 0.9).normalize();
        Sawtooth::new(c, Vec3::new(1.0, 0.0, 0.0), 0.2 / 16.0, 0.2).unwrap()
    }

    #[test]
    fn value_at_center_is_eps() {
        let f = build_sawtooth_test(&Vec3::z(), [1.0, 0.0], 0.01, 0.1).unwrap();
        assert!((f.eval(&Vec3::z()) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn parameter_guards() {
        assert!(Sawtooth::new(Vec3::z(), Vec3::x(), 0.01, 0.6).is_err());
        assert!(Sawtooth::new(Vec3::z(), Vec3::x(), 0.03, 0.1).is_err());
        assert!(Sawtooth::new(Vec3::z(), Vec3::x(), 0.0, 0.1).is_err());
        assert!(Sawtooth::new(Vec3::z(), Vec3::z(), 0.01, 0.1).is_err());
    }

    #[test]
    fn smooth_abs_is_c2_at_window_edges() {
        let d = 0.1;
        for t in [d, -d] {
            let inside = smooth_abs(t * (1.0 - 1e-12), d);
            let outside = smooth_abs(t * (1.0 + 1e-12), d);
            assert!((inside.0 - outside.0).abs() < 1e-12);
            assert!((inside.1 - outside.1).abs() < 1e-10);
            assert!((inside.2 - outside.2).abs() < 1e-9);
        }
        // total second derivative mass of |t| is 2
        let (xs, ws) = gauss_interval(8, -d, d);
        let m: f64 = xs
            .iter()
            .zip(&ws)
            .map(|(x, w)| w * smooth_abs(*x, d).2)
            .sum();
        assert!((m - 2.0).abs() < 1e-12);
    }

    #[test]
    fn smoothed_profile_has_no_kink_centre_artifact() {
        // Gauss midpoints land exactly on kinks; the jet there must be the symmetric one
        let p = Profile {
            eps: 0.0125,
            r: 0.2,
            delta: 0.0125 / 8.0,
        };
        for x in [0.0, 0.1, -0.1, 0.2, 0.0125] {
            let c = p.cutoff(x);
            let l = p.cutoff(x - 1e-9);
            let w = p.wave(x);
            let wl = p.wave(x - 1e-9);
            assert!(
                (c.1 - l.1).abs() < 1e-5 && (w.1 - wl.1).abs() < 1e-5,
                "x = {x}"
            );
        }
    }

    #[test]
    fn analytic_jet_matches_finite_differences() {
        let s = saw();
        let f = s.smoothed();
        let fr = s.rotation().transpose();
        for (x1, x2) in [(0.013, 0.02), (0.051, -0.07), (0.0031, 0.11), (-0.17, 0.15)] {
            let u = (fr * Vec3::new(x1, x2, (1.0f64 - x1 * x1 - x2 * x2).sqrt())).normalize();
            let a = f.analytic_jet(&u).unwrap();
            let fine =
                crate::calculus::fd_jet_mode(&f, &u, 2e-5, crate::calculus::FdMode::Richardson)
                    .unwrap();
            assert!((a.value - fine.value).abs() < 1e-14);
            assert!(
                (a.gradient - fine.gradient).norm() < 1e-7,
                "{} vs {}",
                a.gradient,
                fine.gradient
            );
            let scale = 1.0 + a.hessian.abs().max();
            assert!(
                (a.hessian - fine.hessian).abs().max() < 1e-6 * scale,
                "{} vs {}",
                a.hessian,
                fine.hessian
            );
        }
    }

    #[test]
    fn chart_quadrature_measures_lifted_square() {
        let s = saw();
        let q = s.chart_quadrature(2, false);
        // area of the lifted square {|x1|, |x2| <= r} on the unit sphere
        let r: f64 = 0.2;
        let (xs, ws) = gauss_interval(40, -r, r);
        let mut exact = 0.0;
        for (a, wa) in xs.iter().zip(&ws) {
            for (b, wb) in xs.iter().zip(&ws) {
                exact += wa * wb / (1.0 - a * a - b * b).sqrt();
            }
        }
        assert!((q.total_weight() - exact).abs() < 1e-12);
    }

    #[test]
    fn vanishes_outside_support() {
        let s = saw();
        let f = s.smoothed();
        let g = s.lipschitz();
        for u in [-s.center(), s.center() * 0.5 + s.direction() * 0.866, s.e] {
            let u = u.normalize();
            assert_eq!(f.eval(&u), 0.0);
            assert_eq!(g.eval(&u), 0.0);
        }
    }
}
