//! Planar convex bodies through their support functions `h(phi)` on the unit circle.
//!
//! The first-order area measure of a planar body is `rho(phi) dphi` with the radius of
//! curvature `rho = h + h''`; it is additive under Minkowski addition.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of trapezoid nodes on the circle. The rule is spectrally accurate for
/// smooth periodic integrands.
pub const CIRCLE_NODES: usize = 2048;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlanarBody {
    Disk {
        r: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    Point {
        p: [f64; 2],
    },
    /// Semi-axes `a`, `b`, with the `a` axis at angle `angle`.
    Ellipse {
        a: f64,
        b: f64,
        angle: f64,
    },
    /// `h(phi) = c0 + sum_k (cos_k cos(k phi) + sin_k sin(k phi))` for `k = 1, 2, ...`.
    Fourier {
        c0: f64,
        cos: Vec<f64>,
        sin: Vec<f64>,
    },
    Sum {
        parts: Vec<(f64, PlanarBody)>,
    },
}

impl PlanarBody {
    pub fn support(&self, phi: f64) -> f64 {
        match self {
            PlanarBody::Disk { r, center } => r + center[0] * phi.cos() + center[1] * phi.sin(),
            PlanarBody::Point { p } => p[0] * phi.cos() + p[1] * phi.sin(),
            PlanarBody::Ellipse { a, b, angle } => {
                let (s, c) = (phi - angle).sin_cos();
                (a * a * c * c + b * b * s * s).sqrt()
            }
            PlanarBody::Fourier { c0, cos, sin } => {
                let mut h = *c0;
                for (k, (ck, sk)) in cos.iter().zip(sin).enumerate() {
                    let kf = (k + 1) as f64;
                    h += ck * (kf * phi).cos() + sk * (kf * phi).sin();
                }
                h
            }
            PlanarBody::Sum { parts } => parts.iter().map(|(w, b)| w * b.support(phi)).sum(),
        }
    }

    /// 1-homogeneous extension of the support function to the plane.
    pub fn support_vec(&self, x: [f64; 2]) -> f64 {
        let n = x[0].hypot(x[1]);
        if n == 0.0 {
            0.0
        } else {
            n * self.support(x[1].atan2(x[0]))
        }
    }

    /// Radius of curvature `h + h''` (density of the first area measure per radian).
    pub fn curvature_radius(&self, phi: f64) -> f64 {
        match self {
            PlanarBody::Disk { r, .. } => *r,
            PlanarBody::Point { .. } => 0.0,
            PlanarBody::Ellipse { a, b, .. } => {
                let h = self.support(phi);
                a * a * b * b / (h * h * h)
            }
            PlanarBody::Fourier { c0, cos, sin } => {
                let mut rho = *c0;
                for (k, (ck, sk)) in cos.iter().zip(sin).enumerate() {
                    let kf = (k + 1) as f64;
                    rho += (1.0 - kf * kf) * (ck * (kf * phi).cos() + sk * (kf * phi).sin());
                }
                rho
            }
            PlanarBody::Sum { parts } => {
                parts.iter().map(|(w, b)| w * b.curvature_radius(phi)).sum()
            }
        }
    }

    pub fn perimeter(&self) -> f64 {
        circle_integral(CIRCLE_NODES, |phi| self.curvature_radius(phi))
    }

    pub fn area(&self) -> f64 {
        0.5 * circle_integral(CIRCLE_NODES, |phi| {
            self.support(phi) * self.curvature_radius(phi)
        })
    }

    pub fn is_smooth(&self) -> bool {
        true
    }

    /// Checks parameters, `rho >= 0` on a dense sample, and midpoint convexity of the
    /// homogeneous extension over random segments.
    pub fn validate(&self) -> Result<()> {
        self.check_parameters()?;
        for j in 0..4096 {
            let phi = 2.0 * PI * j as f64 / 4096.0;
            let rho = self.curvature_radius(phi);
            if rho < -1e-10 || !rho.is_finite() {
                return Err(Error::InvalidBody(format!(
                    "negative radius of curvature {rho} at angle {phi}"
                )));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..2000 {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let y = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let m = [(x[0] + y[0]) / 2.0, (x[1] + y[1]) / 2.0];
            let gap = self.support_vec(m) - 0.5 * (self.support_vec(x) + self.support_vec(y));
            if gap > 1e-9 {
                return Err(Error::InvalidBody(format!(
                    "support function not convex on segment {x:?} -> {y:?} (gap {gap:e})"
                )));
            }
        }
        Ok(())
    }

    fn check_parameters(&self) -> Result<()> {
        match self {
            PlanarBody::Disk { r, .. } if !(*r >= 0.0) => {
                Err(Error::InvalidBody(format!("disk radius {r}")))
            }
            PlanarBody::Ellipse { a, b, .. } if !(*a > 0.0 && *b > 0.0) => {
                Err(Error::InvalidBody(format!("ellipse semi-axes {a}, {b}")))
            }
            PlanarBody::Fourier { cos, sin, .. } if cos.len() != sin.len() => Err(
                Error::InvalidBody("Fourier cos/sin coefficient lengths differ".into()),
            ),
            PlanarBody::Sum { parts } => {
                for (w, b) in parts {
                    if !(*w >= 0.0) {
                        return Err(Error::NegativeWeight(*w));
                    }
                    b.check_parameters()?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `sum_i w_i K_i`.
    pub fn minkowski(parts: Vec<(f64, PlanarBody)>) -> Result<PlanarBody> {
        for (w, _) in &parts {
            if !(*w >= 0.0) {
                return Err(Error::NegativeWeight(*w));
            }
        }
        Ok(PlanarBody::Sum { parts })
    }
}

/// Trapezoid rule for a `2 pi`-periodic integrand with `n` equally spaced nodes.
pub fn circle_integral(n: usize, g: impl Fn(f64) -> f64) -> f64 {
    let dphi = 2.0 * PI / n as f64;
    (0..n).map(|j| g(j as f64 * dphi)).sum::<f64>() * dphi
}

/// A continuous function on the unit circle, parametrized by angle.
#[derive(Clone)]
pub struct CircleFunction {
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for CircleFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CircleFunction")
    }
}

impl CircleFunction {
    pub fn new(eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        CircleFunction {
            eval: Arc::new(eval),
        }
    }

    pub fn eval(&self, phi: f64) -> f64 {
        (self.eval)(phi)
    }
}

/// `int f2d dS_1(K, .)` on the circle.
pub fn planar_functional(k: &PlanarBody, f2d: &CircleFunction) -> f64 {
    circle_integral(CIRCLE_NODES, |phi| f2d.eval(phi) * k.curvature_radius(phi))
}

/// `|F(K0 + K1) - F(K0) - F(K1)|` for the planar functional of `f2d`.
pub fn planar_additivity_residual(
    k0: &PlanarBody,
    k1: &PlanarBody,
    f2d: &CircleFunction,
) -> Result<f64> {
    k0.validate()?;
    k1.validate()?;
    let sum = PlanarBody::minkowski(vec![(1.0, k0.clone()), (1.0, k1.clone())])?;
    Ok(
        (planar_functional(&sum, f2d) - planar_functional(k0, f2d) - planar_functional(k1, f2d))
            .abs(),
    )
}

/// Random smooth strictly convex body: an ellipse plus a small Fourier body, translated.
pub fn random_planar_body(rng: &mut impl Rng) -> PlanarBody {
    let a = rng.gen_range(0.5..2.0);
    let b = rng.gen_range(0.5..2.0);
    let ell = PlanarBody::Ellipse {
        a,
        b,
        angle: rng.gen_range(0.0..PI),
    };
    let c0 = rng.gen_range(0.5..1.5);
    let mut cos = vec![rng.gen_range(-1.0..1.0), 0.0, 0.0, 0.0];
    let mut sin = vec![rng.gen_range(-1.0..1.0), 0.0, 0.0, 0.0];
    // keep sum |k^2 - 1| |coef| below c0 so rho stays positive
    for k in 2..=4 {
        let budget = c0 / (3.0 * (k * k - 1) as f64 * 2.0);
        cos[k - 1] = rng.gen_range(-budget..budget);
        sin[k - 1] = rng.gen_range(-budget..budget);
    }
    PlanarBody::Sum {
        parts: vec![
            (1.0, ell),
            (
                rng.gen_range(0.2..1.0),
                PlanarBody::Fourier { c0, cos, sin },
            ),
        ],
    }
}

/// Random continuous function on the circle: a trigonometric polynomial plus a kink.
pub fn random_circle_function(rng: &mut impl Rng) -> CircleFunction {
    let coefs: Vec<(f64, f64)> = (0..6)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let kink_at: f64 = rng.gen_range(0.0..2.0 * PI);
    let kink: f64 = rng.gen_range(-1.0..1.0);
    CircleFunction::new(move |phi| {
        let mut v = kink * (phi - kink_at).sin().abs();
        for (k, (a, b)) in coefs.iter().enumerate() {
            v += a * (k as f64 * phi).cos() + b * (k as f64 * phi).sin();
        }
        v
    })
}
