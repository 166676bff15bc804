//! Convex bodies described through their support functions.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::calculus::{jet, node_data, SymMatrix2};
use crate::error::{arr, Error, Result};
use crate::function::{builtin, v3, FunctionSpec, SphericalFunction};
use crate::planar::PlanarBody;
use crate::sphere_grid::{frame_about, Quadrature, Vec3};

#[derive(Clone, Debug)]
pub enum ConvexBody {
    /// Body of class C^2_+ with support function `h`.
    Smooth(SphericalFunction),
    /// Ball; radius 0 gives the point `center`.
    Ball { r: f64, center: Vec3 },
    /// Convex hull of the origin and the spherical cap of angular radius `theta` around `p`.
    Cone { p: Vec3, theta: f64 },
    /// Right cylinder with base `base` (in the plane orthogonal to `axis`, coordinates in the
    /// frame [`frame_about`]`(axis)`) and height `lambda` along `axis`.
    Cylinder {
        base: PlanarBody,
        lambda: f64,
        axis: Vec3,
    },
    /// Minkowski combination `sum w_i K_i`.
    Combo(Vec<(f64, ConvexBody)>),
    /// Support function `h_base + s phi`; a convex body as long as `|s|` is within the range
    /// returned by [`perturbation_epsilon`].
    Perturbed {
        base: Box<ConvexBody>,
        phi: SphericalFunction,
        s: f64,
    },
}

pub fn cone_support(p: &Vec3, theta: f64, u: &Vec3) -> f64 {
    let psi = p.dot(u).clamp(-1.0, 1.0).acos();
    if psi <= theta {
        1.0
    } else if psi < theta + FRAC_PI_2 {
        (psi - theta).cos()
    } else {
        0.0
    }
}

impl ConvexBody {
    pub fn ball(r: f64) -> ConvexBody {
        ConvexBody::Ball {
            r,
            center: Vec3::zeros(),
        }
    }

    pub fn point(x: Vec3) -> ConvexBody {
        ConvexBody::Ball { r: 0.0, center: x }
    }

    pub fn cone(p: Vec3, theta: f64) -> Result<ConvexBody> {
        let b = ConvexBody::Cone { p, theta };
        b.validate()?;
        Ok(b)
    }

    pub fn support(&self, u: &Vec3) -> f64 {
        match self {
            ConvexBody::Smooth(h) => h.eval(u),
            ConvexBody::Ball { r, center } => r + center.dot(u),
            ConvexBody::Cone { p, theta } => cone_support(p, *theta, u),
            ConvexBody::Cylinder { base, lambda, axis } => {
                let frame = frame_about(axis);
                let x = [frame.e1.dot(u), frame.e2.dot(u)];
                base.support_vec(x) + lambda * axis.dot(u).max(0.0)
            }
            ConvexBody::Combo(parts) => parts.iter().map(|(w, b)| w * b.support(u)).sum(),
            ConvexBody::Perturbed { base, phi, s } => base.support(u) + s * phi.eval(u),
        }
    }

    /// The support function as a [`SphericalFunction`] (smoothness taken from the body).
    pub fn support_function(&self) -> SphericalFunction {
        if let ConvexBody::Smooth(h) = self {
            return h.clone();
        }
        let body = self.clone();
        let smoothness = if self.is_smooth() {
            crate::function::Smoothness::C2
        } else {
            crate::function::Smoothness::C0
        };
        SphericalFunction::new("support", smoothness, move |u| body.support(u))
    }

    /// True when the support function is C^2 (no cone or cylinder parts).
    pub fn is_smooth(&self) -> bool {
        match self {
            ConvexBody::Smooth(_) | ConvexBody::Ball { .. } => true,
            ConvexBody::Cone { .. } | ConvexBody::Cylinder { .. } => false,
            ConvexBody::Combo(parts) => parts.iter().all(|(w, b)| *w == 0.0 || b.is_smooth()),
            ConvexBody::Perturbed { base, .. } => base.is_smooth(),
        }
    }

    /// Structural checks (parameters, weights). Positive definiteness of smooth bodies is
    /// checked where a grid is available, in [`crate::measure::area_measure`].
    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexBody::Smooth(_) => Ok(()),
            ConvexBody::Ball { r, center } => {
                if !(*r >= 0.0 && r.is_finite()) || !center.iter().all(|c| c.is_finite()) {
                    return Err(Error::InvalidBody(format!("ball radius {r}")));
                }
                Ok(())
            }
            ConvexBody::Cone { p, theta } => {
                if (p.norm() - 1.0).abs() > 1e-9 {
                    return Err(Error::NotUnit { norm: p.norm() });
                }
                if !(*theta > 0.0 && *theta < FRAC_PI_2) {
                    return Err(Error::InvalidBody(format!(
                        "cone aperture {theta} outside (0, pi/2)"
                    )));
                }
                Ok(())
            }
            ConvexBody::Cylinder { base, lambda, axis } => {
                if (axis.norm() - 1.0).abs() > 1e-9 {
                    return Err(Error::NotUnit { norm: axis.norm() });
                }
                if !(*lambda > 0.0 && lambda.is_finite()) {
                    return Err(Error::InvalidBody(format!("cylinder height {lambda}")));
                }
                base.validate()
            }
            ConvexBody::Combo(parts) => {
                if parts.is_empty() {
                    return Err(Error::InvalidBody("empty Minkowski combination".into()));
                }
                for (w, b) in parts {
                    if !(*w >= 0.0 && w.is_finite()) {
                        return Err(Error::NegativeWeight(*w));
                    }
                    b.validate()?;
                }
                Ok(())
            }
            ConvexBody::Perturbed { base, s, .. } => {
                if !s.is_finite() {
                    return Err(Error::InvalidBody(format!("perturbation size {s}")));
                }
                base.validate()
            }
        }
    }

    /// `K + v`.
    pub fn translated(&self, v: Vec3) -> ConvexBody {
        ConvexBody::Combo(vec![(1.0, self.clone()), (1.0, ConvexBody::point(v))])
    }

    /// `s K`.
    pub fn scaled(&self, s: f64) -> ConvexBody {
        ConvexBody::Combo(vec![(s, self.clone())])
    }

    pub fn to_spec(&self) -> Option<BodySpec> {
        Some(match self {
            ConvexBody::Smooth(h) => BodySpec::Smooth {
                h: h.spec()?.clone(),
            },
            ConvexBody::Ball { r, center } => BodySpec::Ball {
                r: *r,
                center: arr(center),
            },
            ConvexBody::Cone { p, theta } => BodySpec::Cone {
                p: arr(p),
                theta: *theta,
            },
            ConvexBody::Cylinder { base, lambda, axis } => BodySpec::Cylinder {
                base: base.clone(),
                lambda: *lambda,
                axis: arr(axis),
            },
            ConvexBody::Combo(parts) => BodySpec::Combo {
                parts: parts
                    .iter()
                    .map(|(w, b)| b.to_spec().map(|s| (*w, s)))
                    .collect::<Option<Vec<_>>>()?,
            },
            ConvexBody::Perturbed { base, phi, s } => BodySpec::Perturbed {
                base: Box::new(base.to_spec()?),
                phi: phi.spec()?.clone(),
                s: *s,
            },
        })
    }
}

/// `sum_i w_i K_i`; all-smooth inputs collapse to a single smooth body.
pub fn minkowski_combine(parts: &[(f64, ConvexBody)]) -> Result<ConvexBody> {
    if parts.is_empty() {
        return Err(Error::InvalidBody("empty Minkowski combination".into()));
    }
    for (w, _) in parts {
        if !(*w >= 0.0 && w.is_finite()) {
            return Err(Error::NegativeWeight(*w));
        }
    }
    if parts
        .iter()
        .all(|(_, b)| matches!(b, ConvexBody::Smooth(_)))
    {
        let terms: Vec<(f64, SphericalFunction)> = parts
            .iter()
            .map(|(w, b)| match b {
                ConvexBody::Smooth(h) => (*w, h.clone()),
                _ => unreachable!(),
            })
            .collect();
        return Ok(ConvexBody::Smooth(SphericalFunction::linear_combination(
            &terms,
        )));
    }
    Ok(ConvexBody::Combo(parts.to_vec()))
}

/// A Minkowski combination with weights multiplied out and identical cones merged.
#[derive(Clone, Debug, Default)]
pub struct Flattened {
    pub cones: Vec<(f64, Vec3, f64)>,
    /// Total radius of all balls (centers only translate the body).
    pub ball: f64,
    pub translation: Vec3,
    pub smooth: Vec<(f64, SphericalFunction)>,
    pub cylinders: Vec<(f64, PlanarBody, f64, Vec3)>,
    /// `(s, phi)`: terms `s phi` added to the support function.
    pub perturbations: Vec<(f64, SphericalFunction)>,
}

impl Flattened {
    fn push(&mut self, w: f64, body: &ConvexBody) {
        if w == 0.0 {
            return;
        }
        match body {
            ConvexBody::Smooth(h) => self.smooth.push((w, h.clone())),
            ConvexBody::Ball { r, center } => {
                self.ball += w * r;
                self.translation += center * w;
            }
            ConvexBody::Cone { p, theta } => {
                match self.cones.iter_mut().find(|c| c.1 == *p && c.2 == *theta) {
                    Some(c) => c.0 += w,
                    None => self.cones.push((w, *p, *theta)),
                }
            }
            ConvexBody::Cylinder { base, lambda, axis } => {
                self.cylinders.push((w, base.clone(), *lambda, *axis))
            }
            ConvexBody::Combo(parts) => {
                for (v, b) in parts {
                    self.push(w * v, b);
                }
            }
            ConvexBody::Perturbed { base, phi, s } => {
                self.push(w, base);
                self.perturbations.push((w * s, phi.clone()));
            }
        }
    }

    /// Perturbations with known compact support, and the rest.
    pub fn split_perturbations(
        &self,
    ) -> (Vec<(f64, SphericalFunction)>, Vec<(f64, SphericalFunction)>) {
        self.perturbations
            .iter()
            .cloned()
            .partition(|(_, phi)| phi.support().is_some())
    }
}

pub fn flatten(body: &ConvexBody) -> Flattened {
    let mut out = Flattened::default();
    out.push(1.0, body);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationRange {
    Bounded(f64),
    /// `Q(phi)` vanishes on the grid: every `h + s phi` is admissible.
    Unbounded,
}

impl PerturbationRange {
    pub fn value(&self) -> Option<f64> {
        match self {
            PerturbationRange::Bounded(e) => Some(*e),
            PerturbationRange::Unbounded => None,
        }
    }
}

/// Below this spectral norm `Q(phi)` counts as identically zero (finite-difference noise).
pub const Q_ZERO_TOLERANCE: f64 = 1e-7;

/// `eps = gamma / M` with `gamma = min lambda_min(Q(h))` and `M = max |Q(phi)|` over the
/// nodes of `quad` where `Q(phi)` does not vanish, so `Q(h) + s Q(phi)` stays positive definite
/// at those nodes for `|s| < eps`.
pub fn perturbation_epsilon(
    h: &SphericalFunction,
    phi: &SphericalFunction,
    quad: &Quadrature,
) -> Result<PerturbationRange> {
    let pd = node_data(phi, quad)?;
    let hd = node_data(h, quad)?;
    perturbation_epsilon_from(
        quad,
        hd.iter().map(|d| d.q),
        pd.iter().map(|d| (d.value, d.q)),
    )
}

pub(crate) fn perturbation_epsilon_from(
    quad: &Quadrature,
    base: impl Iterator<Item = SymMatrix2>,
    phi: impl Iterator<Item = (f64, SymMatrix2)>,
) -> Result<PerturbationRange> {
    let mut gamma = f64::INFINITY;
    let mut m: f64 = 0.0;
    for ((qh, (v, qp)), u) in base.zip(phi).zip(&quad.nodes) {
        let norm = qp.spectral_norm();
        if norm <= Q_ZERO_TOLERANCE && v == 0.0 {
            continue;
        }
        let lh = qh.eigenvalues()[0];
        if lh <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                at: arr(u),
                lambda_min: lh,
            });
        }
        gamma = gamma.min(lh);
        m = m.max(norm);
    }
    if m <= Q_ZERO_TOLERANCE {
        return Ok(PerturbationRange::Unbounded);
    }
    Ok(PerturbationRange::Bounded(gamma / m))
}

/// `Q(h)` of the support function at `u`, for bodies that are C^2 near `u`.
pub(crate) fn local_q(body: &Flattened, u: &Vec3) -> Result<SymMatrix2> {
    let mut q = SymMatrix2::identity().scaled(body.ball);
    for (w, h) in &body.smooth {
        let j = jet(h, u)?;
        q = q + SymMatrix2::restrict(&j.hessian, &frame_about(u)).scaled(*w);
    }
    for (_, p, theta) in &body.cones {
        if p.dot(u) > -theta.sin() - 1e-12 {
            return Err(Error::Unsupported(
                "perturbation overlaps the non-apex part of a cone".into(),
            ));
        }
    }
    if !body.cylinders.is_empty() {
        return Err(Error::Unsupported("perturbation of a cylinder".into()));
    }
    Ok(q)
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConvexityVerdict {
    Convex,
    Nonconvex { x: Vec3, y: Vec3, gap: f64 },
}

impl ConvexityVerdict {
    pub fn is_convex(&self) -> bool {
        matches!(self, ConvexityVerdict::Convex)
    }
}

pub const CONVEXITY_GAP: f64 = 1e-9;

/// Midpoint-convexity test of the homogeneous extension on random segments in the shell
/// `0.5 <= |x| <= 1.5` (lengths log-uniform in `[1e-3, 0.5]`, staying away from the origin).
pub fn support_convexity_oracle(f: &SphericalFunction, samples: usize) -> ConvexityVerdict {
    support_convexity_oracle_seeded(f, samples, 0x0c0ffee)
}

pub fn support_convexity_oracle_seeded(
    f: &SphericalFunction,
    samples: usize,
    seed: u64,
) -> ConvexityVerdict {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: Option<(Vec3, Vec3, f64)> = None;
    let mut drawn = 0;
    while drawn < samples {
        let dir0 = Vec3::from(UnitSphere.sample(&mut rng));
        let dir1 = Vec3::from(UnitSphere.sample(&mut rng));
        let radius = rng.gen_range(0.5..1.5);
        let len = (rng.gen_range(1e-3f64.ln()..0.5f64.ln())).exp();
        let x = dir0 * radius;
        let y = x + dir1 * len;
        let m = (x + y) * 0.5;
        // the closest point of the segment to the origin
        let t = (-x.dot(&dir1)).clamp(0.0, len);
        if (x + dir1 * t).norm() < 0.1 {
            continue;
        }
        drawn += 1;
        let gap = f.homogeneous(&m) - 0.5 * (f.homogeneous(&x) + f.homogeneous(&y));
        if gap > CONVEXITY_GAP && worst.is_none_or(|w| gap > w.2) {
            worst = Some((x, y, gap));
        }
    }
    match worst {
        Some((x, y, gap)) => ConvexityVerdict::Nonconvex { x, y, gap },
        None => ConvexityVerdict::Convex,
    }
}

/// Serializable body description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum BodySpec {
    Smooth {
        h: FunctionSpec,
    },
    Ball {
        r: f64,
        #[serde(default)]
        center: [f64; 3],
    },
    Cone {
        #[serde(rename = "P")]
        p: [f64; 3],
        theta: f64,
    },
    Cylinder {
        base: PlanarBody,
        lambda: f64,
        axis: [f64; 3],
    },
    Combo {
        parts: Vec<(f64, BodySpec)>,
    },
    Perturbed {
        base: Box<BodySpec>,
        phi: FunctionSpec,
        s: f64,
    },
}

impl BodySpec {
    pub fn build(&self) -> Result<ConvexBody> {
        let body = match self {
            BodySpec::Smooth { h } => ConvexBody::Smooth(h.build()?),
            BodySpec::Ball { r, center } => ConvexBody::Ball {
                r: *r,
                center: v3(center),
            },
            BodySpec::Cone { p, theta } => ConvexBody::Cone {
                p: v3(p),
                theta: *theta,
            },
            BodySpec::Cylinder { base, lambda, axis } => ConvexBody::Cylinder {
                base: base.clone(),
                lambda: *lambda,
                axis: v3(axis),
            },
            BodySpec::Combo { parts } => ConvexBody::Combo(
                parts
                    .iter()
                    .map(|(w, b)| b.build().map(|b| (*w, b)))
                    .collect::<Result<Vec<_>>>()?,
            ),
            BodySpec::Perturbed { base, phi, s } => ConvexBody::Perturbed {
                base: Box::new(base.build()?),
                phi: phi.build()?,
                s: *s,
            },
        };
        body.validate()?;
        Ok(body)
    }

    /// Bodies accepted after `builtin:` on the command line.
    pub fn named(name: &str) -> Option<BodySpec> {
        Some(match name {
            "ball" => BodySpec::Ball {
                r: 1.0,
                center: [0.0; 3],
            },
            "ellipsoid" => BodySpec::Smooth {
                h: FunctionSpec::Ellipsoid {
                    axes: [1.0, 1.0, 2.0],
                    rotation: None,
                },
            },
            "flat-ellipsoid" => BodySpec::Smooth {
                h: FunctionSpec::Ellipsoid {
                    axes: [1.5, 1.0, 0.5],
                    rotation: None,
                },
            },
            "cone" => BodySpec::Cone {
                p: [0.0, 0.0, 1.0],
                theta: std::f64::consts::FRAC_PI_4,
            },
            "cylinder" => BodySpec::Cylinder {
                base: PlanarBody::Disk {
                    r: 1.0,
                    center: [0.0, 0.0],
                },
                lambda: 1.0,
                axis: [0.0, 0.0, 1.0],
            },
            _ => return None,
        })
    }
}

/// Random smooth body: a rotated ellipsoid plus a ball, translated.
pub fn random_smooth_body(rng: &mut impl Rng) -> ConvexBody {
    let axes = [
        rng.gen_range(0.4..2.0),
        rng.gen_range(0.4..2.0),
        rng.gen_range(0.4..2.0),
    ];
    let rot = nalgebra::Rotation3::from_euler_angles(
        rng.gen_range(-3.0..3.0),
        rng.gen_range(-1.5..1.5),
        rng.gen_range(-3.0..3.0),
    )
    .into_inner();
    let ell = builtin::ellipsoid(axes, Some(rot)).expect("positive axes");
    let shift = Vec3::new(
        rng.gen_range(-0.5..0.5),
        rng.gen_range(-0.5..0.5),
        rng.gen_range(-0.5..0.5),
    );
    let h = SphericalFunction::linear_combination(&[
        (1.0, ell),
        (rng.gen_range(0.0..0.5), builtin::constant(1.0)),
        (1.0, builtin::linear(shift)),
    ]);
    ConvexBody::Smooth(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere_grid::build_grid;

    #[test]
    fn cone_support_profile() {
        let p = Vec3::z();
        let t = 0.5;
        assert_eq!(cone_support(&p, t, &p), 1.0);
        assert_eq!(cone_support(&p, t, &-p), 0.0);
        let u = Vec3::new((t + 0.3f64).sin(), 0.0, (t + 0.3f64).cos());
        assert!((cone_support(&p, t, &u) - 0.3f64.cos()).abs() < 1e-12);
    }

    #[test]
    fn cone_aperture_checked() {
        assert!(ConvexBody::cone(Vec3::z(), 0.0).is_err());
        assert!(ConvexBody::cone(Vec3::z(), FRAC_PI_2).is_err());
        assert!(ConvexBody::cone(Vec3::z(), 1.0).is_ok());
    }

    #[test]
    fn negative_weights_rejected() {
        let b = ConvexBody::ball(1.0);
        assert!(matches!(
            minkowski_combine(&[(-0.1, b.clone()), (1.0, b)]),
            Err(Error::NegativeWeight(_))
        ));
    }

    #[test]
    fn combination_of_balls_is_ball() {
        let b = ConvexBody::ball(1.0);
        let c = minkowski_combine(&[(0.3, b.clone()), (0.7, b)]).unwrap();
        let u = Vec3::new(0.1, 0.2, 0.3).normalize();
        assert!((c.support(&u) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn epsilon_for_constant_perturbation() {
        let grid = build_grid(1);
        let one = builtin::constant(1.0);
        let e = perturbation_epsilon(&one, &one, grid.quadrature()).unwrap();
        assert!((e.value().unwrap() - 1.0).abs() < 1e-8);
        let lin = builtin::linear(Vec3::new(0.0, 1.0, 0.0));
        assert_eq!(
            perturbation_epsilon(&one, &lin, grid.quadrature()).unwrap(),
            PerturbationRange::Unbounded
        );
    }

    #[test]
    fn oracle_sees_convex_and_nonconvex() {
        assert!(support_convexity_oracle(&builtin::constant(1.0), 5000).is_convex());
        let lin = builtin::linear(Vec3::new(1.0, -2.0, 0.5));
        assert!(support_convexity_oracle(&lin, 5000).is_convex());
        let tilted = builtin::named("tilted").unwrap().build().unwrap();
        match support_convexity_oracle(&tilted, 5000) {
            ConvexityVerdict::Nonconvex { x, y, gap } => {
                let m = (x + y) * 0.5;
                let direct = tilted.homogeneous(&m)
                    - 0.5 * (tilted.homogeneous(&x) + tilted.homogeneous(&y));
                assert_eq!(direct, gap);
                assert!(gap > CONVEXITY_GAP);
            }
            ConvexityVerdict::Convex => panic!("missed a nonconvex function"),
        }
    }

    #[test]
    fn body_spec_json() {
        let json = r#"{"variant":"cone","P":[0,0,1],"theta":0.6}"#;
        let spec: BodySpec = serde_json::from_str(json).unwrap();
        let body = spec.build().unwrap();
        assert!(matches!(body, ConvexBody::Cone { .. }));
        assert_eq!(body.to_spec().unwrap(), spec);
        let bad = r#"{"variant":"cone","P":[0,0,1],"theta":2.0}"#;
        let spec: BodySpec = serde_json::from_str(bad).unwrap();
        assert!(spec.build().is_err());
    }
}
