//! Scalar fields on the unit sphere.

use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{arr, Error, Result};
use crate::sphere_grid::{band, polar_nodes, Quadrature, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Smoothness {
    C0,
    C2,
    Cinf,
}

/// Value, Euclidean gradient and Euclidean Hessian of the 1-homogeneous extension
/// `H(x) = |x| f(x / |x|)` at a unit vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub gradient: Vec3,
    pub hessian: Matrix3<f64>,
}

impl Jet {
    pub fn scaled(&self, c: f64) -> Jet {
        Jet {
            value: self.value * c,
            gradient: self.gradient * c,
            hessian: self.hessian * c,
        }
    }

    pub fn rotated(&self, rho: &Matrix3<f64>) -> Jet {
        Jet {
            value: self.value,
            gradient: rho * self.gradient,
            hessian: rho * self.hessian * rho.transpose(),
        }
    }
}

type EvalFn = dyn Fn(&Vec3) -> f64 + Send + Sync;
type JetFn = dyn Fn(&Vec3) -> Jet + Send + Sync;
type QuadFn = dyn Fn(u32) -> Quadrature + Send + Sync;

/// A spherical cap containing the support of a function, with a quadrature rule over the
/// support fine enough to resolve it at a given level.
#[derive(Clone)]
pub struct SupportInfo {
    pub center: Vec3,
    pub radius: f64,
    quadrature: Arc<QuadFn>,
}

impl SupportInfo {
    pub fn new(
        center: Vec3,
        radius: f64,
        quadrature: impl Fn(u32) -> Quadrature + Send + Sync + 'static,
    ) -> Self {
        SupportInfo {
            center,
            radius,
            quadrature: Arc::new(quadrature),
        }
    }

    /// Support inside the cap; integrated with a band rule of the given level.
    pub fn cap(center: Vec3, radius: f64) -> Self {
        SupportInfo::new(center, radius, move |level| {
            let n = 2 * polar_nodes(level);
            band(&center, 0.0, radius, n, 2 * n)
        })
    }

    pub fn quadrature(&self, level: u32) -> Quadrature {
        (self.quadrature)(level)
    }

    /// True when the support cap lies inside the cap of angular radius `theta` around `axis`.
    pub fn inside_cap(&self, axis: &Vec3, theta: f64) -> bool {
        let d = self.center.dot(axis).clamp(-1.0, 1.0).acos();
        d + self.radius < theta
    }
}

impl fmt::Debug for SupportInfo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SupportInfo")
            .field("center", &self.center)
            .field("radius", &self.radius)
            .finish()
    }
}

/// A real function on the unit sphere, evaluable at any unit vector.
///
/// Cheap to clone. Optional extras: a closed-form [`Jet`] of the homogeneous extension, a
/// serializable [`FunctionSpec`], and [`SupportInfo`] for localized functions.
#[derive(Clone)]
pub struct SphericalFunction {
    eval: Arc<EvalFn>,
    jet: Option<Arc<JetFn>>,
    smoothness: Smoothness,
    label: String,
    spec: Option<FunctionSpec>,
    support: Option<SupportInfo>,
}

impl fmt::Debug for SphericalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SphericalFunction")
            .field("label", &self.label)
            .field("smoothness", &self.smoothness)
            .field("analytic_jet", &self.jet.is_some())
            .field("support", &self.support)
            .finish()
    }
}

impl SphericalFunction {
    pub fn new(
        label: impl Into<String>,
        smoothness: Smoothness,
        eval: impl Fn(&Vec3) -> f64 + Send + Sync + 'static,
    ) -> Self {
        SphericalFunction {
            eval: Arc::new(eval),
            jet: None,
            smoothness,
            label: label.into(),
            spec: None,
            support: None,
        }
    }

    pub fn with_jet(mut self, jet: impl Fn(&Vec3) -> Jet + Send + Sync + 'static) -> Self {
        self.jet = Some(Arc::new(jet));
        self
    }

    pub fn with_spec(mut self, spec: FunctionSpec) -> Self {
        self.spec = Some(spec);
        self
    }

    pub fn with_support(mut self, support: SupportInfo) -> Self {
        self.support = Some(support);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_smoothness(mut self, smoothness: Smoothness) -> Self {
        self.smoothness = smoothness;
        self
    }

    #[inline]
    pub fn eval(&self, u: &Vec3) -> f64 {
        (self.eval)(u)
    }

    pub fn eval_checked(&self, u: &Vec3) -> Result<f64> {
        let v = (self.eval)(u);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite {
                label: self.label.clone(),
                at: arr(u),
            })
        }
    }

    /// `H(x) = |x| f(x / |x|)`, with `H(0) = 0`.
    #[inline]
    pub fn homogeneous(&self, x: &Vec3) -> f64 {
        let n = x.norm();
        if n == 0.0 {
            return 0.0;
        }
        n * (self.eval)(&(x / n))
    }

    pub fn analytic_jet(&self, u: &Vec3) -> Option<Jet> {
        self.jet.as_ref().map(|j| j(u))
    }

    pub fn has_analytic_jet(&self) -> bool {
        self.jet.is_some()
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// True when both handles share the same evaluator (clones of one function).
    pub fn same_as(&self, other: &SphericalFunction) -> bool {
        Arc::ptr_eq(&self.eval, &other.eval)
    }

    pub fn spec(&self) -> Option<&FunctionSpec> {
        self.spec.as_ref()
    }

    pub fn support(&self) -> Option<&SupportInfo> {
        self.support.as_ref()
    }

    pub fn scale(&self, c: f64) -> SphericalFunction {
        SphericalFunction::linear_combination(&[(c, self.clone())])
    }

    pub fn add(&self, other: &SphericalFunction) -> SphericalFunction {
        SphericalFunction::linear_combination(&[(1.0, self.clone()), (1.0, other.clone())])
    }

    /// `sum_i c_i f_i`. Keeps analytic jets and specs when every term has one; keeps support
    /// information when a single localized term is present.
    pub fn linear_combination(terms: &[(f64, SphericalFunction)]) -> SphericalFunction {
        let terms: Vec<(f64, SphericalFunction)> = terms.to_vec();
        let smoothness = terms
            .iter()
            .map(|(_, f)| f.smoothness)
            .min()
            .unwrap_or(Smoothness::Cinf);
        let label = terms
            .iter()
            .map(|(c, f)| format!("{c}*{}", f.label))
            .collect::<Vec<_>>()
            .join(" + ");
        let spec = terms
            .iter()
            .map(|(c, f)| f.spec.clone().map(|s| (*c, s)))
            .collect::<Option<Vec<_>>>()
            .map(|terms| FunctionSpec::Sum { terms });
        let support = match terms.as_slice() {
            [(_, f)] => f.support.clone(),
            _ => None,
        };
        let all_jets = terms.iter().all(|(_, f)| f.jet.is_some());
        let eval_terms = terms.clone();
        let mut out = SphericalFunction::new(label, smoothness, move |u| {
            eval_terms.iter().map(|(c, f)| c * f.eval(u)).sum()
        });
        if all_jets {
            let jet_terms = terms.clone();
            out = out.with_jet(move |u| {
                let mut acc = Jet {
                    value: 0.0,
                    gradient: Vec3::zeros(),
                    hessian: Matrix3::zeros(),
                };
                for (c, f) in &jet_terms {
                    let j = f.analytic_jet(u).expect("jet present");
                    acc.value += c * j.value;
                    acc.gradient += j.gradient * *c;
                    acc.hessian += j.hessian * *c;
                }
                acc
            });
        }
        out.spec = spec;
        out.support = support;
        out
    }
}

pub(crate) fn check_rotation(rho: &Matrix3<f64>) -> Result<()> {
    let ortho = (rho.transpose() * rho - Matrix3::identity()).abs().max();
    if ortho > 1e-10 {
        return Err(Error::NotRotation(format!("|rho^T rho - I| = {ortho:e}")));
    }
    let det = rho.determinant();
    if (det - 1.0).abs() > 1e-10 {
        return Err(Error::NotRotation(format!("det = {det}")));
    }
    Ok(())
}

/// `f_rho(x) = f(rho^{-1} x)` for a proper rotation `rho`.
pub fn rotate_function(f: &SphericalFunction, rho: &Matrix3<f64>) -> Result<SphericalFunction> {
    check_rotation(rho)?;
    let rho = *rho;
    let inv = rho.transpose();
    let inner = f.clone();
    let mut out = SphericalFunction::new(format!("rot({})", f.label), f.smoothness, move |x| {
        inner.eval(&(inv * x))
    });
    if f.jet.is_some() {
        let inner = f.clone();
        out = out.with_jet(move |x| {
            inner
                .analytic_jet(&(inv * x))
                .expect("jet present")
                .rotated(&rho)
        });
    }
    if let Some(spec) = &f.spec {
        out.spec = Some(FunctionSpec::Rotated {
            inner: Box::new(spec.clone()),
            rotation: mat_to_rows(&rho),
        });
    }
    if let Some(s) = &f.support {
        let s = s.clone();
        let center = rho * s.center;
        out.support = Some(SupportInfo::new(center, s.radius, move |level| {
            let mut q = s.quadrature(level);
            q.nodes.iter_mut().for_each(|u| *u = rho * *u);
            q
        }));
    }
    Ok(out)
}

pub(crate) fn mat_to_rows(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    [
        [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
        [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
        [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
    ]
}

pub(crate) fn rows_to_mat(r: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::new(
        r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
    )
}

pub(crate) fn v3(a: &[f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

/// Monomial `coef * x^a y^b z^c` in the coordinates of the unit vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coef: f64,
    pub powers: [u32; 3],
}

/// Serializable description of a spherical function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Constant {
        c: f64,
    },
    Linear {
        a: [f64; 3],
    },
    /// Support function `sqrt(u^T R diag(axes^2) R^T u)` of an ellipsoid.
    Ellipsoid {
        axes: [f64; 3],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rotation: Option<[[f64; 3]; 3]>,
    },
    /// `sum_k coeffs[k] * (axis, u)^k`.
    Zonal {
        axis: [f64; 3],
        coeffs: Vec<f64>,
    },
    AbsCoordinate {
        axis: [f64; 3],
    },
    /// `c + u^T B u`.
    Quadratic {
        c: f64,
        matrix: [[f64; 3]; 3],
    },
    Polynomial {
        terms: Vec<Monomial>,
    },
    /// Smooth bump supported in the cap of angular radius `radius` around `center`,
    /// multiplied by `1 + (tilt, u)`.
    CapBump {
        center: [f64; 3],
        radius: f64,
        #[serde(default)]
        tilt: [f64; 3],
    },
    /// Smoothed sawtooth test perturbation (see [`crate::sawtooth`]).
    Sawtooth {
        center: [f64; 3],
        direction: [f64; 3],
        eps: f64,
        r: f64,
        #[serde(default = "default_true")]
        smoothed: bool,
        /// Smoothing half-width; `eps / 8` when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
    },
    Rotated {
        inner: Box<FunctionSpec>,
        rotation: [[f64; 3]; 3],
    },
    Sum {
        terms: Vec<(f64, FunctionSpec)>,
    },
    /// Rotation-group mollification of `base`, reproducible from the seed.
    Mollified {
        base: Box<FunctionSpec>,
        k: u32,
        samples: usize,
        seed: u64,
    },
    /// Inverse-distance interpolation of nodal samples.
    Nodal {
        nodes: Vec<[f64; 3]>,
        values: Vec<f64>,
    },
}

fn default_true() -> bool {
    true
}

impl FunctionSpec {
    pub fn build(&self) -> Result<SphericalFunction> {
        use FunctionSpec::*;
        let f = match self {
            Constant { c } => builtin::constant(*c),
            Linear { a } => builtin::linear(v3(a)),
            Ellipsoid { axes, rotation } => {
                let rot = rotation.as_ref().map(rows_to_mat);
                if let Some(r) = &rot {
                    check_rotation(r)?;
                }
                builtin::ellipsoid(*axes, rot)?
            }
            Zonal { axis, coeffs } => builtin::zonal(unit(axis)?, coeffs.clone()),
            AbsCoordinate { axis } => builtin::abs_coordinate(unit(axis)?),
            Quadratic { c, matrix } => builtin::quadratic(*c, rows_to_mat(matrix)),
            Polynomial { terms } => builtin::polynomial(terms.clone()),
            CapBump {
                center,
                radius,
                tilt,
            } => builtin::cap_bump(unit(center)?, *radius, v3(tilt))?,
            Sawtooth {
                center,
                direction,
                eps,
                r,
                smoothed,
                delta,
            } => {
                let c = unit(center)?;
                let mut saw = crate::sawtooth::Sawtooth::new(c, v3(direction), *eps, *r)?;
                if let Some(d) = delta {
                    saw = saw.with_delta(*d)?;
                }
                if *smoothed {
                    saw.smoothed()
                } else {
                    saw.lipschitz()
                }
            }
            Rotated { inner, rotation } => {
                rotate_function(&inner.build()?, &rows_to_mat(rotation))?
            }
            Sum { terms } => {
                let built = terms
                    .iter()
                    .map(|(c, s)| s.build().map(|f| (*c, f)))
                    .collect::<Result<Vec<_>>>()?;
                SphericalFunction::linear_combination(&built)
            }
            Mollified {
                base,
                k,
                samples,
                seed,
            } => crate::mollifier::mollify(&base.build()?, *k, *samples, *seed)?.function(),
            Nodal { nodes, values } => builtin::nodal(nodes, values)?,
        };
        Ok(f.with_spec(self.clone()))
    }
}

fn unit(a: &[f64; 3]) -> Result<Vec3> {
    let v = v3(a);
    let n = v.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "zero or non-finite axis {a:?}"
        )));
    }
    Ok(v / n)
}

/// Closed-form functions, plus the named registry used by the command line.
/// `B(s)`, `B'(s)`, `B''(s)` for the bump `B = exp(1 - 1/(1 - tau))`, `tau = angle^2 / r^2`,
/// as a function of `s = (c, u)`.
fn bump_profile(c: &Vec3, r: f64, u: &Vec3) -> [f64; 3] {
    let s = c.dot(u);
    let alpha = c.cross(u).norm().atan2(s);
    let tau = (alpha / r).powi(2);
    if tau >= 1.0 {
        return [0.0; 3];
    }
    let m = 1.0 / (1.0 - tau);
    let b = (1.0 - m).exp();
    let db = -b * m * m;
    let ddb = b * (m.powi(4) - 2.0 * m.powi(3));
    // tau'(s) = -2 alpha / (r^2 sin alpha), tau''(s) = 2 (sin a - a cos a) / (r^2 sin^3 a)
    let (q, dq) = if alpha < 1e-3 {
        let a2 = alpha * alpha;
        (1.0 + a2 / 6.0, 1.0 / 3.0 + 2.0 * a2 / 15.0)
    } else {
        let (sa, ca) = alpha.sin_cos();
        (alpha / sa, (sa - alpha * ca) / sa.powi(3))
    };
    let (dt, ddt) = (-2.0 * q / (r * r), 2.0 * dq / (r * r));
    [b, db * dt, ddb * dt * dt + db * ddt]
}

/// Jet of `H(x) = (|x| + (tilt, x)) B((c, x) / |x|)` at a unit vector.
fn cap_bump_jet(c: &Vec3, r: f64, tilt: &Vec3, u: &Vec3) -> Jet {
    let [b, db, ddb] = bump_profile(c, r, u);
    let s = c.dot(u);
    let id = Matrix3::identity();
    let ds = c - u * s;
    let dds = -(c * u.transpose() + u * c.transpose()) - id * s + u * u.transpose() * (3.0 * s);
    let grad_b = ds * db;
    let hess_b = ds * ds.transpose() * ddb + dds * db;
    let lin = 1.0 + tilt.dot(u);
    let w = u + tilt;
    Jet {
        value: b * lin,
        gradient: w * b + grad_b * lin,
        hessian: (id - u * u.transpose()) * b
            + w * grad_b.transpose()
            + grad_b * w.transpose()
            + hess_b * lin,
    }
}

pub mod builtin {
    use super::*;

    pub fn constant(c: f64) -> SphericalFunction {
        SphericalFunction::new(format!("constant({c})"), Smoothness::Cinf, move |_| c)
            .with_spec(FunctionSpec::Constant { c })
    }

    pub fn linear(a: Vec3) -> SphericalFunction {
        SphericalFunction::new(
            format!("linear({:.3},{:.3},{:.3})", a.x, a.y, a.z),
            Smoothness::Cinf,
            move |u| a.dot(u),
        )
        .with_spec(FunctionSpec::Linear { a: arr(&a) })
    }

    pub fn ellipsoid(axes: [f64; 3], rotation: Option<Matrix3<f64>>) -> Result<SphericalFunction> {
        if axes.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "ellipsoid semi-axes must be positive: {axes:?}"
            )));
        }
        let r = rotation.unwrap_or_else(Matrix3::identity);
        let d = Matrix3::from_diagonal(&Vec3::new(
            axes[0].powi(2),
            axes[1].powi(2),
            axes[2].powi(2),
        ));
        let m = r * d * r.transpose();
        Ok(SphericalFunction::new(
            format!("ellipsoid({},{},{})", axes[0], axes[1], axes[2]),
            Smoothness::Cinf,
            move |u| u.dot(&(m * u)).max(0.0).sqrt(),
        )
        .with_spec(FunctionSpec::Ellipsoid {
            axes,
            rotation: rotation.map(|r| mat_to_rows(&r)),
        }))
    }

    pub fn zonal(axis: Vec3, coeffs: Vec<f64>) -> SphericalFunction {
        let spec = FunctionSpec::Zonal {
            axis: arr(&axis),
            coeffs: coeffs.clone(),
        };
        SphericalFunction::new(format!("zonal{coeffs:?}"), Smoothness::Cinf, move |u| {
            let z = axis.dot(u);
            coeffs.iter().rev().fold(0.0, |acc, c| acc * z + c)
        })
        .with_spec(spec)
    }

    /// `|(axis, u)|`: support function of the segment `[-axis, axis]`.
    pub fn abs_coordinate(axis: Vec3) -> SphericalFunction {
        SphericalFunction::new("abs-coordinate", Smoothness::C0, move |u| axis.dot(u).abs())
            .with_spec(FunctionSpec::AbsCoordinate { axis: arr(&axis) })
    }

    pub fn quadratic(c: f64, b: Matrix3<f64>) -> SphericalFunction {
        let b = (b + b.transpose()) * 0.5;
        SphericalFunction::new(format!("quadratic(c={c})"), Smoothness::Cinf, move |u| {
            c + u.dot(&(b * u))
        })
        .with_spec(FunctionSpec::Quadratic {
            c,
            matrix: mat_to_rows(&b),
        })
    }

    pub fn polynomial(terms: Vec<Monomial>) -> SphericalFunction {
        let spec = FunctionSpec::Polynomial {
            terms: terms.clone(),
        };
        SphericalFunction::new("polynomial", Smoothness::Cinf, move |u| {
            terms
                .iter()
                .map(|m| {
                    m.coef
                        * u.x.powi(m.powers[0] as i32)
                        * u.y.powi(m.powers[1] as i32)
                        * u.z.powi(m.powers[2] as i32)
                })
                .sum()
        })
        .with_spec(spec)
    }

    /// `b(angle(u, center) / radius) * (1 + (tilt, u))` with the standard `exp(1 - 1/(1-t^2))`
    /// bump; C-infinity, supported in the open cap.
    pub fn cap_bump(center: Vec3, radius: f64, tilt: Vec3) -> Result<SphericalFunction> {
        if !(radius > 0.0 && radius < std::f64::consts::PI) {
            return Err(Error::InvalidParameter(format!("cap radius {radius}")));
        }
        let center = center.normalize();
        Ok(
            SphericalFunction::new("cap-bump", Smoothness::Cinf, move |u| {
                bump_profile(&center, radius, u)[0] * (1.0 + tilt.dot(u))
            })
            .with_jet(move |u| cap_bump_jet(&center, radius, &tilt, u))
            .with_spec(FunctionSpec::CapBump {
                center: arr(&center),
                radius,
                tilt: arr(&tilt),
            })
            .with_support(SupportInfo::cap(center, radius)),
        )
    }

    pub fn nodal(nodes: &[[f64; 3]], values: &[f64]) -> Result<SphericalFunction> {
        if nodes.len() != values.len() || nodes.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "nodal samples: {} nodes vs {} values",
                nodes.len(),
                values.len()
            )));
        }
        let pts: Vec<Vec3> = nodes.iter().map(|n| v3(n).normalize()).collect();
        let vals = values.to_vec();
        Ok(SphericalFunction::new("nodal", Smoothness::C0, move |u| {
            let mut num = 0.0;
            let mut den = 0.0;
            for (p, v) in pts.iter().zip(&vals) {
                let d2 = (p - u).norm_squared();
                if d2 < 1e-24 {
                    return *v;
                }
                let w = 1.0 / (d2 * d2);
                num += w * v;
                den += w;
            }
            num / den
        }))
    }

    fn diag(a: f64, b: f64, c: f64) -> [[f64; 3]; 3] {
        [[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]]
    }

    /// Names accepted after `builtin:` on the command line.
    pub fn names() -> Vec<&'static str> {
        let mut v: Vec<&str> = support_family().iter().map(|(n, _)| *n).collect();
        v.extend(non_support_family().iter().map(|(n, _)| *n));
        v.extend(["abs", "bumpy"]);
        v
    }

    /// Smooth support functions of convex bodies.
    pub fn support_family() -> Vec<(&'static str, FunctionSpec)> {
        vec![
            ("constant", FunctionSpec::Constant { c: 1.0 }),
            (
                "linear",
                FunctionSpec::Linear {
                    a: [0.3, -0.2, 0.5],
                },
            ),
            (
                "ellipsoid",
                FunctionSpec::Ellipsoid {
                    axes: [1.0, 1.0, 2.0],
                    rotation: None,
                },
            ),
            (
                "zonal",
                FunctionSpec::Zonal {
                    axis: [0.0, 0.0, 1.0],
                    coeffs: vec![1.0, 0.0, 0.1],
                },
            ),
            (
                "shifted-ellipsoid",
                FunctionSpec::Sum {
                    terms: vec![
                        (
                            1.0,
                            FunctionSpec::Ellipsoid {
                                axes: [0.5, 1.0, 1.5],
                                rotation: Some(mat_to_rows(
                                    &nalgebra::Rotation3::from_euler_angles(0.3, -0.7, 1.1)
                                        .into_inner(),
                                )),
                            },
                        ),
                        (
                            1.0,
                            FunctionSpec::Linear {
                                a: [0.2, 0.1, -0.4],
                            },
                        ),
                    ],
                },
            ),
        ]
    }

    /// Smooth functions that are not support functions.
    pub fn non_support_family() -> Vec<(&'static str, FunctionSpec)> {
        vec![
            (
                "tilted",
                FunctionSpec::Quadratic {
                    c: 1.0,
                    matrix: diag(0.5, -0.5, 0.0),
                },
            ),
            (
                "saddle",
                FunctionSpec::Quadratic {
                    c: 0.0,
                    matrix: diag(0.5, -0.5, 0.0),
                },
            ),
            ("negative", FunctionSpec::Constant { c: -1.0 }),
            (
                "zonal-steep",
                FunctionSpec::Zonal {
                    axis: [0.0, 0.0, 1.0],
                    coeffs: vec![1.0, 0.0, 2.0],
                },
            ),
            (
                "cubic",
                FunctionSpec::Polynomial {
                    terms: vec![
                        Monomial {
                            coef: 1.0,
                            powers: [0, 0, 0],
                        },
                        Monomial {
                            coef: 0.9,
                            powers: [3, 0, 0],
                        },
                    ],
                },
            ),
        ]
    }

    pub fn named(name: &str) -> Option<FunctionSpec> {
        if name == "abs" {
            // support function of the segment [-e1, e1]; only continuous
            return Some(FunctionSpec::AbsCoordinate {
                axis: [1.0, 0.0, 0.0],
            });
        }
        if name == "bumpy" {
            return Some(FunctionSpec::Quadratic {
                c: 1.0,
                matrix: [[0.1, 0.05, 0.0], [0.05, 0.0, 0.0], [0.0, 0.0, -0.1]],
            });
        }
        support_family()
            .into_iter()
            .chain(non_support_family())
            .find(|(n, _)| *n == name)
            .map(|(_, s)| s)
    }
}
