//! The functional `F(K) = int f dS_2(K, .)`, Brunn-Minkowski checks and variations along
//! `h + s phi`.

use serde::{Serialize, Serializer};

use crate::bodies::{
    minkowski_combine, perturbation_epsilon_from, support_convexity_oracle, BodySpec, ConvexBody,
    PerturbationRange,
};
use crate::calculus::{node_data, SymMatrix2};
use crate::error::{Error, Result};
use crate::function::SphericalFunction;
use crate::measure::{area_measure, body_q};
use crate::sphere_grid::{Quadrature, SphereGrid};

pub use crate::planar::{planar_additivity_residual, planar_functional};

/// Segments sampled when checking that `L` in [`mixed_volume`] is a support function.
pub const MIXED_VOLUME_ORACLE_SAMPLES: usize = 20_000;

pub fn evaluate_f(f: &SphericalFunction, body: &ConvexBody, grid: &SphereGrid) -> Result<f64> {
    area_measure(body, grid)?.integrate(f)
}

/// `V(K, K, L) = F_{h_L}(K) / 3`.
pub fn mixed_volume(
    body: &ConvexBody,
    l_support: &SphericalFunction,
    grid: &SphereGrid,
) -> Result<f64> {
    if let crate::bodies::ConvexityVerdict::Nonconvex { gap, .. } =
        support_convexity_oracle(l_support, MIXED_VOLUME_ORACLE_SAMPLES)
    {
        return Err(Error::InvalidBody(format!(
            "`{}` is not a support function (convexity gap {gap:.3e})",
            l_support.label()
        )));
    }
    Ok(evaluate_f(l_support, body, grid)? / 3.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    /// `F(mid)^(1/2) >= (1-t) F(K0)^(1/2) + t F(K1)^(1/2)`.
    ConcaveRoot,
    /// `F(mid) >= min(F(K0), F(K1))`.
    MinForm,
    /// For negative `F`: `(1-t) (-F(K0))^(1/2) + t (-F(K1))^(1/2) >= (-F(mid))^(1/2)`, i.e.
    /// `sqrt(-F)` convex.
    NegativeRoot,
}

fn bodies_as_specs<S: Serializer>(
    bodies: &(ConvexBody, ConvexBody),
    ser: S,
) -> std::result::Result<S::Ok, S::Error> {
    (bodies.0.to_spec(), bodies.1.to_spec()).serialize(ser)
}

#[derive(Clone, Debug, Serialize)]
pub struct BMReport {
    pub form: Form,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    /// `F(K0)`, `F(K1)`, `F((1-t) K0 + t K1)`.
    pub values: [f64; 3],
    #[serde(serialize_with = "bodies_as_specs")]
    pub bodies: (ConvexBody, ConvexBody),
}

impl BMReport {
    /// Builds the report from the three functional values.
    pub fn from_values(
        form: Form,
        t: f64,
        values: [f64; 3],
        bodies: (ConvexBody, ConvexBody),
    ) -> Result<BMReport> {
        let [f0, f1, fm] = values;
        let (lhs, rhs) = match form {
            Form::ConcaveRoot => {
                for v in values {
                    if v < 0.0 {
                        return Err(Error::NegativeFunctional { value: v });
                    }
                }
                (fm.sqrt(), (1.0 - t) * f0.sqrt() + t * f1.sqrt())
            }
            Form::MinForm => (fm, f0.min(f1)),
            Form::NegativeRoot => {
                for v in values {
                    if !(v < 0.0) {
                        return Err(Error::Precondition(format!(
                            "negative-root form needs F < 0, got {v}"
                        )));
                    }
                }
                ((1.0 - t) * (-f0).sqrt() + t * (-f1).sqrt(), (-fm).sqrt())
            }
        };
        Ok(BMReport {
            form,
            t,
            lhs,
            rhs,
            margin: lhs - rhs,
            values,
            bodies,
        })
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("t = {t} outside [0, 1]")));
    }
    Ok(())
}

pub fn bm_check(
    f: &SphericalFunction,
    k0: &ConvexBody,
    k1: &ConvexBody,
    t: f64,
    form: Form,
    grid: &SphereGrid,
) -> Result<BMReport> {
    check_t(t)?;
    let mid = minkowski_combine(&[(1.0 - t, k0.clone()), (t, k1.clone())])?;
    let values = [
        evaluate_f(f, k0, grid)?,
        evaluate_f(f, k1, grid)?,
        evaluate_f(f, &mid, grid)?,
    ];
    BMReport::from_values(form, t, values, (k0.clone(), k1.clone()))
}

/// A pair normalized to `F(K0) = F(K1) = sign` and the matching interpolation parameter.
#[derive(Clone, Debug)]
pub struct NormalizedPair {
    pub k0: ConvexBody,
    pub k1: ConvexBody,
    pub t: f64,
    /// `+1` when both values were positive, `-1` when both were negative.
    pub sign: f64,
    /// `(1-t) sqrt|F0| + t sqrt|F1|`: the normalized midpoint is the original one divided by it.
    pub scale: f64,
}

/// `K_i / sqrt|F(K_i)|` with `t' = t sqrt|F1| / ((1-t) sqrt|F0| + t sqrt|F1|)`, which turns
/// `(1-t') K0' + t' K1'` into the original midpoint divided by `scale`.
pub fn normalize_pair(
    k0: &ConvexBody,
    k1: &ConvexBody,
    t: f64,
    f0: f64,
    f1: f64,
) -> Result<NormalizedPair> {
    check_t(t)?;
    let sign = if f0 > 0.0 && f1 > 0.0 {
        1.0
    } else if f0 < 0.0 && f1 < 0.0 {
        -1.0
    } else {
        return Err(Error::Precondition(format!(
            "normalization needs F(K0), F(K1) of one strict sign, got {f0}, {f1}"
        )));
    };
    let (r0, r1) = ((sign * f0).sqrt(), (sign * f1).sqrt());
    let scale = (1.0 - t) * r0 + t * r1;
    Ok(NormalizedPair {
        k0: k0.scaled(1.0 / r0),
        k1: k1.scaled(1.0 / r1),
        t: t * r1 / scale,
        sign,
        scale,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VariationProfile {
    #[serde(rename = "F0")]
    pub f0: f64,
    #[serde(rename = "F1")]
    pub f1: f64,
    #[serde(rename = "F2")]
    pub f2: f64,
    #[serde(rename = "fd_F1")]
    pub fd_f1: f64,
    #[serde(rename = "fd_F2")]
    pub fd_f2: f64,
    /// Certified range `|s| < eps`; `None` when every `s` is admissible (then `1` is used for
    /// the stencil).
    pub eps: Option<f64>,
    pub step: f64,
}

impl VariationProfile {
    /// Agreement tolerance between analytic and finite-difference derivatives.
    pub fn tolerance(value: f64) -> f64 {
        (1e-5f64).max(1e-3 * value.abs())
    }

    pub fn consistent(&self) -> bool {
        (self.f1 - self.fd_f1).abs() < Self::tolerance(self.f1)
            && (self.f2 - self.fd_f2).abs() < Self::tolerance(self.f2)
    }

    /// `2 F F'' - F'^2`; negative means `s -> sqrt(F(s))` is not concave at `0`.
    pub fn concavity_defect(&self) -> f64 {
        2.0 * self.f0 * self.f2 - self.f1 * self.f1
    }
}

/// Nodes carrying `phi`: its support rule when known, the grid otherwise.
pub(crate) fn perturbation_quadrature(phi: &SphericalFunction, grid: &SphereGrid) -> Quadrature {
    match phi.support() {
        Some(s) => s.quadrature(grid.level()),
        None => grid.quadrature().clone(),
    }
}

/// Analytic `F'(0)` and `F''(0)` of `s -> F(K + s phi)`, plus the admissible range.
pub fn variation_derivatives(
    f: &SphericalFunction,
    body: &ConvexBody,
    phi: &SphericalFunction,
    grid: &SphereGrid,
) -> Result<(f64, f64, PerturbationRange)> {
    let quad = perturbation_quadrature(phi, grid);
    let base: Vec<SymMatrix2> = quad.try_map(|u| body_q(body, u))?;
    let pd = node_data(phi, &quad)?;
    let range = perturbation_epsilon_from(
        &quad,
        base.iter().copied(),
        pd.iter().map(|d| (d.value, d.q)),
    )?;
    let fv = quad.map(|u| f.eval(u));
    let d1: Vec<f64> = (0..quad.len())
        .map(|i| fv[i] * base[i].cofactor().frobenius_dot(&pd[i].q))
        .collect();
    let d2: Vec<f64> = (0..quad.len())
        .map(|i| 2.0 * fv[i] * pd[i].q.det())
        .collect();
    Ok((quad.dot(&d1), quad.dot(&d2), range))
}

/// `F(s)` on the 5-point stencil `s = j * step`, `j = -2..=2`.
pub fn variation_stencil(
    f: &SphericalFunction,
    body: &ConvexBody,
    phi: &SphericalFunction,
    step: f64,
    grid: &SphereGrid,
) -> Result<[f64; 5]> {
    let mut out = [0.0; 5];
    for (j, slot) in out.iter_mut().enumerate() {
        let s = (j as f64 - 2.0) * step;
        let k = ConvexBody::Perturbed {
            base: Box::new(body.clone()),
            phi: phi.clone(),
            s,
        };
        *slot = evaluate_f(f, &k, grid)?;
    }
    Ok(out)
}

/// Variation profile of `s -> F(K + s phi)` for any body that is `C^2` on the support of
/// `phi` (smooth bodies, or a cone plus a ball with `phi` inside the apex region).
pub fn variation_profile_body(
    f: &SphericalFunction,
    body: &ConvexBody,
    phi: &SphericalFunction,
    grid: &SphereGrid,
) -> Result<VariationProfile> {
    let (f1, f2, range) = variation_derivatives(f, body, phi, grid)?;
    let eps = range.value();
    let e = eps.unwrap_or(1.0);
    if !(e > 0.0) {
        return Err(Error::DegeneratePerturbation(format!("eps = {e}")));
    }
    let step = e / 4.0;
    let v = variation_stencil(f, body, phi, step, grid)?;
    let fd_f1 = (v[0] - 8.0 * v[1] + 8.0 * v[3] - v[4]) / (12.0 * step);
    let fd_f2 = (-v[0] + 16.0 * v[1] - 30.0 * v[2] + 16.0 * v[3] - v[4]) / (12.0 * step * step);
    Ok(VariationProfile {
        f0: v[2],
        f1,
        f2,
        fd_f1,
        fd_f2,
        eps,
        step,
    })
}

pub fn variation_profile(
    f: &SphericalFunction,
    h: &SphericalFunction,
    phi: &SphericalFunction,
    grid: &SphereGrid,
) -> Result<VariationProfile> {
    variation_profile_body(f, &ConvexBody::Smooth(h.clone()), phi, grid)
}

/// Bodies by name for reports and the command line (`builtin:<name>`).
pub fn named_body(name: &str) -> Option<BodySpec> {
    BodySpec::named(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::builtin;
    use crate::sphere_grid::{build_grid, Vec3};
    use std::f64::consts::PI;

    #[test]
    fn ball_surface_area() {
        let g = build_grid(2);
        let v = evaluate_f(&builtin::constant(1.0), &ConvexBody::ball(1.0), &g).unwrap();
        assert!((v - 4.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn linear_f_annihilates_every_measure() {
        let g = build_grid(3);
        let lin = builtin::linear(Vec3::new(0.3, -0.7, 0.2));
        for k in [
            ConvexBody::ball(1.5),
            ConvexBody::cone(Vec3::x(), 0.4).unwrap(),
            BodySpec::named("ellipsoid").unwrap().build().unwrap(),
            BodySpec::named("cylinder").unwrap().build().unwrap(),
        ] {
            assert!(evaluate_f(&lin, &k, &g).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn identical_pair_has_zero_margin() {
        let g = build_grid(2);
        let b = ConvexBody::ball(1.0);
        for form in [Form::ConcaveRoot, Form::MinForm] {
            for t in [0.0, 0.3, 1.0] {
                let r = bm_check(&builtin::constant(1.0), &b, &b, t, form, &g).unwrap();
                assert!(r.margin.abs() < 1e-9);
                assert_eq!(r.margin, r.lhs - r.rhs);
            }
        }
    }

    #[test]
    fn negative_root_form_for_negative_f() {
        let g = build_grid(2);
        let f = builtin::constant(-1.0);
        let (k0, k1) = (ConvexBody::ball(1.0), ConvexBody::ball(3.0));
        // -F is 4 pi r^2, so sqrt(-F) is linear in r and the margin vanishes
        let r = bm_check(&f, &k0, &k1, 0.5, Form::NegativeRoot, &g).unwrap();
        assert!(r.margin.abs() < 1e-9);
        assert!(bm_check(
            &builtin::constant(1.0),
            &k0,
            &k1,
            0.5,
            Form::NegativeRoot,
            &g
        )
        .is_err());
    }

    #[test]
    fn concave_root_rejects_negative_values() {
        let g = build_grid(1);
        let b = ConvexBody::ball(1.0);
        let r = bm_check(&builtin::constant(-1.0), &b, &b, 0.5, Form::ConcaveRoot, &g);
        assert!(matches!(r, Err(Error::NegativeFunctional { .. })));
        assert!(bm_check(&builtin::constant(-1.0), &b, &b, 0.5, Form::MinForm, &g).is_ok());
    }

    #[test]
    fn ball_dilation_profile() {
        // F(s) = 4 pi (1 + s)^2
        let g = build_grid(2);
        let one = builtin::constant(1.0);
        let p = variation_profile(&one, &one, &one, &g).unwrap();
        assert!((p.f0 - 4.0 * PI).abs() < 1e-9);
        assert!((p.f1 - 8.0 * PI).abs() < 1e-9);
        assert!((p.f2 - 8.0 * PI).abs() < 1e-9);
        assert!(p.consistent());
        assert!((p.eps.unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn normalization_maps_midpoint() {
        let k0 = ConvexBody::ball(1.0);
        let k1 = ConvexBody::ball(2.0);
        let n = normalize_pair(&k0, &k1, 0.25, 4.0, 16.0).unwrap();
        // (1-t) sqrt F0 + t sqrt F1 = 0.75*2 + 0.25*4
        assert!((n.scale - 2.5).abs() < 1e-15);
        assert!((n.t - 0.4).abs() < 1e-15);
        assert!(normalize_pair(&k0, &k1, 0.5, 1.0, -1.0).is_err());
    }
}
