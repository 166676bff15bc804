//! Surface area measures `S_2(K, .)` as density patches, point atoms and weighted circles.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::bodies::{flatten, local_q, ConvexBody, Flattened};
use crate::calculus::{node_data, SymMatrix2};
use crate::error::{arr, Error, Result};
use crate::function::SphericalFunction;
use crate::planar::PlanarBody;
use crate::sphere_grid::{band, circle, frame_about, Quadrature, SphereGrid, Vec3};

/// Points per circle for line integrals (trapezoid rule, spectrally accurate for smooth
/// periodic integrands).
pub const CURVE_NODES: usize = 2048;

/// Absolutely continuous part on a region, as density values at quadrature nodes.
#[derive(Clone, Debug)]
pub struct DensityPatch {
    pub label: String,
    pub quadrature: Quadrature,
    /// Density per steradian at each node.
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub direction: Vec3,
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LinearDensity {
    Constant(f64),
    /// `lambda * rho(phi)` along a great circle, with `rho` the radius of curvature of a planar
    /// body and `phi` the azimuth in [`frame_about`] of the circle's center.
    Planar {
        base: PlanarBody,
        lambda: f64,
    },
}

/// Measure on the circle of angular radius `radius` around `center`, with a density per unit
/// arc length.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveMeasure {
    pub center: Vec3,
    pub radius: f64,
    pub density: LinearDensity,
}

impl CurveMeasure {
    pub fn length(&self) -> f64 {
        2.0 * PI * self.radius.sin()
    }

    fn density_at(&self, phi: f64) -> f64 {
        match &self.density {
            LinearDensity::Constant(c) => *c,
            LinearDensity::Planar { base, lambda } => lambda * base.curvature_radius(phi),
        }
    }

    pub fn integrate_with(&self, g: impl Fn(&Vec3) -> f64) -> f64 {
        let (pts, w) = circle(&self.center, self.radius, CURVE_NODES);
        pts.iter()
            .enumerate()
            .map(|(j, x)| {
                let phi = 2.0 * PI * j as f64 / CURVE_NODES as f64;
                g(x) * self.density_at(phi)
            })
            .sum::<f64>()
            * w
    }

    pub fn mass(&self) -> f64 {
        match &self.density {
            LinearDensity::Constant(c) => c * self.length(),
            LinearDensity::Planar { .. } => self.integrate_with(|_| 1.0),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct AreaMeasure {
    pub density: Vec<DensityPatch>,
    pub atoms: Vec<Atom>,
    pub curves: Vec<CurveMeasure>,
}

impl AreaMeasure {
    /// `int g dS` over all parts.
    pub fn integrate_with(&self, g: impl Fn(&Vec3) -> f64 + Sync) -> f64 {
        let mut total = 0.0;
        for p in &self.density {
            let vals = p.quadrature.map(|u| g(u));
            let weighted: Vec<f64> = vals.iter().zip(&p.values).map(|(a, b)| a * b).collect();
            total += p.quadrature.dot(&weighted);
        }
        for a in &self.atoms {
            total += a.mass * g(&a.direction);
        }
        for c in &self.curves {
            total += c.integrate_with(&g);
        }
        total
    }

    pub fn integrate(&self, f: &SphericalFunction) -> Result<f64> {
        let v = self.integrate_with(|u| f.eval(u));
        if !v.is_finite() {
            return Err(Error::NonFinite {
                label: f.label().to_string(),
                at: [f64::NAN; 3],
            });
        }
        Ok(v)
    }

    pub fn total_mass(&self) -> f64 {
        let d: f64 = self
            .density
            .iter()
            .map(|p| p.quadrature.dot(&p.values))
            .sum();
        let a: f64 = self.atoms.iter().map(|a| a.mass).sum();
        let c: f64 = self.curves.iter().map(CurveMeasure::mass).sum();
        d + a + c
    }

    pub fn curve_mass(&self) -> f64 {
        self.curves.iter().map(CurveMeasure::mass).sum()
    }

    /// `int u dS(u)`; vanishes for the area measure of every convex body.
    pub fn centroid(&self) -> Vec3 {
        Vec3::new(
            self.integrate_with(|u| u.x),
            self.integrate_with(|u| u.y),
            self.integrate_with(|u| u.z),
        )
    }

    pub fn scaled(mut self, c: f64) -> AreaMeasure {
        for p in &mut self.density {
            p.values.iter_mut().for_each(|v| *v *= c);
        }
        for a in &mut self.atoms {
            a.mass *= c;
        }
        for cm in &mut self.curves {
            cm.density = match &cm.density {
                LinearDensity::Constant(d) => LinearDensity::Constant(d * c),
                LinearDensity::Planar { base, lambda } => LinearDensity::Planar {
                    base: base.clone(),
                    lambda: lambda * c,
                },
            };
        }
        self
    }
}

fn band_resolution(grid: &SphereGrid) -> usize {
    2 * grid.resolution()
}

fn cap_patch(
    label: &str,
    p: &Vec3,
    lo: f64,
    hi: f64,
    grid: &SphereGrid,
    density: impl Fn(f64) -> f64,
) -> DensityPatch {
    let n = band_resolution(grid);
    let q = band(p, lo, hi, n, 2 * n);
    let values = q
        .nodes
        .iter()
        .map(|u| density(p.dot(u).clamp(-1.0, 1.0).acos()))
        .collect();
    DensityPatch {
        label: label.to_string(),
        quadrature: q,
        values,
    }
}

/// Area measure of `C(p, theta) + eta B` (exact decomposition into zonal bands about `p` and
/// the circle carrying the lateral surface).
pub fn cone_ball_measure(p: &Vec3, theta: f64, eta: f64, grid: &SphereGrid) -> AreaMeasure {
    let mut density = vec![cap_patch("cone-cap", p, 0.0, theta, grid, |_| {
        (1.0 + eta) * (1.0 + eta)
    })];
    if eta > 0.0 {
        let st = theta.sin();
        density.push(cap_patch(
            "cone-rim",
            p,
            theta,
            theta + FRAC_PI_2,
            grid,
            |psi| eta * eta + eta * st / psi.sin(),
        ));
        density.push(cap_patch(
            "cone-apex",
            p,
            theta + FRAC_PI_2,
            PI,
            grid,
            |_| eta * eta,
        ));
    }
    AreaMeasure {
        density,
        atoms: vec![],
        curves: vec![CurveMeasure {
            center: *p,
            radius: FRAC_PI_2 + theta,
            density: LinearDensity::Constant(theta.tan() / 2.0 + eta),
        }],
    }
}

/// Area measure of the right cylinder over `base` with height `lambda` along `axis`.
pub fn cylinder_measure(base: &PlanarBody, lambda: f64, axis: &Vec3) -> AreaMeasure {
    let area = base.area();
    AreaMeasure {
        density: vec![],
        atoms: vec![
            Atom {
                direction: *axis,
                mass: area,
            },
            Atom {
                direction: -axis,
                mass: area,
            },
        ],
        curves: vec![CurveMeasure {
            center: *axis,
            radius: FRAC_PI_2,
            density: LinearDensity::Planar {
                base: base.clone(),
                lambda,
            },
        }],
    }
}

/// Merge perturbation terms that share the same underlying function.
fn merge_terms(terms: Vec<(f64, SphericalFunction)>) -> Vec<(f64, SphericalFunction)> {
    let mut out: Vec<(f64, SphericalFunction)> = Vec::new();
    for (s, phi) in terms {
        match out.iter_mut().find(|(_, g)| g.same_as(&phi)) {
            Some(slot) => slot.0 += s,
            None => out.push((s, phi)),
        }
    }
    out.retain(|(s, _)| *s != 0.0);
    out
}

/// Density correction `det(Q_base + s Q(phi)) - det(Q_base)` over the support of `phi`.
fn perturbation_patch(
    base: &Flattened,
    s: f64,
    phi: &SphericalFunction,
    grid: &SphereGrid,
) -> Result<DensityPatch> {
    let support = phi.support().expect("compactly supported perturbation");
    let q = support.quadrature(grid.level());
    let pd = node_data(phi, &q)?;
    let base_q = q.try_map(|u| local_q(base, u))?;
    let mut values = Vec::with_capacity(q.len());
    for ((qb, d), u) in base_q.iter().zip(&pd).zip(&q.nodes) {
        let total = *qb + d.q.scaled(s);
        if d.q.spectral_norm() > 0.0 && total.eigenvalues()[0] <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                at: arr(u),
                lambda_min: total.eigenvalues()[0],
            });
        }
        values.push(total.det() - qb.det());
    }
    Ok(DensityPatch {
        label: "perturbation".into(),
        quadrature: q,
        values,
    })
}

/// Smooth part: `det Q(h)` on the grid, with positive definiteness enforced at every node.
pub fn smooth_density(h: &SphericalFunction, grid: &SphereGrid) -> Result<DensityPatch> {
    let quad = grid.quadrature();
    let data = node_data(h, quad)?;
    let mut values = Vec::with_capacity(data.len());
    for (d, u) in data.iter().zip(&quad.nodes) {
        let l = d.q.eigenvalues()[0];
        if l <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                at: arr(u),
                lambda_min: l,
            });
        }
        values.push(d.q.det());
    }
    Ok(DensityPatch {
        label: "smooth".into(),
        quadrature: quad.clone(),
        values,
    })
}

/// `S_2(K, .)` for the supported body families: smooth bodies and Minkowski combinations of
/// smooth bodies and balls, a (scaled) cone plus a ball, combinations of cylinders sharing an
/// axis, each optionally perturbed by compactly supported functions where the body is C^2.
pub fn area_measure(body: &ConvexBody, grid: &SphereGrid) -> Result<AreaMeasure> {
    body.validate()?;
    let mut flat = flatten(body);
    let (compact, global) = flat.split_perturbations();
    let compact = merge_terms(compact);
    let global = merge_terms(global);
    flat.perturbations.clear();
    if compact.len() > 1 {
        return Err(Error::Unsupported(
            "more than one distinct localized perturbation".into(),
        ));
    }

    let mut measure = if flat.cones.is_empty() && flat.cylinders.is_empty() {
        let mut terms = flat.smooth.clone();
        terms.extend(global.iter().cloned());
        if terms.is_empty() {
            let r2 = flat.ball * flat.ball;
            let quad = grid.quadrature().clone();
            let values = vec![r2; quad.len()];
            AreaMeasure {
                density: vec![DensityPatch {
                    label: "ball".into(),
                    quadrature: quad,
                    values,
                }],
                ..Default::default()
            }
        } else {
            if flat.ball > 0.0 {
                terms.push((flat.ball, crate::function::builtin::constant(1.0)));
            }
            let h = SphericalFunction::linear_combination(&terms);
            flat.smooth = terms;
            flat.ball = 0.0;
            AreaMeasure {
                density: vec![smooth_density(&h, grid)?],
                ..Default::default()
            }
        }
    } else if flat.cones.len() == 1 && flat.cylinders.is_empty() && flat.smooth.is_empty() {
        if !global.is_empty() {
            return Err(Error::Unsupported("global perturbation of a cone".into()));
        }
        let (w, p, theta) = flat.cones[0];
        cone_ball_measure(&p, theta, flat.ball / w, grid).scaled(w * w)
    } else if flat.cones.is_empty()
        && flat.smooth.is_empty()
        && flat.ball == 0.0
        && global.is_empty()
        && compact.is_empty()
    {
        let axis = flat.cylinders[0].3;
        if flat.cylinders.iter().any(|c| (c.3 - axis).norm() > 1e-12) {
            return Err(Error::Unsupported("cylinders with different axes".into()));
        }
        let base = PlanarBody::Sum {
            parts: flat.cylinders.iter().map(|c| (c.0, c.1.clone())).collect(),
        };
        let lambda: f64 = flat.cylinders.iter().map(|c| c.0 * c.2).sum();
        cylinder_measure(&base, lambda, &axis)
    } else {
        return Err(Error::Unsupported(format!(
            "{} cones, {} cylinders, {} smooth parts",
            flat.cones.len(),
            flat.cylinders.len(),
            flat.smooth.len()
        )));
    };

    if let Some((s, phi)) = compact.first() {
        measure
            .density
            .push(perturbation_patch(&flat, *s, phi, grid)?);
    }
    Ok(measure)
}

/// `Q` of the support function of `K` at `u`, when `K` is C^2 near `u`.
pub fn body_q(body: &ConvexBody, u: &Vec3) -> Result<SymMatrix2> {
    let flat = flatten(body);
    let mut q = local_q(&flat, u)?;
    for (s, phi) in merge_terms(flat.perturbations.clone()) {
        let j = crate::calculus::jet(&phi, u)?;
        q = q + SymMatrix2::restrict(&j.hessian, &frame_about(u)).scaled(s);
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::builtin;
    use crate::sphere_grid::build_grid;

    #[test]
    fn unit_ball() {
        let grid = build_grid(2);
        let m = area_measure(&ConvexBody::ball(1.0), &grid).unwrap();
        assert!((m.total_mass() - 4.0 * PI).abs() < 1e-10);
        assert!(m.centroid().norm() < 1e-12);
    }

    #[test]
    fn cone_total_mass_closed_form() {
        let grid = build_grid(2);
        for theta in [0.2, 0.7, 1.2] {
            let m = area_measure(&ConvexBody::cone(Vec3::y(), theta).unwrap(), &grid).unwrap();
            let exact = 2.0 * PI * (1.0 - theta.cos()) + PI * theta.sin();
            assert!((m.total_mass() - exact).abs() < 1e-12);
            assert!(m.centroid().norm() < 1e-12);
        }
    }

    #[test]
    fn cone_plus_ball_matches_steiner() {
        // S(K + eta B) = S(K) + 2 eta int h_K + 4 pi eta^2
        let grid = build_grid(3);
        let (theta, eta) = (0.6f64, 0.3);
        let k = ConvexBody::Combo(vec![
            (1.0, ConvexBody::cone(Vec3::z(), theta).unwrap()),
            (eta, ConvexBody::ball(1.0)),
        ]);
        let m = area_measure(&k, &grid).unwrap();
        let s_k = 2.0 * PI * (1.0 - theta.cos()) + PI * theta.sin();
        let int_h = 2.0 * PI * (1.0 - theta.cos()) + PI * theta.cos() + PI * PI / 2.0 * theta.sin();
        let exact = s_k + 2.0 * eta * int_h + 4.0 * PI * eta * eta;
        assert!(
            (m.total_mass() - exact).abs() < 1e-10,
            "{} vs {exact}",
            m.total_mass()
        );
        assert!(m.centroid().norm() < 1e-10);
    }

    #[test]
    fn cylinder_over_disk() {
        let base = PlanarBody::Disk {
            r: 1.0,
            center: [0.0, 0.0],
        };
        let m = area_measure(
            &ConvexBody::Cylinder {
                base,
                lambda: 2.0,
                axis: Vec3::z(),
            },
            &build_grid(0),
        )
        .unwrap();
        assert!((m.total_mass() - (2.0 * PI + 4.0 * PI)).abs() < 1e-10);
        assert_eq!(m.atoms.len(), 2);
        assert!((m.atoms[0].mass - PI).abs() < 1e-12);
    }

    #[test]
    fn nonconvex_smooth_body_rejected() {
        let f = builtin::named("tilted").unwrap().build().unwrap();
        assert!(matches!(
            area_measure(&ConvexBody::Smooth(f), &build_grid(2)),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn mixed_cone_and_smooth_unsupported() {
        let k = ConvexBody::Combo(vec![
            (1.0, ConvexBody::cone(Vec3::z(), 0.5).unwrap()),
            (1.0, ConvexBody::Smooth(builtin::constant(1.0))),
        ]);
        assert!(matches!(
            area_measure(&k, &build_grid(1)),
            Err(Error::Unsupported(_))
        ));
    }
}
