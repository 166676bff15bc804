//! Support-function detection: a PSD scan of `Q(f, .)` and, when it fails, an explicit pair of
//! convex bodies on which `F` violates the Brunn-Minkowski inequality in min form.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Serialize, Serializer};

use crate::bodies::{BodySpec, ConvexBody, PerturbationRange};
use crate::calculus::{node_data, q_matrix};
use crate::error::{arr, Error, Result};
use crate::function::{builtin, FunctionSpec, Smoothness, SphericalFunction};
use crate::functional::{
    bm_check, evaluate_f, normalize_pair, variation_derivatives, BMReport, Form,
};
use crate::mollifier::mollify;
use crate::sawtooth::Sawtooth;
use crate::sphere_grid::{build_grid, tangent_basis, Quadrature, SphereGrid, Vec3};

pub const THETA_BAR_LADDER: [f64; 4] = [PI / 12.0, PI / 6.0, PI / 4.0, PI / 3.0];
pub const ETA_LADDER: [f64; 3] = [0.1, 0.05, 0.01];
pub const R_LADDER: [f64; 2] = [0.2, 0.1];
/// `eps = r / divisor`.
pub const EPS_DIVISORS: [f64; 2] = [16.0, 64.0];
/// Relative PSD threshold: `lambda_min >= -PSD_TOLERANCE (1 + max |f|)` counts as support.
pub const PSD_TOLERANCE: f64 = 1e-6;
/// Fraction of the certified range `eps` used for the witness perturbation.
pub const RANGE_FRACTION: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Support,
    NotSupport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetectionReport {
    pub decision: Decision,
    pub lambda_min: f64,
    pub argmin_node: [f64; 3],
    /// Eigenvector of `lambda_min` in the [`tangent_basis`] frame at `argmin_node`.
    pub eigvec: [f64; 2],
    /// The same eigenvector as a tangent vector in R^3.
    pub eigvec_ambient: [f64; 3],
    pub tolerance: f64,
    pub nodes: usize,
    pub grid_level: u32,
}

pub fn detection_tolerance(f: &SphericalFunction, grid: &SphereGrid) -> f64 {
    let sup = grid
        .nodes()
        .iter()
        .map(|u| f.eval(u).abs())
        .fold(0.0, f64::max);
    PSD_TOLERANCE * (1.0 + sup)
}

/// Smallest eigenvalue of `Q(f, u)` over the grid nodes.
pub fn min_q_eigen_scan(f: &SphericalFunction, grid: &SphereGrid) -> Result<DetectionReport> {
    if f.smoothness() < Smoothness::C2 {
        return Err(Error::SmoothnessRequired(format!(
            "{} is only continuous; mollify it before scanning",
            f.label()
        )));
    }
    let data = node_data(f, grid.quadrature())?;
    let (imin, lmin) = data.iter().map(|d| d.q.eigenvalues()[0]).enumerate().fold(
        (0, f64::INFINITY),
        |acc, (i, l)| if l < acc.1 { (i, l) } else { acc },
    );
    let u = grid.nodes()[imin];
    let frame = tangent_basis(&u)?;
    let sample = q_matrix(f, &u, &frame)?;
    let eigvec = sample.min_eigvec();
    let tolerance = detection_tolerance(f, grid);
    Ok(DetectionReport {
        decision: if lmin >= -tolerance {
            Decision::Support
        } else {
            Decision::NotSupport
        },
        lambda_min: lmin,
        argmin_node: arr(&u),
        eigvec,
        eigvec_ambient: arr(&frame.tangent(eigvec)),
        tolerance,
        nodes: data.len(),
        grid_level: grid.level(),
    })
}

/// `2 int f det Q(phi)` over `quad`.
pub fn second_variation_value(
    f: &SphericalFunction,
    phi: &SphericalFunction,
    quad: &Quadrature,
) -> Result<f64> {
    let pd = node_data(phi, quad)?;
    let vals: Vec<f64> = quad
        .nodes
        .iter()
        .zip(&pd)
        .map(|(u, d)| 2.0 * f.eval(u) * d.q.det())
        .collect();
    Ok(quad.dot(&vals))
}

/// `int phi^2 tr Q(f) - int C[Q(f)](grad phi, grad phi)` for the Lipschitz sawtooth, with its
/// almost-everywhere gradient on the kink-split chart rule. Equals `2 int f det Q(phi)` for
/// the smoothed version up to the smoothing error.
pub fn lipschitz_second_variation(
    f: &SphericalFunction,
    saw: &Sawtooth,
    level: u32,
) -> Result<f64> {
    let quad = saw.chart_quadrature(level, false);
    let fd = node_data(f, &quad)?;
    let phi = saw.lipschitz();
    let vals: Vec<f64> = quad
        .nodes
        .iter()
        .zip(&fd)
        .map(|(u, d)| {
            let p = phi.eval(u);
            let g = saw.lipschitz_gradient(u);
            let frame = crate::sphere_grid::frame_about(u);
            let gt = frame.components(&g);
            p * p * d.q.trace() - d.q.cofactor().quad(gt)
        })
        .collect();
    Ok(quad.dot(&vals))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SawtoothTrial {
    pub r: f64,
    pub eps: f64,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct SecondVariation {
    pub sawtooth: Sawtooth,
    /// The smoothed sawtooth.
    pub phi: SphericalFunction,
    /// `2 int f det Q(phi) > 0`.
    pub value: f64,
    pub trials: Vec<SawtoothTrial>,
}

/// Teeth direction at the bad node: across the tangent direction orthogonal to the
/// `lambda_min` eigenvector, so the sawtooth gradient runs along the eigenvector of
/// `lambda_max(C[Q(f)]) = lambda_min(Q(f))`'s partner and `C[Q(f)](grad phi, grad phi)`
/// picks up `lambda_min`.
fn teeth_direction(report: &DetectionReport) -> Vec3 {
    let u = Vec3::from(report.argmin_node);
    u.cross(&Vec3::from(report.eigvec_ambient))
}

/// Searches the `(r, eps)` ladder for a smoothed sawtooth at the bad node with
/// `2 int f det Q(phi) > 0`.
pub fn second_variation_positive(
    f: &SphericalFunction,
    report: &DetectionReport,
    grid: &SphereGrid,
) -> Result<SecondVariation> {
    if report.decision != Decision::NotSupport || report.lambda_min >= -10.0 * report.tolerance {
        return Err(Error::Precondition(format!(
            "lambda_min = {:.3e} is not below -10 x tolerance {:.1e}",
            report.lambda_min, report.tolerance
        )));
    }
    let u0 = Vec3::from(report.argmin_node);
    let dir = teeth_direction(report);
    let mut trials = Vec::new();
    for r in R_LADDER {
        for div in EPS_DIVISORS {
            let saw = Sawtooth::new(u0, dir, r / div, r)?;
            let phi = saw.smoothed();
            let value = second_variation_value(f, &phi, &saw.chart_quadrature(grid.level(), true))?;
            trials.push(SawtoothTrial {
                r,
                eps: r / div,
                value,
            });
            if value > 0.0 {
                return Ok(SecondVariation {
                    sawtooth: saw,
                    phi,
                    value,
                    trials,
                });
            }
        }
    }
    let best = trials
        .iter()
        .map(|t| t.value)
        .fold(f64::NEG_INFINITY, f64::max);
    Err(Error::LadderExhausted {
        reason: "no sawtooth with positive second variation".into(),
        best,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessCase {
    /// `F(K) > 0` on the base `C(Pbar, thetabar) + eta B`; normalization to `F = 1`.
    ConeBall,
    /// `F(K) < 0` on a smooth base; normalization to `F = -1`.
    NegativeSmooth,
}

fn body_spec<S: Serializer>(b: &ConvexBody, ser: S) -> std::result::Result<S::Ok, S::Error> {
    b.to_spec().serialize(ser)
}

fn function_spec<S: Serializer>(
    f: &SphericalFunction,
    ser: S,
) -> std::result::Result<S::Ok, S::Error> {
    f.spec().serialize(ser)
}

#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub case: WitnessCase,
    #[serde(rename = "P")]
    pub p: [f64; 3],
    #[serde(rename = "Pbar")]
    pub pbar: [f64; 3],
    pub theta: Option<f64>,
    pub thetabar: Option<f64>,
    pub eta: Option<f64>,
    /// Unperturbed body `K` (the witness pair is `K -/+ s phi`).
    #[serde(serialize_with = "body_spec")]
    pub base: ConvexBody,
    #[serde(serialize_with = "function_spec")]
    pub phi: SphericalFunction,
    pub sawtooth: SawtoothTrial,
    pub s: f64,
    /// `2 int f det Q(phi)`.
    pub second_variation: f64,
    /// `F(K)`, `F'(0)`, `F''(0)` along `K + s phi`.
    pub profile: [f64; 3],
    /// `2 F F'' - F'^2`.
    pub concavity_defect: f64,
    /// Min-form instance on the normalized pair; its margin is negative.
    pub bm_instance: BMReport,
    /// Concave-root instance on the unnormalized pair (case [`WitnessCase::ConeBall`]).
    pub concave_root_instance: Option<BMReport>,
    /// `-bm_instance.margin`.
    pub delta: f64,
    pub grid_level: u32,
}

fn perturbed(base: &ConvexBody, phi: &SphericalFunction, s: f64) -> ConvexBody {
    ConvexBody::Perturbed {
        base: Box::new(base.clone()),
        phi: phi.clone(),
        s,
    }
}

struct Attempt {
    s: f64,
    profile: [f64; 3],
    bm: BMReport,
    root: Option<BMReport>,
}

/// Builds `K -/+ a phi` with `a` a fixed fraction of the certified range and evaluates the
/// normalized min-form instance.
fn attempt(
    f: &SphericalFunction,
    base: &ConvexBody,
    phi: &SphericalFunction,
    sign: f64,
    grid: &SphereGrid,
) -> Result<Option<Attempt>> {
    let (f1, f2, range) = variation_derivatives(f, base, phi, grid)?;
    let eps = match range {
        PerturbationRange::Bounded(e) => e,
        PerturbationRange::Unbounded => return Ok(None),
    };
    let a = RANGE_FRACTION * eps;
    let k0 = perturbed(base, phi, -a);
    let k1 = perturbed(base, phi, a);
    let (v0, v1) = (evaluate_f(f, &k0, grid)?, evaluate_f(f, &k1, grid)?);
    if !(v0 * sign > 0.0 && v1 * sign > 0.0) {
        return Ok(None);
    }
    let root = if sign > 0.0 {
        Some(bm_check(f, &k0, &k1, 0.5, Form::ConcaveRoot, grid)?)
    } else {
        None
    };
    let n = normalize_pair(&k0, &k1, 0.5, v0, v1)?;
    let bm = bm_check(f, &n.k0, &n.k1, n.t, Form::MinForm, grid)?;
    let f0 = evaluate_f(f, base, grid)?;
    Ok(Some(Attempt {
        s: a,
        profile: [f0, f1, f2],
        bm,
        root,
    }))
}

/// Smooth bases tried when `F` is negative on the cones: the unit ball and ellipsoids
/// flattened along each coordinate axis.
pub fn negative_case_bases() -> Vec<ConvexBody> {
    let mut out = vec![ConvexBody::ball(1.0)];
    for axes in [[0.3, 1.0, 1.0], [1.0, 0.3, 1.0], [1.0, 1.0, 0.3]] {
        let h = FunctionSpec::Ellipsoid {
            axes,
            rotation: None,
        }
        .build()
        .expect("valid ellipsoid");
        out.push(ConvexBody::Smooth(h));
    }
    out
}

/// Full pipeline: PSD scan, sawtooth second variation, and a min-form violation on a cone
/// plus a ball (positive `F`) or on a smooth body (negative `F`). `Ok(None)` when `f` passes
/// the scan.
pub fn find_bm_violation(f: &SphericalFunction, grid: &SphereGrid) -> Result<Option<Witness>> {
    let report = min_q_eigen_scan(f, grid)?;
    if report.decision == Decision::Support {
        return Ok(None);
    }
    let sv = second_variation_positive(f, &report, grid)?;
    build_witness(f, &report, &sv, grid).map(Some)
}

pub fn build_witness(
    f: &SphericalFunction,
    report: &DetectionReport,
    sv: &SecondVariation,
    grid: &SphereGrid,
) -> Result<Witness> {
    let p = Vec3::from(report.argmin_node);
    let pbar = -p;
    let trial = *sv.trials.last().expect("at least one trial");
    let support = sv.phi.support().expect("sawtooth carries its support");
    let mut best = f64::INFINITY;
    let mut cone_positive = false;

    for thetabar in THETA_BAR_LADDER {
        let theta = FRAC_PI_2 - thetabar;
        if !support.inside_cap(&p, theta) {
            continue;
        }
        let cone = ConvexBody::cone(pbar, thetabar)?;
        if evaluate_f(f, &cone, grid)? <= 0.0 {
            continue;
        }
        cone_positive = true;
        for eta in ETA_LADDER {
            let base = ConvexBody::Combo(vec![(1.0, cone.clone()), (eta, ConvexBody::ball(1.0))]);
            let Some(at) = attempt(f, &base, &sv.phi, 1.0, grid)? else {
                continue;
            };
            best = best.min(at.bm.margin);
            if at.bm.margin < 0.0 {
                return Ok(witness(
                    WitnessCase::ConeBall,
                    p,
                    Some((theta, thetabar, eta)),
                    base,
                    sv,
                    trial,
                    at,
                    grid,
                ));
            }
        }
    }
    if !cone_positive {
        for base in negative_case_bases() {
            if evaluate_f(f, &base, grid)? >= 0.0 {
                continue;
            }
            let Some(at) = attempt(f, &base, &sv.phi, -1.0, grid)? else {
                continue;
            };
            best = best.min(at.bm.margin);
            if at.bm.margin < 0.0 {
                return Ok(witness(
                    WitnessCase::NegativeSmooth,
                    p,
                    None,
                    base,
                    sv,
                    trial,
                    at,
                    grid,
                ));
            }
        }
    }
    Err(Error::LadderExhausted {
        reason: if cone_positive {
            "no (thetabar, eta) gave a negative min-form margin".into()
        } else {
            "F(C(Pbar, thetabar)) <= 0 on the whole ladder and no negative smooth base worked"
                .into()
        },
        best,
    })
}

#[allow(clippy::too_many_arguments)]
fn witness(
    case: WitnessCase,
    p: Vec3,
    cone: Option<(f64, f64, f64)>,
    base: ConvexBody,
    sv: &SecondVariation,
    trial: SawtoothTrial,
    at: Attempt,
    grid: &SphereGrid,
) -> Witness {
    let [f0, f1, f2] = at.profile;
    Witness {
        case,
        p: arr(&p),
        pbar: arr(&-p),
        theta: cone.map(|c| c.0),
        thetabar: cone.map(|c| c.1),
        eta: cone.map(|c| c.2),
        base,
        phi: sv.phi.clone(),
        sawtooth: trial,
        s: at.s,
        second_variation: sv.value,
        profile: at.profile,
        concavity_defect: 2.0 * f0 * f2 - f1 * f1,
        delta: -at.bm.margin,
        bm_instance: at.bm,
        concave_root_instance: at.root,
        grid_level: grid.level(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessCheck {
    pub grid_level: u32,
    pub second_variation: f64,
    /// Min-form margin after renormalizing the witness pair at this level.
    pub margin: f64,
    pub concave_root_margin: Option<f64>,
    pub verified: bool,
}

/// Recomputes the witness from scratch on a product grid of the given level: the second
/// variation on a fresh chart rule, all functional values, and the normalization.
pub fn verify_witness(f: &SphericalFunction, w: &Witness, level: u32) -> Result<WitnessCheck> {
    let grid = build_grid(level);
    let support = w
        .phi
        .support()
        .expect("witness perturbation carries its support");
    let second_variation = second_variation_value(f, &w.phi, &support.quadrature(level))?;
    let (k0, k1) = &w.bm_instance.bodies;
    let t = w.bm_instance.t;
    let (v0, v1) = (evaluate_f(f, k0, &grid)?, evaluate_f(f, k1, &grid)?);
    let n = normalize_pair(k0, k1, t, v0, v1)?;
    let margin = bm_check(f, &n.k0, &n.k1, n.t, Form::MinForm, &grid)?.margin;
    let concave_root_margin = if w.case == WitnessCase::ConeBall {
        Some(bm_check(f, k0, k1, t, Form::ConcaveRoot, &grid)?.margin)
    } else {
        None
    };
    Ok(WitnessCheck {
        grid_level: level,
        second_variation,
        margin,
        concave_root_margin,
        verified: second_variation > 0.0
            && margin < 0.0
            && concave_root_margin.is_none_or(|m| m < 0.0),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DetectOptions {
    pub mollify_k: u32,
    pub mollify_samples: usize,
    pub seed: u64,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions {
            mollify_k: 10,
            mollify_samples: 4000,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Detection {
    pub report: DetectionReport,
    pub witness: Option<Witness>,
    /// Set when `f` was only continuous and the scan ran on its mollification.
    pub mollified: Option<DetectOptions>,
}

/// [`find_bm_violation`] with continuous inputs mollified first.
pub fn detect(f: &SphericalFunction, grid: &SphereGrid, opts: &DetectOptions) -> Result<Detection> {
    let (g, mollified) = if f.smoothness() < Smoothness::C2 {
        let m = mollify(f, opts.mollify_k, opts.mollify_samples, opts.seed)?;
        (m.function(), Some(*opts))
    } else {
        (f.clone(), None)
    };
    let report = min_q_eigen_scan(&g, grid)?;
    let witness = if report.decision == Decision::Support {
        None
    } else {
        let sv = second_variation_positive(&g, &report, grid)?;
        Some(build_witness(&g, &report, &sv, grid)?)
    };
    Ok(Detection {
        report,
        witness,
        mollified,
    })
}

/// Builtin bodies, re-exported for reports.
pub fn named_body(name: &str) -> Option<BodySpec> {
    BodySpec::named(name)
}

/// The constant function 1, the simplest support function.
pub fn unit_support() -> SphericalFunction {
    builtin::constant(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn named(n: &str) -> SphericalFunction {
        builtin::named(n).unwrap().build().unwrap()
    }

    #[test]
    fn constant_scan() {
        let r = min_q_eigen_scan(&builtin::constant(1.0), &build_grid(2)).unwrap();
        assert_eq!(r.decision, Decision::Support);
        assert!((r.lambda_min - 1.0).abs() < 1e-8);
    }

    #[test]
    fn linear_is_boundary_support() {
        let r = min_q_eigen_scan(&named("linear"), &build_grid(2)).unwrap();
        assert_eq!(r.decision, Decision::Support);
        assert!(r.lambda_min.abs() < 1e-8);
    }

    #[test]
    fn tilted_fails_scan() {
        let r = min_q_eigen_scan(&named("tilted"), &build_grid(2)).unwrap();
        assert_eq!(r.decision, Decision::NotSupport);
        assert!(r.lambda_min < -0.1);
    }

    #[test]
    fn continuous_input_needs_mollifier() {
        let f = builtin::abs_coordinate(Vec3::x());
        assert!(matches!(
            min_q_eigen_scan(&f, &build_grid(1)),
            Err(Error::SmoothnessRequired(_))
        ));
    }

    #[test]
    fn second_variation_guard() {
        let g = build_grid(2);
        let r = min_q_eigen_scan(&builtin::constant(1.0), &g).unwrap();
        assert!(matches!(
            second_variation_positive(&builtin::constant(1.0), &r, &g),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn saddle_second_variation_positive() {
        let g = build_grid(3);
        let f = named("saddle");
        let r = min_q_eigen_scan(&f, &g).unwrap();
        let sv = second_variation_positive(&f, &r, &g).unwrap();
        assert!(sv.value > 0.0);
    }

    #[test]
    fn support_functions_give_no_witness() {
        let g = build_grid(2);
        assert!(find_bm_violation(&builtin::constant(1.0), &g)
            .unwrap()
            .is_none());
        assert!(find_bm_violation(&named("linear"), &g).unwrap().is_none());
    }

    #[test]
    fn saddle_witness_matches_quadratic_profile() {
        let g = build_grid(3);
        let f = named("saddle");
        let w = find_bm_violation(&f, &g)
            .unwrap()
            .expect("saddle is not a support function");
        assert_eq!(w.case, WitnessCase::ConeBall);
        assert!(w.bm_instance.margin < 0.0 && w.delta > 0.0);
        assert!(w.concavity_defect > 0.0);
        // F(K + s phi) is exactly quadratic in s, so the concave-root margin follows from the profile.
        let [f0, f1, f2] = w.profile;
        let at = |s: f64| f0 + f1 * s + 0.5 * f2 * s * s;
        let predicted = f0.sqrt() - 0.5 * (at(-w.s).sqrt() + at(w.s).sqrt());
        let root = w.concave_root_instance.as_ref().unwrap().margin;
        assert!(root < 0.0);
        assert!(
            (root - predicted).abs() < 1e-3 * predicted.abs(),
            "{root} vs {predicted}"
        );
        let check = verify_witness(&f, &w, 4).unwrap();
        assert!(check.verified, "{check:?}");
    }

    #[test]
    fn lipschitz_and_smoothed_second_variation_agree() {
        let f = named("saddle");
        let g = build_grid(3);
        let r = min_q_eigen_scan(&f, &g).unwrap();
        let p = Vec3::from(r.argmin_node);
        let d = Vec3::from(r.eigvec_ambient).cross(&p).normalize();
        let (eps, rad) = (0.2 / 16.0, 0.2);
        let saw = Sawtooth::new(p, d, eps, rad)
            .unwrap()
            .with_delta(eps / 32.0)
            .unwrap();
        let lip = lipschitz_second_variation(&f, &saw, 3).unwrap();
        let smooth =
            second_variation_value(&f, &saw.smoothed(), &saw.chart_quadrature(3, true)).unwrap();
        assert!(lip > 0.0 && smooth > 0.0);
        assert!(
            (lip - smooth).abs() < 0.1 * lip,
            "lipschitz {lip} smoothed {smooth}"
        );
    }
}
