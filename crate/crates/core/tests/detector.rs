use bmdetect::bodies::{support_convexity_oracle, BodySpec};
use bmdetect::detector::{
    detect, detection_tolerance, find_bm_violation, min_q_eigen_scan, verify_witness, Decision,
    DetectOptions,
};
use bmdetect::function::{builtin, rotate_function};
use bmdetect::functional::evaluate_f;
use bmdetect::{build_grid, SphericalFunction, Vec3};
use nalgebra::Rotation3;

fn named(n: &str) -> SphericalFunction {
    builtin::named(n).unwrap().build().unwrap()
}

#[test]
fn support_decisions_are_sound() {
    let g = build_grid(3);
    for (name, spec) in builtin::support_family() {
        let f = spec.build().unwrap();
        let r = min_q_eigen_scan(&f, &g).unwrap();
        assert_eq!(r.decision, Decision::Support, "{name}");
        if r.lambda_min > 10.0 * detection_tolerance(&f, &g) {
            assert!(support_convexity_oracle(&f, 100_000).is_convex(), "{name}");
        }
    }
}

#[test]
fn detection_is_rotation_covariant() {
    let g = build_grid(3);
    let rho = Rotation3::from_euler_angles(0.7, -0.3, 1.9).into_inner();
    for name in ["saddle", "tilted", "ellipsoid", "constant"] {
        let f = named(name);
        let fr = rotate_function(&f, &rho).unwrap();
        let a = find_bm_violation(&f, &g).unwrap();
        let b = find_bm_violation(&fr, &g).unwrap();
        assert_eq!(a.is_some(), b.is_some(), "{name}");
        if let (Some(a), Some(b)) = (a, b) {
            // the bad point of the rotated function is a bad point of f after rotating back
            let p = rho.transpose() * Vec3::from(b.p);
            let frame = bmdetect::tangent_basis(&p).unwrap();
            let q = bmdetect::calculus::q_matrix(&f, &p, &frame).unwrap();
            assert!(q.lambda_min() < 0.0, "{name}");
            assert!(a.bm_instance.margin < 0.0 && b.bm_instance.margin < 0.0);
        }
    }
}

#[test]
fn witness_bodies_survive_serialization() {
    let g = build_grid(3);
    let f = named("tilted");
    let w = find_bm_violation(&f, &g).unwrap().unwrap();
    let json = serde_json::to_value(&w).unwrap();
    let bodies = &json["bm_instance"]["bodies"];
    let k0: BodySpec = serde_json::from_value(bodies[0].clone()).unwrap();
    let k1: BodySpec = serde_json::from_value(bodies[1].clone()).unwrap();
    let (v0, v1) = (
        evaluate_f(&f, &k0.build().unwrap(), &g).unwrap(),
        evaluate_f(&f, &k1.build().unwrap(), &g).unwrap(),
    );
    assert!((v0 - w.bm_instance.values[0]).abs() < 1e-12);
    assert!((v1 - w.bm_instance.values[1]).abs() < 1e-12);
    assert!(verify_witness(&f, &w, 4).unwrap().verified);
}

#[test]
fn negative_constant_uses_smooth_base() {
    let g = build_grid(3);
    let w = find_bm_violation(&named("negative"), &g).unwrap().unwrap();
    assert_eq!(w.case, bmdetect::detector::WitnessCase::NegativeSmooth);
    assert!(w.bm_instance.values.iter().all(|v| *v < 0.0));
    assert!(w.bm_instance.margin < 0.0);
}

#[test]
fn continuous_concave_input_is_mollified_and_rejected() {
    let g = build_grid(2);
    let f = builtin::abs_coordinate(Vec3::x()).scale(-1.0);
    let opts = DetectOptions {
        mollify_k: 5,
        mollify_samples: 1000,
        seed: 3,
    };
    let d = detect(&f, &g, &opts).unwrap();
    assert!(d.mollified.is_some());
    assert_eq!(d.report.decision, Decision::NotSupport);
    assert!(d.witness.unwrap().bm_instance.margin < 0.0);
}
