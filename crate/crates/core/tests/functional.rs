use std::f64::consts::PI;

use bmdetect::bodies::{random_smooth_body, ConvexBody};
use bmdetect::function::{builtin, Monomial};
use bmdetect::functional::{
    bm_check, evaluate_f, mixed_volume, normalize_pair, planar_additivity_residual,
    variation_profile, Form,
};
use bmdetect::planar::PlanarBody;
use bmdetect::{build_grid, Error, Vec3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn support(b: &ConvexBody) -> bmdetect::SphericalFunction {
    match b {
        ConvexBody::Smooth(h) => h.clone(),
        _ => unreachable!(),
    }
}

#[test]
fn ball_dilation_profile_is_exact() {
    // F(B_{1+s}) = 4 pi (1+s)^2 for f = 1
    let p = variation_profile(
        &builtin::constant(1.0),
        &builtin::constant(1.0),
        &builtin::constant(1.0),
        &build_grid(2),
    )
    .unwrap();
    assert!((p.f0 - 4.0 * PI).abs() < 1e-9);
    assert!((p.f1 - 8.0 * PI).abs() < 1e-8);
    assert!((p.f2 - 8.0 * PI).abs() < 1e-8);
    assert!(p.consistent());
}

#[test]
fn translations_do_not_vary_f() {
    let g = build_grid(3);
    let h = support(&random_smooth_body(&mut ChaCha8Rng::seed_from_u64(3)));
    let f = builtin::named("cubic").unwrap().build().unwrap();
    let p = variation_profile(&f, &h, &builtin::linear(Vec3::new(0.2, 0.5, -0.1)), &g).unwrap();
    assert!(p.f1.abs() < 1e-7 && p.f2.abs() < 1e-7, "{p:?}");
}

#[test]
fn mixed_volume_of_ball_and_ball() {
    let g = build_grid(2);
    let v = mixed_volume(&ConvexBody::ball(2.0), &builtin::constant(0.5), &g).unwrap();
    // V(2B, 2B, B/2) = 4 * 0.5 * Vol(B)
    assert!((v - 2.0 * 4.0 * PI / 3.0).abs() < 1e-9);
}

#[test]
fn mixed_volume_rejects_non_support_functions() {
    let f = builtin::named("saddle").unwrap().build().unwrap();
    assert!(matches!(
        mixed_volume(&ConvexBody::ball(1.0), &f, &build_grid(2)),
        Err(Error::InvalidBody(_))
    ));
}

#[test]
fn min_form_margin_zero_on_identical_normalized_pair() {
    let g = build_grid(2);
    let k = random_smooth_body(&mut ChaCha8Rng::seed_from_u64(1));
    let f = builtin::constant(1.0);
    let v = evaluate_f(&f, &k, &g).unwrap();
    let n = normalize_pair(&k, &k.scaled(2.0), 0.3, v, 4.0 * v).unwrap();
    let (a, b) = (
        evaluate_f(&f, &n.k0, &g).unwrap(),
        evaluate_f(&f, &n.k1, &g).unwrap(),
    );
    assert!((a - 1.0).abs() < 1e-9 && (b - 1.0).abs() < 1e-9);
    let r = bm_check(&f, &n.k0, &n.k1, n.t, Form::MinForm, &g).unwrap();
    assert!(r.margin.abs() < 1e-9);
}

#[test]
fn ellipse_area_and_perimeter() {
    let e = PlanarBody::Ellipse {
        a: 2.0,
        b: 0.5,
        angle: 0.4,
    };
    assert!((e.area() - PI).abs() < 1e-10);
    // polygon oracle for the perimeter
    let n = 200_000;
    let pt = |k: usize| {
        let t = 2.0 * PI * k as f64 / n as f64;
        let (x, y) = (2.0 * t.cos(), 0.5 * t.sin());
        (x, y)
    };
    let poly: f64 = (0..n)
        .map(|k| {
            let (a, b) = (pt(k), pt(k + 1));
            (a.0 - b.0).hypot(a.1 - b.1)
        })
        .sum();
    assert!(
        (e.perimeter() - poly).abs() < 1e-8,
        "{} vs {poly}",
        e.perimeter()
    );
}

#[test]
fn planar_additivity_for_disks() {
    let d = |r| PlanarBody::Disk {
        r,
        center: [0.1, -0.3],
    };
    let f = bmdetect::planar::CircleFunction::new(|p: f64| p.cos().abs() - 0.2);
    assert!(planar_additivity_residual(&d(1.0), &d(0.5), &f).unwrap() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Minkowski's first inequality `V(K, K, L)^3 >= Vol(K)^2 Vol(L)`.
    #[test]
    fn minkowski_first_inequality(seed in 0u64..10_000) {
        let g = build_grid(3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (k, l) = (random_smooth_body(&mut rng), random_smooth_body(&mut rng));
        let (hk, hl) = (support(&k), support(&l));
        let vk = evaluate_f(&hk, &k, &g).unwrap() / 3.0;
        let vl = evaluate_f(&hl, &l, &g).unwrap() / 3.0;
        let mixed = evaluate_f(&hl, &k, &g).unwrap() / 3.0;
        prop_assert!(mixed.powi(3) >= vk * vk * vl * (1.0 - 1e-9));
    }

    /// Surface area obeys the concave-root Brunn-Minkowski inequality.
    #[test]
    fn surface_area_concave_root(seed in 0u64..10_000, t in 0.05f64..0.95) {
        let g = build_grid(3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (k0, k1) = (random_smooth_body(&mut rng), random_smooth_body(&mut rng));
        let r = bm_check(&builtin::constant(1.0), &k0, &k1, t, Form::ConcaveRoot, &g).unwrap();
        prop_assert!(r.margin >= -1e-9, "{:?}", r.values);
    }

    #[test]
    fn even_f_odd_phi_on_ball_has_no_first_variation(c in -1.0f64..1.0) {
        let f = builtin::zonal(Vec3::z(), vec![1.0, 0.0, c]);
        let phi = builtin::polynomial(vec![Monomial { coef: 1.0, powers: [1, 2, 0] }, Monomial { coef: c, powers: [0, 0, 3] }]);
        let p = variation_profile(&f, &builtin::constant(1.0), &phi, &build_grid(3)).unwrap();
        prop_assert!(p.f1.abs() < 1e-7);
    }
}
