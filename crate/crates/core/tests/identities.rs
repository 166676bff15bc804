use bmdetect::calculus::{
    cofactor, identity_battery, q_matrix, rotation_equivariance_residual, second_variation_sides,
    trace_det_identity_check, SymMatrix2,
};
use bmdetect::function::{builtin, rotate_function};
use bmdetect::{build_grid, tangent_basis, Vec3};
use nalgebra::{Matrix3, Rotation3};
use proptest::prelude::*;

#[test]
fn battery_passes_at_level_three() {
    let rows = identity_battery(3).unwrap();
    assert_eq!(rows.len(), 50);
    for r in &rows {
        assert!(r.passed(), "{r:?}");
    }
}

#[test]
fn ball_second_variation_is_minus_twice_dirichlet_plus_mass() {
    // f = 1: 2 int det Q(phi) = 2 int phi^2 - int |grad phi|^2 (C[I] = I)
    let g = build_grid(3);
    let phi = builtin::polynomial(vec![bmdetect::function::Monomial {
        coef: 1.0,
        powers: [1, 1, 0],
    }]);
    let (lhs, rhs) = second_variation_sides(&builtin::constant(1.0), &phi, g.quadrature()).unwrap();
    // phi = xy is a degree-2 spherical harmonic: |grad|^2 integrates to 6 int phi^2 = 6 * 4 pi / 15
    let m = 4.0 * std::f64::consts::PI / 15.0;
    let exact = 2.0 * m - 6.0 * m;
    assert!((lhs - exact).abs() < 1e-8, "{lhs} vs {exact}");
    assert!((rhs - exact).abs() < 1e-8, "{rhs} vs {exact}");
}

#[test]
fn q_of_rotated_function_is_rotated_q() {
    let f = builtin::named("cubic").unwrap().build().unwrap();
    let rho = Rotation3::from_euler_angles(1.0, 0.2, -0.6).into_inner();
    let pts: Vec<Vec3> = build_grid(2).nodes().iter().step_by(5).copied().collect();
    assert!(rotation_equivariance_residual(&f, &rho, &pts).unwrap() < 1e-6);
    let g = rotate_function(&f, &rho).unwrap();
    let u = Vec3::new(0.1, 0.9, 0.3).normalize();
    let a = q_matrix(&g, &(rho * u), &tangent_basis(&(rho * u)).unwrap()).unwrap();
    let b = q_matrix(&f, &u, &tangent_basis(&u).unwrap()).unwrap();
    for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
        assert!((x - y).abs() < 1e-6);
    }
}

#[test]
fn non_rotations_rejected() {
    let f = builtin::constant(1.0);
    assert!(rotate_function(&f, &Matrix3::from_diagonal_element(2.0)).is_err());
    assert!(rotate_function(&f, &Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0))).is_err());
}

proptest! {
    #[test]
    fn det_is_half_cofactor_contraction(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0) {
        let m = SymMatrix2 { a, b, c };
        prop_assert!(trace_det_identity_check(&m) < 1e-12 * (1.0 + m.frobenius_norm().powi(2)));
        let co = cofactor(&m);
        prop_assert!((co.a - c).abs() == 0.0 && (co.b + b).abs() == 0.0 && (co.c - a).abs() == 0.0);
    }
}
