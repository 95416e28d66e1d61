mod common;

use common::{fd_bracket, field, max_abs, point, scalar};
use proptest::prelude::*;
use sdstab::lie::{directional_derivative, iterated_adjoint, lie_bracket, VectorField};
use sdstab::symcalc::Expr;

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bracket_matches_finite_difference_jacobians(x in field(3), y in field(3), at in point(3)) {
        let sym = lie_bracket(&x, &y).unwrap().eval(&at).unwrap();
        let (fd, scale) = fd_bracket(&x, &y, &at, 1e-4);
        let err = max_abs(&sym.iter().zip(&fd).map(|(a, b)| a - b).collect::<Vec<_>>());
        prop_assert!(err <= 1e-5 * (1.0 + scale.max(max_abs(&sym))), "err {err}, scale {scale}");
    }

    #[test]
    fn bracket_is_antisymmetric(x in field(3), y in field(3), at in point(3)) {
        let xy = lie_bracket(&x, &y).unwrap().eval(&at).unwrap();
        let yx = lie_bracket(&y, &x).unwrap().eval(&at).unwrap();
        prop_assert!(max_abs(&add(&xy, &yx)) <= 1e-8 * (1.0 + max_abs(&xy)));
    }

    #[test]
    fn jacobi_identity(x in field(2), y in field(2), z in field(2), at in point(2)) {
        let t1 = lie_bracket(&x, &lie_bracket(&y, &z).unwrap()).unwrap().eval(&at).unwrap();
        let t2 = lie_bracket(&y, &lie_bracket(&z, &x).unwrap()).unwrap().eval(&at).unwrap();
        let t3 = lie_bracket(&z, &lie_bracket(&x, &y).unwrap()).unwrap().eval(&at).unwrap();
        let scale = 1.0 + max_abs(&t1) + max_abs(&t2) + max_abs(&t3);
        prop_assert!(max_abs(&add(&add(&t1, &t2), &t3)) <= 1e-8 * scale);
    }

    #[test]
    fn bracket_acts_as_commutator_of_derivations(x in field(3), y in field(3), v in scalar(3), at in point(3)) {
        let lhs = directional_derivative(&lie_bracket(&x, &y).unwrap(), &v).unwrap().eval(&at).unwrap();
        let xy = directional_derivative(&x, &directional_derivative(&y, &v).unwrap()).unwrap().eval(&at).unwrap();
        let yx = directional_derivative(&y, &directional_derivative(&x, &v).unwrap()).unwrap().eval(&at).unwrap();
        prop_assert!((lhs - (xy - yx)).abs() <= 1e-8 * (1.0 + xy.abs() + yx.abs()));
    }

    #[test]
    fn leibniz_rule_for_scaled_fields(x in field(2), y in field(2), phi in scalar(2), at in point(2)) {
        // [X, phi Y] = (X phi) Y + phi [X, Y]
        let phi_y = VectorField::new(y.components().iter().map(|c| Expr::mul(phi.body().clone(), c.clone())).collect(), 2).unwrap();
        let lhs = lie_bracket(&x, &phi_y).unwrap().eval(&at).unwrap();
        let xphi = directional_derivative(&x, &phi).unwrap().eval(&at).unwrap();
        let p = phi.eval(&at).unwrap();
        let yv = y.eval(&at).unwrap();
        let br = lie_bracket(&x, &y).unwrap().eval(&at).unwrap();
        let rhs: Vec<f64> = yv.iter().zip(&br).map(|(a, b)| xphi * a + p * b).collect();
        let scale = 1.0 + max_abs(&lhs) + max_abs(&rhs);
        prop_assert!(max_abs(&lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect::<Vec<_>>()) <= 1e-8 * scale);
    }

    #[test]
    fn directional_derivative_is_linear_in_the_field(x in field(2), y in field(2), v in scalar(2), a in -3.0..3.0f64, at in point(2)) {
        let comb = x.combine(a, &y, 1.0).unwrap();
        let lhs = directional_derivative(&comb, &v).unwrap().eval(&at).unwrap();
        let rhs = a * directional_derivative(&x, &v).unwrap().eval(&at).unwrap() + directional_derivative(&y, &v).unwrap().eval(&at).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs() + rhs.abs()));
    }

    #[test]
    fn first_adjoint_is_the_bracket(x in field(2), y in field(2), at in point(2)) {
        let a = iterated_adjoint(&y, &x, 1).unwrap().eval(&at).unwrap();
        let b = lie_bracket(&y, &x).unwrap().eval(&at).unwrap();
        prop_assert!(max_abs(&a.iter().zip(&b).map(|(p, q)| p - q).collect::<Vec<_>>()) <= 1e-9 * (1.0 + max_abs(&b)));
    }
}
