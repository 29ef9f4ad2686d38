use proptest::prelude::*;
use srk_core::problem::{
    builtin_problem, linear_multiplicative, mul_log, validate_derivatives, DerivedCoefficients, Problem,
    ValidationSettings, BUILTIN_PROBLEMS,
};
use srk_core::tableau::{multiplicative_builtin, Contractions};
use srk_core::State;
use std::collections::BTreeMap;

fn l(x: f64) -> f64 {
    (1.0 + x * x).ln()
}
fn l1(x: f64) -> f64 {
    2.0 * x / (1.0 + x * x)
}
fn l2(x: f64) -> f64 {
    let q = 1.0 + x * x;
    2.0 * (1.0 - x * x) / (q * q)
}

fn fbar_oracle(x: f64) -> f64 {
    l(x) + 0.5 * l1(x) * l(x)
}

fn diff(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-5;
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

#[test]
fn g1_matches_independent_formula() {
    let d = DerivedCoefficients::new(&mul_log(1.0), &multiplicative_builtin("midpoint").unwrap());
    for &x in &[-2.0, -0.7, 0.0, 0.3, 1.0, 2.5] {
        let expected = diff(fbar_oracle, x) * l(x) - l1(x) * fbar_oracle(x) - 0.5 * l2(x) * l(x) * l(x);
        let got = d.g1(&State::scalar(x))[0];
        assert!((got - expected).abs() < 1e-8, "x = {x}: {got} vs {expected}");
    }
}

#[test]
fn ito_drift_derivative_matches_difference_of_ito_drift() {
    let p = mul_log(1.0);
    for &x in &[-1.5, -0.2, 0.4, 1.0, 3.0] {
        let y = State::scalar(x);
        let fd = diff(|s| p.fbar(&State::scalar(s))[0], x);
        assert!((p.dfbar(&y, &State::scalar(1.0))[0] - fd).abs() < 1e-8);
        assert!((p.fbar(&y)[0] - fbar_oracle(x)).abs() < 1e-14);
    }
}

#[test]
fn midpoint_f_terms_on_linear_problem() {
    let (a, b) = (-0.8, 0.6);
    let d = DerivedCoefficients::new(&linear_multiplicative(a, b, 1.0), &multiplicative_builtin("midpoint").unwrap());
    let y = State::scalar(1.7);
    let v = d.evaluate(&y);
    assert!((v.f1[0] - a * b * 1.7).abs() < 1e-14);
    assert!((v.f2[0] - 0.25 * b.powi(3) * 1.7).abs() < 1e-14);
    assert!((v.f4[0] - 0.125 * b.powi(4) * 1.7).abs() < 1e-14);
    assert!((v.unified[0]).abs() < 1e-14);
    assert!((v.fbar[0] - (a + 0.5 * b * b) * 1.7).abs() < 1e-14);
}

#[test]
fn every_builtin_passes_derivative_validation() {
    for name in BUILTIN_PROBLEMS {
        let p = builtin_problem(name, &BTreeMap::new()).unwrap();
        let report = validate_derivatives(&p, &ValidationSettings::default()).unwrap();
        assert!(report.max_rel_error() < 1e-6, "{name}: {report:?}");
    }
}

fn residual_vector() -> impl Strategy<Value = [f64; 14]> {
    prop::array::uniform14(-2.0f64..2.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn h_terms_are_linear_in_residuals(r1 in residual_vector(), r2 in residual_vector(), x in -2.0f64..2.0) {
        let p = mul_log(1.0);
        let y = State::scalar(x);
        let sum: [f64; 14] = std::array::from_fn(|k| r1[k] + r2[k]);
        let eval = |r: [f64; 14]| DerivedCoefficients::from_contractions(&p, Contractions::from_residuals(r)).evaluate(&y);
        let (a, b, c) = (eval(r1), eval(r2), eval(sum));
        for (u, v, w) in [(&a.h1, &b.h1, &c.h1), (&a.h2, &b.h2, &c.h2), (&a.h3, &b.h3, &c.h3)] {
            let lhs = w[0];
            let rhs = u[0] + v[0];
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()), "{} vs {}", lhs, rhs);
        }
    }

    #[test]
    fn h_terms_vanish_with_zero_residuals(x in -3.0f64..3.0) {
        for p in [mul_log(1.0), linear_multiplicative(-1.0, 0.5, 1.0)] {
            let d = DerivedCoefficients::from_contractions(&p, Contractions::from_residuals([0.0; 14]));
            let v = d.evaluate(&State::scalar(x));
            prop_assert_eq!(v.h1[0], 0.0);
            prop_assert_eq!(v.h2[0], 0.0);
            prop_assert_eq!(v.h3[0], 0.0);
        }
    }
}

#[test]
fn additive_problem_reports_noise_dimension() {
    let p = builtin_problem("example62", &BTreeMap::new()).unwrap();
    assert!(matches!(p, Problem::Additive(_)));
    assert_eq!(p.noise_dim(), 2);
}
