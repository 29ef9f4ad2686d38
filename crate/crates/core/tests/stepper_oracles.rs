use proptest::prelude::*;
use srk_core::experiments::mean_stderr;
use srk_core::integrators::{euler_step, srk_add_step, srk_mul_step, StepperConfig};
use srk_core::noise::{BrownianPath, PathSpec};
use srk_core::problem::{example61, example62, linear_additive, mul_log};
use srk_core::tableau::{additive_builtin, multiplicative_builtin, AdditiveTableau, Coef};
use srk_core::State;

/// Root of an increasing scalar function on `[lo, hi]`.
fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    assert!(g(lo) < 0.0 && g(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn theta_stage_matches_bisection(
        x in -3.0f64..3.0,
        dw in -0.3f64..0.3,
        theta in 0.3f64..1.0,
        k in 4i32..9,
    ) {
        let h = 2f64.powi(-k);
        let p = example61(1.0, 1.0);
        let tab = AdditiveTableau::theta(Coef::Approx(theta)).stage_coefficients();
        let out = srk_add_step(&p, &tab, &State::scalar(x), h, &[dw], &StepperConfig::default()).unwrap();
        let f = |z: f64| -10.0 * z + z.sin();
        let z = bisect(|z| z - x - h * theta * f(z) - theta * dw, -20.0, 20.0);
        prop_assert!((out.stages[0][0] - z).abs() < 1e-10);
        let next = x + h * f(z) + dw;
        prop_assert!((out.state[0] - next).abs() < 1e-10);
    }

    #[test]
    fn midpoint_stage_matches_bisection(
        y in -2.0f64..2.0,
        dw in -0.2f64..0.2,
        k in 4i32..10,
    ) {
        let h = 2f64.powi(-k);
        let p = mul_log(1.0);
        let tab = multiplicative_builtin("midpoint").unwrap().stage_coefficients();
        let out = srk_mul_step(&p, &tab, &State::scalar(y), h, dw, &StepperConfig::default()).unwrap();
        let l = |z: f64| (1.0 + z * z).ln();
        let z = bisect(|z| z - y - 0.5 * (h + dw) * l(z), -20.0, 20.0);
        prop_assert!((out.stages[0][0] - z).abs() < 1e-10);
        prop_assert!((out.state[0] - (y + (h + dw) * l(z))).abs() < 1e-10);
    }

    #[test]
    fn trapezoid_stages_stay_near_the_state(
        x in -5.0f64..5.0,
        dw1 in -0.5f64..0.5,
        dw2 in -0.5f64..0.5,
        k in 4i32..10,
    ) {
        let h = 2f64.powi(-k);
        let p = example62(1.0, 1.0, 1.0);
        let tab = additive_builtin("trapezoid").unwrap().stage_coefficients();
        let out = srk_add_step(&p, &tab, &State::scalar(x), h, &[dw1, dw2], &StepperConfig::default()).unwrap();
        let fmax = x.abs() + 10.0 + (1.0 + (x.abs() + 10.0).powi(2)).ln();
        for z in &out.stages {
            prop_assert!((z[0] - x).abs() <= h * fmax + dw1.abs() + dw2.abs());
        }
    }
}

#[test]
fn euler_weak_mean_on_linear_problem() {
    let (a, sigma, x0) = (-1.0, 0.8, 1.0);
    let p = linear_additive(a, &[sigma], x0);
    let (steps, t_end) = (16, 1.0);
    let h = t_end / steps as f64;
    let terminal: Vec<f64> = (0..20000u64)
        .map(|i| {
            let path = BrownianPath::generate(&PathSpec::new(t_end, steps, 1, 3, i), 3.0).unwrap();
            let mut x = State::scalar(x0);
            for n in 0..steps {
                x = euler_step(|x| (p.f)(x), |_| p.sigma.clone(), &x, h, path.increment(n));
            }
            x[0]
        })
        .collect();
    let (m, se) = mean_stderr(&terminal);
    let expected = x0 * (1.0 + a * h).powi(steps as i32);
    assert!((m - expected).abs() < 4.0 * se, "{m} vs {expected}");
    let var_expected = sigma * sigma * h * (0..steps).map(|k| (1.0 + a * h).powi(2 * k as i32)).sum::<f64>();
    let sq: Vec<f64> = terminal.iter().map(|x| (x - expected).powi(2)).collect();
    let (v, se) = mean_stderr(&sq);
    assert!((v - var_expected).abs() < 4.0 * se, "{v} vs {var_expected}");
}
