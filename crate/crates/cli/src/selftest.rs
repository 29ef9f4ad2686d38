//! Fast built-in checks run by `srk selftest`.

use srk_core::experiments::mean_stderr;
use srk_core::integrators::{srk_add_step, srk_mul_step, StepperConfig};
use srk_core::noise::{double_integral, triple_integral, BrownianPath, PathSpec};
use srk_core::problem::{builtin_problem, example61, mul_log, validate_derivatives, ValidationSettings, BUILTIN_PROBLEMS};
use srk_core::tableau::{additive_builtin, multiplicative_builtin, AdditiveTableau, Coef};
use srk_core::State;
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub failures: Vec<String>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// η2 of the four catalog methods.
pub fn eta2_table() -> Vec<(&'static str, Coef)> {
    vec![
        ("trapezoid", Coef::int(0)),
        ("midpoint", Coef::ratio(1, 16)),
        ("sqrt2-method", Coef::Approx((3.0 - 2.0 * 2f64.sqrt()) / 2.0)),
        ("implicit-euler", Coef::ratio(3, 4)),
    ]
}

pub fn tableau_suite(expected: &[(&str, Coef)]) -> SuiteResult {
    let mut failures = Vec::new();
    for (name, want) in expected {
        let got = match additive_builtin(name) {
            Ok(t) => t.eta2().eta.expect("additive report has eta"),
            Err(e) => {
                failures.push(format!("{name}: {e}"));
                continue;
            }
        };
        let ok = if got.is_exact() && want.is_exact() {
            &got == want
        } else {
            (got.to_f64() - want.to_f64()).abs() < 1e-9
        };
        if !ok {
            failures.push(format!("eta2 row {name}: computed {got}, expected {want}"));
        }
    }
    let mid = multiplicative_builtin("midpoint").expect("builtin");
    if !mid.check_strong1().strong_order_one() {
        failures.push("implicit midpoint fails the strong order one conditions".into());
    }
    if mid.eta1().eta != Some(Coef::ratio(47, 288)) {
        failures.push(format!("implicit midpoint eta1 = {:?}, expected 47/288", mid.eta1().eta));
    }
    SuiteResult {
        name: "tableau",
        failures,
    }
}

pub fn derivative_suite() -> SuiteResult {
    let mut failures = Vec::new();
    for name in BUILTIN_PROBLEMS {
        let p = builtin_problem(name, &BTreeMap::new()).expect("builtin");
        match validate_derivatives(&p, &ValidationSettings::default()) {
            Ok(r) if r.max_rel_error() < 1e-6 => {}
            Ok(r) => failures.push(format!("{name}: relative error {:.2e}", r.max_rel_error())),
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    }
    SuiteResult {
        name: "derivatives",
        failures,
    }
}

type Integral = fn(f64, f64) -> f64;

/// Moments of the iterated integrals against their closed forms over `m` draws.
pub fn moment_suite(i2: Integral, i3: Integral, m: usize) -> SuiteResult {
    let h = 0.01;
    let path = BrownianPath::generate(&PathSpec::new(h * m as f64, m, 1, 99, 0), 3.0).expect("valid spec");
    let dw = path.increments();
    let mut failures = Vec::new();
    let mut check = |label: &str, xs: Vec<f64>, want: f64| {
        let (mean, se) = mean_stderr(&xs);
        if (mean - want).abs() > 5.0 * se {
            failures.push(format!("{label}: {mean:.4e} vs {want:.4e} (stderr {se:.1e})"));
        }
    };
    check("E I2", dw.iter().map(|&w| i2(w, h)).collect(), 0.0);
    check("E I2^2", dw.iter().map(|&w| i2(w, h).powi(2)).collect(), h * h / 2.0);
    check("E I2 dW", dw.iter().map(|&w| i2(w, h) * w).collect(), 0.0);
    check("E I3", dw.iter().map(|&w| i3(w, h)).collect(), 0.0);
    check("E I3^2", dw.iter().map(|&w| i3(w, h).powi(2)).collect(), h * h * h / 6.0);
    check("E I3 dW", dw.iter().map(|&w| i3(w, h) * w).collect(), 0.0);
    SuiteResult {
        name: "iterated-integrals",
        failures,
    }
}

fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
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

/// Implicit stage values against bisection.
pub fn stepper_suite() -> SuiteResult {
    let cfg = StepperConfig::default();
    let mut failures = Vec::new();
    let p = example61(1.0, 1.0);
    let f = |z: f64| -10.0 * z + z.sin();
    for &(x, dw, theta, h) in &[(1.0, 0.1, 0.5, 0.0625), (-2.0, -0.2, 1.0, 0.03125), (0.3, 0.05, 0.7, 0.015625)] {
        let tab = AdditiveTableau::theta(Coef::Approx(theta)).stage_coefficients();
        let z = bisect(|z| z - x - h * theta * f(z) - theta * dw, -50.0, 50.0);
        match srk_add_step(&p, &tab, &State::scalar(x), h, &[dw], &cfg) {
            Ok(out) if (out.stages[0][0] - z).abs() < 1e-10 => {}
            Ok(out) => failures.push(format!("theta {theta}: stage {} vs {z}", out.stages[0][0])),
            Err(e) => failures.push(format!("theta {theta}: {e}")),
        }
    }
    let q = mul_log(1.0);
    let tab = multiplicative_builtin("midpoint").expect("builtin").stage_coefficients();
    let l = |z: f64| (1.0 + z * z).ln();
    for &(y, dw, h) in &[(1.0, 0.1, 0.0625), (-0.5, -0.05, 0.01)] {
        let z = bisect(|z| z - y - 0.5 * (h + dw) * l(z), -50.0, 50.0);
        match srk_mul_step(&q, &tab, &State::scalar(y), h, dw, &cfg) {
            Ok(out) if (out.stages[0][0] - z).abs() < 1e-10 => {}
            Ok(out) => failures.push(format!("midpoint: stage {} vs {z}", out.stages[0][0])),
            Err(e) => failures.push(format!("midpoint: {e}")),
        }
    }
    SuiteResult {
        name: "stepper",
        failures,
    }
}

pub fn run_all() -> Vec<SuiteResult> {
    vec![
        tableau_suite(&eta2_table()),
        derivative_suite(),
        moment_suite(double_integral, triple_integral, 200_000),
        stepper_suite(),
    ]
}
