use srk_core::experiments::{
    dist_convergence, fit_slope, orders_csv, strong_order, weak_order, Campaign, ExperimentError, Phi,
};
use srk_core::integrators::Method;
use srk_core::problem::{example61, example62, mul_log, Problem};

fn additive(methods: &[&str], ladder: &[f64], t_end: f64) -> Campaign {
    let p = Problem::Additive(example62(1.0, 1.0, 1.0));
    let m = methods.iter().map(|n| Method::parse(n, true).unwrap()).collect();
    let mut c = Campaign::new(p, m, ladder.to_vec(), t_end);
    c.reference_h = 2f64.powi(-9);
    c.paths = 200;
    c.seed = 42;
    c
}

#[test]
fn table3_trapezoid_row_slope() {
    let row = [0.12435, 0.062660, 0.031007, 0.015376, 0.0078069];
    let pts: Vec<(f64, f64)> = row.iter().enumerate().map(|(k, &e)| (2f64.powi(-4 - k as i32), e)).collect();
    let fit = fit_slope(&pts).unwrap();
    assert!((fit.slope - 1.00139).abs() < 1e-4, "{}", fit.slope);
    assert!(fit.stderr.unwrap() < 0.01);
}

#[test]
fn output_independent_of_worker_count() {
    let mut c = additive(&["trapezoid", "midpoint"], &[0.125, 0.0625], 0.5);
    c.reference_h = 2f64.powi(-7);
    c.paths = 64;
    c.threads = Some(1);
    let one = orders_csv(&strong_order(&c).unwrap());
    c.threads = Some(4);
    let four = orders_csv(&strong_order(&c).unwrap());
    assert_eq!(one, four);
}

#[test]
fn reference_against_itself_has_zero_error() {
    let mut c = additive(&["trapezoid"], &[2f64.powi(-6)], 0.5);
    c.reference_h = 2f64.powi(-6);
    c.paths = 20;
    let est = strong_order(&c).unwrap();
    assert_eq!(est[0].points[0].error, 0.0);
    assert!(est[0].slope.is_none());
}

#[test]
fn stderr_shrinks_like_inverse_root_m() {
    let mut c = additive(&["midpoint"], &[0.125, 0.0625], 0.5);
    c.reference_h = 2f64.powi(-7);
    c.paths = 250;
    let small = strong_order(&c).unwrap()[0].points[0].stderr;
    c.paths = 1000;
    let large = strong_order(&c).unwrap()[0].points[0].stderr;
    let ratio = large / small;
    assert!((0.4..=0.6).contains(&ratio), "{ratio}");
}

#[test]
fn constant_test_function_has_zero_errors() {
    let p = Problem::Additive(example61(1.0, 1.0));
    let m = vec![Method::parse("trapezoid", true).unwrap()];
    let mut c = Campaign::new(p, m, vec![0.125, 0.0625], 0.25);
    c.reference_h = 2f64.powi(-7);
    c.paths = 16;
    for d in dist_convergence(&c, &[Phi::Constant(2.0)]).unwrap() {
        assert_eq!(d.err, 0.0);
    }
    let w = weak_order(&c, &[Phi::Constant(2.0)]).unwrap();
    assert!(w[0].points.iter().all(|p| p.error == 0.0 && !p.used_in_fit));
}

#[test]
fn weak_test_without_signal_is_reported() {
    let mut c = additive(&["trapezoid"], &[0.0625, 0.03125, 0.015625], 0.25);
    c.paths = 20;
    match weak_order(&c, &[Phi::ExpNeg]) {
        Err(ExperimentError::NoSignal { label }) => assert!(label.contains("trapezoid")),
        other => panic!("expected NoSignal, got {other:?}"),
    }
}

#[test]
fn multiplicative_campaign_defaults_to_midpoint_reference() {
    let p = Problem::Multiplicative(mul_log(1.0));
    let c = Campaign::new(p, vec![Method::parse("midpoint", false).unwrap()], vec![0.25], 1.0);
    assert_eq!(c.reference_method().label(), "midpoint");
}

#[test]
fn invalid_campaigns_are_rejected() {
    let mut c = additive(&["trapezoid"], &[0.3], 1.0);
    assert!(matches!(strong_order(&c), Err(ExperimentError::InvalidCampaign(_))));
    c.h_ladder = vec![0.25];
    c.paths = 0;
    assert!(matches!(strong_order(&c), Err(ExperimentError::InvalidCampaign(_))));
}
