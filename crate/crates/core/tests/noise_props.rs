use proptest::prelude::*;
use srk_core::experiments::{fit_slope, mean_stderr};
use srk_core::noise::{
    double_integral, triple_integral, truncate, truncate_increment, truncation_bound, BrownianPath, PathSpec,
};

/// `E(ξ − ζ)²` for standard normal ξ by Simpson quadrature over the tail.
fn truncation_moment(h: f64, kappa: f64) -> f64 {
    let a = truncation_bound(h, kappa).unwrap();
    let (lo, hi, n) = (a, a + 14.0, 20000);
    let dx = (hi - lo) / n as f64;
    let integrand = |x: f64| {
        let d = x - truncate(x, a);
        d * d * (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
    };
    let mut s = integrand(lo) + integrand(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * integrand(lo + i as f64 * dx);
    }
    2.0 * s * dx / 3.0
}

#[test]
fn truncation_moment_decay_exponent() {
    for kappa in [2.0, 3.0] {
        let pts: Vec<(f64, f64)> = (4..=14)
            .map(|k| {
                let h = 2f64.powi(-k);
                (h, truncation_moment(h, kappa))
            })
            .collect();
        let slope = fit_slope(&pts).unwrap().slope;
        assert!(slope >= kappa - 0.5, "kappa {kappa}: exponent {slope}");
    }
}

#[test]
fn truncated_increments_respect_the_bound() {
    let spec = PathSpec::new(1.0, 256, 2, 11, 3);
    let p = BrownianPath::generate(&spec, 3.0).unwrap();
    let bound = p.h().sqrt() * p.bound().unwrap();
    for (raw, cut) in p.increments().iter().zip(p.truncated()) {
        assert!(cut.abs() <= bound);
        if raw.abs() <= bound {
            assert_eq!(raw, cut);
        }
    }
    assert_eq!(truncate_increment(2.0, 0.01, truncation_bound(0.01, 3.0)), 0.1 * truncation_bound(0.01, 3.0).unwrap());
}

#[test]
fn iterated_integrals_on_dyadic_values() {
    assert_eq!(double_integral(0.5, 0.25), 0.0);
    assert_eq!(double_integral(1.0, 0.25), 0.375);
    assert_eq!(triple_integral(1.0, 0.25), (1.0 - 0.75) / 6.0);
    assert_eq!(triple_integral(0.5, 0.25), 0.5 * double_integral(0.5, 0.25) / 3.0 - 0.25 * 0.5 / 3.0);
}

#[test]
fn iterated_integral_moments() {
    let h = 0.01;
    let spec = PathSpec::new(h * 40000.0, 40000, 1, 5, 0);
    let p = BrownianPath::generate(&spec, 3.0).unwrap();
    let (i2, i3) = p.iterated_integrals().unwrap();
    let check = |xs: Vec<f64>, mean: f64, label: &str| {
        let (m, se) = mean_stderr(&xs);
        assert!((m - mean).abs() < 4.0 * se, "{label}: {m} vs {mean} (se {se})");
    };
    check(i2.to_vec(), 0.0, "E I2");
    check(i2.iter().map(|x| x * x).collect(), h * h / 2.0, "E I2^2");
    check(i3.to_vec(), 0.0, "E I3");
    check(i3.iter().map(|x| x * x).collect(), h * h * h / 6.0, "E I3^2");
    let dw = p.increments();
    check(i3.iter().zip(dw).map(|(a, b)| a * b).collect(), 0.0, "E I3 dW");
}

#[test]
fn bridge_halves_have_half_variance() {
    let spec = PathSpec::new(4000.0, 4000, 1, 21, 0);
    let p = BrownianPath::generate(&spec, 3.0).unwrap();
    let fine = p.refine();
    let sq: Vec<f64> = fine.increments().iter().map(|x| x * x).collect();
    let (m, se) = mean_stderr(&sq);
    assert!((m - 0.5).abs() < 4.0 * se, "{m}");
    let cross: Vec<f64> = fine.increments().chunks(2).map(|c| c[0] * c[1]).collect();
    let (m, se) = mean_stderr(&cross);
    assert!(m.abs() < 4.0 * se, "{m}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn refined_path_sums_back_exactly(seed in any::<u64>(), idx in 0u64..1000, steps in 1usize..40, dim in 1usize..3) {
        let spec = PathSpec::new(0.75, steps, dim, seed, idx);
        let p = BrownianPath::generate(&spec, 3.0).unwrap();
        let fine = p.refine().refine();
        let back = fine.coarsen(4).unwrap();
        prop_assert_eq!(back.increments(), p.increments());
    }

    #[test]
    fn coarsening_composes(seed in any::<u64>(), idx in 0u64..1000) {
        let spec = PathSpec::new(1.0, 64, 1, seed, idx);
        let p = BrownianPath::generate(&spec, 3.0).unwrap();
        let direct = p.coarsen(8).unwrap();
        let staged = p.coarsen(2).unwrap().coarsen(4).unwrap();
        prop_assert_eq!(direct.increments(), staged.increments());
    }
}
