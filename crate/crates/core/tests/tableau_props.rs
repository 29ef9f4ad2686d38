use proptest::prelude::*;
use srk_core::tableau::{additive_builtin, AdditiveTableau, Coef, Tableau};

fn coef() -> impl Strategy<Value = Coef> {
    (-6i64..=6, 1i64..=5).prop_map(|(n, d)| Coef::ratio(n, d))
}

fn square(s: usize) -> impl Strategy<Value = Vec<Vec<Coef>>> {
    prop::collection::vec(prop::collection::vec(coef(), s), s)
}

fn tableau() -> impl Strategy<Value = Tableau> {
    (1usize..=3).prop_flat_map(|s| {
        (
            square(s),
            square(s),
            prop::collection::vec(coef(), s),
            prop::collection::vec(coef(), s),
            Just(s),
        )
            .prop_map(|(a, b, alpha, beta, _)| Tableau::new("random", a, b, alpha, beta).unwrap())
    })
}

fn rotation(s: usize, k: usize) -> Vec<usize> {
    (0..s).map(|i| (i + k) % s).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn theta_family_eta2_closed_form(n in -20i64..=20, d in 1i64..=12) {
        let theta = Coef::ratio(n, d);
        let half = Coef::ratio(1, 2);
        let r1 = theta.clone() - half.clone();
        let r2 = theta.pow(2) - half;
        let expected = Coef::int(2) * r1.pow(2) + r2.pow(2);
        let rep = AdditiveTableau::theta(theta).eta2();
        prop_assert!(rep.is_exact());
        prop_assert_eq!(rep.eta.unwrap(), expected);
    }

    #[test]
    fn eta1_invariant_under_stage_permutation(t in tableau(), k in 0usize..3) {
        let perm = rotation(t.stages(), k);
        let p = t.permuted(&perm);
        prop_assert_eq!(t.eta1().eta, p.eta1().eta);
        prop_assert_eq!(t.check_strong1().strong_order_one(), p.check_strong1().strong_order_one());
    }

    #[test]
    fn eta1_vanishes_iff_residuals_vanish(t in tableau()) {
        let rep = t.eta1();
        let all_zero = rep.weak2.iter().all(|r| r.value.is_zero());
        let eta = rep.eta.clone().unwrap();
        prop_assert_eq!(eta.is_zero(), all_zero);
        prop_assert!(!eta.is_negative());
    }

    #[test]
    fn eta2_invariant_under_stage_permutation(
        abar in square(2),
        bbar in prop::collection::vec(coef(), 2),
        alpha in prop::collection::vec(coef(), 2),
    ) {
        let t = AdditiveTableau::new("x", abar.clone(), bbar.clone(), alpha.clone()).unwrap();
        let swap = |v: &Vec<Coef>| vec![v[1].clone(), v[0].clone()];
        let m = vec![swap(&abar[1]), swap(&abar[0])];
        let p = AdditiveTableau::new("y", m, swap(&bbar), swap(&alpha)).unwrap();
        prop_assert_eq!(t.eta2().eta, p.eta2().eta);
    }
}

#[test]
fn table2_values() {
    let eta = |n: &str| additive_builtin(n).unwrap().eta2().eta.unwrap();
    assert_eq!(eta("trapezoid"), Coef::int(0));
    assert_eq!(eta("midpoint"), Coef::ratio(1, 16));
    assert_eq!(eta("implicit-euler"), Coef::ratio(3, 4));
    let expected = (3.0 - 2.0 * 2f64.sqrt()) / 2.0;
    assert!((eta("sqrt2-method").to_f64() - expected).abs() < 1e-9);
}

#[test]
fn trapezoid_is_only_weak2_member_of_catalog() {
    for name in ["trapezoid", "midpoint", "implicit-euler", "sqrt2-method"] {
        let rep = additive_builtin(name).unwrap().eta2();
        assert!(rep.strong_order_one(), "{name}");
        assert_eq!(rep.weak_order_two(), name == "trapezoid", "{name}");
    }
}
