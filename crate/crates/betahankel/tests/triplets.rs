use betahankel::model_core::{admissible_m, classify_triplet};
use betahankel::{ModelParams, TripletKind};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = ModelParams> {
    (2u32..=6, 0.0f64..1.9, 0u32..=4).prop_map(|(n, b, k)| ModelParams::new(n, b, k).unwrap())
}

// q in (1, 8], p = q·r with r >= 1
fn exponents() -> impl Strategy<Value = (f64, f64)> {
    (1.01f64..8.0, 1.0f64..6.0).prop_map(|(q, r)| (q * r, q))
}

fn admissible_bound(p: f64, q: f64, pr: &ModelParams) -> bool {
    let (n, k, b) = (pr.n as f64, pr.k as f64, pr.beta);
    if n + 2.0 * k - 2.0 > 0.0 {
        p < q * (n - b + 2.0 * k) / (n + 2.0 * k - 2.0)
    } else {
        true
    }
}

fn generalized_bound(p: f64, q: f64, pr: &ModelParams) -> bool {
    let (n, k, b) = (pr.n as f64, pr.k as f64, pr.beta);
    let d = n + 2.0 * k - 2.0 * q + (q - 1.0) * b;
    if d > 0.0 { p < q * (n - b + 2.0 * k) / d } else { true }
}

fn near_boundary(p: f64, q: f64, pr: &ModelParams) -> bool {
    let (n, k, b) = (pr.n as f64, pr.k as f64, pr.beta);
    let d1 = n + 2.0 * k - 2.0;
    let d2 = n + 2.0 * k - 2.0 * q + (q - 1.0) * b;
    let close = |bound: f64| (p - bound).abs() <= 1e-9 * bound.abs();
    (d1 > 0.0 && close(q * (n - b + 2.0 * k) / d1)) || (d2 > 0.0 && close(q * (n - b + 2.0 * k) / d2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn neither_only_when_both_bounds_fail(pr in params(), (p, q) in exponents()) {
        prop_assume!(!near_boundary(p, q, &pr));
        let m = admissible_m(p, q, &pr).unwrap();
        let expect_neither = !admissible_bound(p, q, &pr) && !generalized_bound(p, q, &pr);
        if m <= 1.0 {
            // no valid triplet exists, and neither bound may claim one
            prop_assert!(expect_neither);
        } else {
            let t = classify_triplet(m, p, q, &pr).unwrap();
            prop_assert_eq!(t.kind == TripletKind::Neither, expect_neither);
        }
    }

    #[test]
    fn admissible_triplets_have_q_below_m(pr in params(), q in 1.01f64..8.0, u in 0.0f64..0.999) {
        let (n, k, b) = (pr.n as f64, pr.k as f64, pr.beta);
        let ratio = if n + 2.0 * k > 2.0 { (n - b + 2.0 * k) / (n + 2.0 * k - 2.0) } else { 6.0 };
        let p = q * (1.0 + u * (ratio - 1.0));
        let m = admissible_m(p, q, &pr).unwrap();
        let t = classify_triplet(m, p, q, &pr).unwrap();
        prop_assert_eq!(t.kind, TripletKind::Admissible);
        prop_assert!(q < m, "q = {q}, m = {m}");
    }

    #[test]
    fn generalized_triplets_have_m_above_one(pr in params(), (p, q) in exponents()) {
        let m = admissible_m(p, q, &pr).unwrap();
        if m > 1.0 {
            let t = classify_triplet(m, p, q, &pr).unwrap();
            if t.kind == TripletKind::Generalized {
                prop_assert!(t.m > 1.0 && t.m <= f64::INFINITY);
            }
        }
        // a generalized p never yields m <= 1
        if generalized_bound(p, q, &pr) && !near_boundary(p, q, &pr) {
            prop_assert!(m > 1.0, "p = {p}, q = {q}, m = {m}");
        }
    }

    #[test]
    fn equal_exponents_give_infinite_m(pr in params(), q in 1.01f64..20.0) {
        let m = admissible_m(q, q, &pr).unwrap();
        prop_assert!(m.is_infinite());
        prop_assert_eq!(classify_triplet(m, q, q, &pr).unwrap().kind, TripletKind::Admissible);
    }
}

#[test]
fn heat_equation_reduction() {
    for n in 2..=5u32 {
        let pr = ModelParams::new(n, 0.0, 0).unwrap();
        assert_eq!(pr.gamma, n as f64 / 2.0);
    }
    // n = 3: 1/m = (3/2)(1/q − 1/p), admissible while p < 3q
    let pr = ModelParams::new(3, 0.0, 0).unwrap();
    let m = admissible_m(4.0, 2.0, &pr).unwrap();
    assert!((m - 8.0 / 3.0).abs() < 1e-14);
    assert_eq!(classify_triplet(m, 4.0, 2.0, &pr).unwrap().kind, TripletKind::Admissible);
    let m = admissible_m(6.0, 2.0, &pr).unwrap();
    assert!((m - 2.0).abs() < 1e-14);
    assert_ne!(classify_triplet(m, 6.0, 2.0, &pr).unwrap().kind, TripletKind::Admissible);
    // n = 4: γ = 2, 1/m = 2(1/2 − 1/3) = 1/3
    let pr = ModelParams::new(4, 0.0, 0).unwrap();
    assert!((admissible_m(3.0, 2.0, &pr).unwrap() - 3.0).abs() < 1e-14);
}

#[test]
fn relation_mismatch_is_neither() {
    let pr = ModelParams::new(3, 1.0, 0).unwrap();
    let t = classify_triplet(7.0, 4.0, 2.0, &pr).unwrap();
    assert_eq!(t.kind, TripletKind::Neither);
}
