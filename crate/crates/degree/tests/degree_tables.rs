use mfe_degree::series::{geometric_power, rational, Rational};
use mfe_degree::{
    b_coeff, critical_set, degree_shadow, degree_singular, degree_two_param, DegreeError,
    DegreeResult, SingularSet, SurfaceTopology,
};
use num_bigint::BigInt;
use num_traits::Signed;
use proptest::prelude::*;

fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

fn chi(c: i64) -> SurfaceTopology {
    SurfaceTopology::new(c).unwrap()
}

fn weights(ws: &[Rational]) -> SingularSet {
    SingularSet::new(ws.to_vec()).unwrap()
}

fn value_of(d: &DegreeResult) -> BigInt {
    d.value().expect("regular parameter").clone()
}

#[test]
fn critical_set_examples() {
    let empty = SingularSet::empty();
    assert_eq!(
        critical_set(&chi(2), &empty, &rational(4)),
        [rational(1), rational(2), rational(3), rational(4)]
    );

    // One weight 1/2: integers plus shifts by 3/2, deduplicated.
    let half = weights(&[rat(1, 2)]);
    assert_eq!(
        critical_set(&chi(0), &half, &rational(3)),
        [rational(1), rat(3, 2), rational(2), rat(5, 2), rational(3)]
    );

    // An integer weight collapses into the integer lattice.
    let two = weights(&[rational(2)]);
    assert_eq!(
        critical_set(&chi(0), &two, &rational(5)),
        [
            rational(1),
            rational(2),
            rational(3),
            rational(4),
            rational(5)
        ]
    );

    // Two weights: all subset sums appear.
    let pair = weights(&[rat(1, 2), rat(1, 3)]);
    let set = critical_set(&chi(-2), &pair, &rational(2));
    assert!(set.contains(&rat(3, 2)));
    assert!(set.contains(&rat(4, 3)));
    assert!(set.contains(&rat(17, 6))== false);
    assert!(set.windows(2).all(|w| w[0] < w[1]), "sorted and deduplicated");
}

#[test]
fn b_coeff_frozen_values() {
    // Sphere: 1, -1, then identically zero.
    assert_eq!(b_coeff(&chi(2), 0), BigInt::from(1));
    assert_eq!(b_coeff(&chi(2), 1), BigInt::from(-1));
    for k in 2..=12 {
        assert_eq!(b_coeff(&chi(2), k), BigInt::from(0));
    }
    // Torus: all ones.
    for k in 0..=12 {
        assert_eq!(b_coeff(&chi(0), k), BigInt::from(1));
    }
    // Genus 2: C(k+2, k).
    assert_eq!(b_coeff(&chi(-2), 2), BigInt::from(6));
    assert_eq!(b_coeff(&chi(-2), 3), BigInt::from(10));
    // Negative index vanishes.
    assert_eq!(b_coeff(&chi(-4), -1), BigInt::from(0));
    assert_eq!(b_coeff(&chi(-4), -2), BigInt::from(0));
    // Large case stays exact.
    assert_eq!(b_coeff(&chi(-8), 30), BigInt::from(48_903_492i64));
}

#[test]
fn b_coeff_matches_geometric_power() {
    // b_k is the coefficient of x^k in (1+x+x^2+...)^{1-chi}.
    let order = rational(31);
    for c in [2i64, 0, -2, -4, -6] {
        let series = geometric_power(1 - c, &order);
        for k in 0..=30 {
            assert_eq!(
                Rational::from_integer(b_coeff(&chi(c), k)),
                series.coefficient(&rational(k)),
                "chi = {c}, k = {k}"
            );
        }
    }
}

#[test]
fn degree_singular_frozen_values() {
    let empty = SingularSet::empty();

    // Below the first critical value the degree is always 1.
    for (c, ws) in [
        (2, vec![]),
        (0, vec![rational(2)]),
        (-2, vec![rat(1, 2), rational(1)]),
    ] {
        let d = degree_singular(&rat(1, 2), &chi(c), &weights(&ws)).unwrap();
        assert_eq!(value_of(&d), BigInt::from(1));
        assert_eq!(d.interval_index(), Some(0));
    }

    // Sphere, regular, rho/8pi in (1, 2).
    let d = degree_singular(&rat(3, 2), &chi(2), &empty).unwrap();
    assert_eq!(value_of(&d), BigInt::from(-1));
    assert_eq!(d.interval_index(), Some(1));

    // Sphere with one weight-2 point: coefficient of x^1 in 1 - x^3.
    let d = degree_singular(&rat(3, 2), &chi(2), &weights(&[rational(2)])).unwrap();
    assert_eq!(value_of(&d), BigInt::from(0));

    // Torus with one weight-1/2 point: Xi_1 = (1+2x+3x^2+...)(1 - x^{3/2}).
    let half = weights(&[rat(1, 2)]);
    let d = degree_singular(&rat(5, 4), &chi(0), &half).unwrap();
    assert_eq!(value_of(&d), BigInt::from(2));
    assert_eq!(d.interval_index(), Some(1));
    let d = degree_singular(&rat(7, 4), &chi(0), &half).unwrap();
    assert_eq!(value_of(&d), BigInt::from(-1));
    assert_eq!(d.interval_index(), Some(2));
}

#[test]
fn degree_singular_flags_critical_parameters() {
    let half = weights(&[rat(1, 2)]);
    for rho in [rational(1), rat(3, 2), rational(2), rat(5, 2)] {
        let d = degree_singular(&rho, &chi(0), &half).unwrap();
        assert!(d.is_critical(), "rho/8pi = {rho} lies on the critical set");
    }
    assert_eq!(
        degree_singular(&rational(0), &chi(0), &half),
        Err(DegreeError::NonPositiveRho(rational(0)))
    );
    assert_eq!(
        degree_singular(&rational(-1), &chi(0), &half),
        Err(DegreeError::NonPositiveRho(rational(-1)))
    );
}

#[test]
fn remark_identity_weight_two_expansion() {
    // Coefficient k of Xi_1 with a single weight-2 source equals
    // b_k + b_{k-1} + b_{k-2} for every chi in the sweep and k <= 30.
    let two = weights(&[rational(2)]);
    for c in [2i64, 0, -2, -4, -6] {
        for k in 0..=30i64 {
            let rho = rat(2 * k + 1, 2); // k + 1/2, inside (k, k+1)
            let expected = b_coeff(&chi(c), k) + b_coeff(&chi(c), k - 1) + b_coeff(&chi(c), k - 2);
            if k == 0 {
                assert_eq!(expected, BigInt::from(1));
            }
            let d = degree_singular(&rho, &chi(c), &two).unwrap();
            assert_eq!(value_of(&d), expected, "chi = {c}, k = {k}");
        }
    }
}

#[test]
fn degree_shadow_frozen_values() {
    // Sphere: chi * (b_k + b_{k-1} + b_{k-2}).
    let cases = [
        (2i64, rat(3, 2), 0i64),   // 2(b1+b0) = 2(-1+1)
        (2, rat(5, 2), 0),         // 2(b2+b1+b0) = 2(0-1+1)
        (2, rat(7, 2), -2),        // 2(b3+b2+b1) = 2(0+0-1)
        (0, rat(3, 2), 0),         // chi = 0 kills everything
        (0, rat(21, 2), 0),
        (-2, rat(5, 2), -20),      // -2(6+3+1)
    ];
    for (c, rho2, expected) in cases {
        let d = degree_shadow(&rho2, &chi(c)).unwrap();
        assert_eq!(value_of(&d), BigInt::from(expected), "chi = {c}, rho2 = {rho2}");
    }
    assert!(degree_shadow(&rational(3), &chi(2)).unwrap().is_critical());
    assert_eq!(
        degree_shadow(&rat(-1, 2), &chi(2)),
        Err(DegreeError::NonPositiveRho(rat(-1, 2)))
    );
}

#[test]
fn sphere_two_param_table() {
    // The three supercritical sphere intervals with rho1/8pi in (1, 2).
    let sphere = chi(2);
    let rho1 = rat(3, 2);
    let expected = [
        (rat(3, 2), -1i64),
        (rat(5, 2), 0),
        (rat(7, 2), 2),
    ];
    for (rho2, val) in expected {
        let d = degree_two_param(&rho1, &rho2, &sphere).unwrap();
        assert_eq!(value_of(&d), BigInt::from(val), "rho2 = {rho2}");
    }

    // Subcritical rho1 reduces to the regular-problem coefficient b_k.
    for k in 0..=6i64 {
        let d = degree_two_param(&rat(1, 2), &rat(2 * k + 1, 2), &sphere).unwrap();
        assert_eq!(value_of(&d), b_coeff(&sphere, k));
    }
}

#[test]
fn two_param_errors_and_critical_flags() {
    let torus = chi(0);
    assert_eq!(
        degree_two_param(&rat(5, 2), &rat(1, 2), &torus),
        Err(DegreeError::UnsupportedRhoRange(rat(5, 2)))
    );
    assert_eq!(
        degree_two_param(&rational(2), &rat(1, 2), &torus),
        Err(DegreeError::UnsupportedRhoRange(rational(2)))
    );
    assert_eq!(
        degree_two_param(&rational(-1), &rat(1, 2), &torus),
        Err(DegreeError::UnsupportedRhoRange(rational(-1)))
    );
    assert!(degree_two_param(&rational(1), &rat(1, 2), &torus)
        .unwrap()
        .is_critical());
    assert!(degree_two_param(&rat(1, 2), &rational(2), &torus)
        .unwrap()
        .is_critical());
}

#[test]
fn jump_identity_exact() {
    // degree_two_param on (8pi, 16pi) minus b_k equals minus degree_shadow,
    // with the two sides computed through different routes (closed-form
    // binomials vs the generating-function product).
    for c in [2i64, 0, -2, -4] {
        for k in 0..=10i64 {
            let rho2 = rat(2 * k + 1, 2);
            let d2 = value_of(&degree_two_param(&rat(3, 2), &rho2, &chi(c)).unwrap());
            let ds = value_of(&degree_shadow(&rho2, &chi(c)).unwrap());
            assert_eq!(d2 - b_coeff(&chi(c), k), -ds, "chi = {c}, k = {k}");
        }
    }
}

#[test]
fn nonpositive_chi_degrees_never_vanish() {
    for c in [0i64, -2, -4, -6] {
        for k in 0..=20i64 {
            assert!(b_coeff(&chi(c), k).is_positive());
            let rho2 = rat(2 * k + 1, 2);
            for rho1 in [rat(1, 2), rat(3, 2)] {
                let d = value_of(&degree_two_param(&rho1, &rho2, &chi(c)).unwrap());
                assert!(
                    d.is_positive(),
                    "chi = {c}, k = {k}, rho1 = {rho1}: degree {d}"
                );
            }
        }
    }
}

#[test]
fn large_genus_values_stay_exact() {
    let g5 = chi(-8);
    let d = degree_shadow(&rat(61, 2), &g5).unwrap(); // k = 30
    let expected = BigInt::from(-8i64)
        * (BigInt::from(48_903_492i64) + BigInt::from(38_608_020i64) + BigInt::from(30_260_340i64));
    assert_eq!(value_of(&d), expected);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn regular_case_reduces_to_b_coeff(c in prop::sample::select(vec![2i64, 0, -2, -4, -6]),
                                       num in 1i64..=61, ) {
        // Odd numerators over 2 never hit the integer critical set.
        let rho = rat(2 * num + 1, 2);
        let k = num; // floor(rho)
        let d = degree_singular(&rho, &chi(c), &SingularSet::empty()).unwrap();
        prop_assert_eq!(value_of(&d), b_coeff(&chi(c), k));
    }

    #[test]
    fn singular_interval_index_counts_critical_values(num in 1i64..40, den in prop::sample::select(vec![2i64, 3, 4])) {
        let rho = rat(num, den);
        prop_assume!(!rho.is_integer());
        let half = weights(&[rat(1, 2)]);
        let set = critical_set(&chi(0), &half, &rho);
        let d = degree_singular(&rho, &chi(0), &half).unwrap();
        match d {
            DegreeResult::Regular { interval_index, .. } => {
                prop_assert_eq!(interval_index, set.iter().filter(|a| *a < &rho).count());
            }
            DegreeResult::Critical => {
                prop_assert!(set.contains(&rho));
            }
        }
    }
}
