//! Property tests for the exact coefficient ring and the exterior
//! algebra built on it: ring laws, derivation laws, normalization
//! soundness against termwise evaluation, Leibniz, Hodge closure of the
//! self-dual basis, and pullback naturality.

use proptest::prelude::*;

use sdharm::forms::{wedge_sign, AffineChartMap, DiffForm};
use sdharm::ring::{rat, ChartPoint, RingElement, RingTerm, Trig, Var};

fn arb_trig() -> impl Strategy<Value = Trig> {
    prop_oneof![
        Just(Trig::One),
        (1u32..=3).prop_map(Trig::Cos),
        (1u32..=3).prop_map(Trig::Sin),
    ]
}

/// Raw terms as a caller might assemble them, including zero
/// coefficients and the degenerate trig frequencies that normalization
/// must fold away.
fn arb_raw_term() -> impl Strategy<Value = RingTerm> {
    (
        -6i64..=6,
        1i64..=4,
        prop::array::uniform3(0u32..=2),
        -2i32..=2,
        prop_oneof![
            arb_trig(),
            Just(Trig::Cos(0)),
            Just(Trig::Sin(0)),
        ],
    )
        .prop_map(|(p, q, powers, exp_rate, trig)| {
            RingTerm::new(rat(p, q), powers, exp_rate, trig)
        })
}

fn arb_element() -> impl Strategy<Value = RingElement> {
    prop::collection::vec(arb_raw_term(), 0..4)
        .prop_map(|raw| RingElement::normalize(raw).expect("within limits"))
}

fn arb_polynomial_element() -> impl Strategy<Value = RingElement> {
    prop::collection::vec(
        (
            -6i64..=6,
            1i64..=4,
            prop::array::uniform3(0u32..=2),
            arb_trig(),
        )
            .prop_map(|(p, q, powers, trig)| RingTerm::new(rat(p, q), powers, 0, trig)),
        0..4,
    )
    .prop_map(|raw| RingElement::normalize(raw).expect("within limits"))
}

fn arb_point() -> impl Strategy<Value = ChartPoint> {
    (0.0..std::f64::consts::TAU, prop::array::uniform3(-0.57f64..0.57))
        .prop_map(|(theta, x)| ChartPoint::new(theta, x).expect("inside ball"))
}

/// Independent termwise evaluation of a raw term list, used as the
/// oracle for normalization soundness.
fn eval_raw(terms: &[RingTerm], p: &ChartPoint) -> f64 {
    use num_traits::ToPrimitive;
    let x = p.x();
    terms
        .iter()
        .map(|t| {
            let mut v = t.coeff.to_f64().unwrap();
            for (xi, &pw) in x.iter().zip(t.powers.iter()) {
                v *= xi.powi(pw as i32);
            }
            v *= (t.exp_rate as f64 * x[2]).exp();
            v * match t.trig {
                Trig::One => 1.0,
                Trig::Cos(m) => (m as f64 * p.theta()).cos(),
                Trig::Sin(m) => (m as f64 * p.theta()).sin(),
            }
        })
        .sum()
}

fn masks_of_degree(d: u8) -> Vec<u8> {
    (0u8..16).filter(|m| m.count_ones() == d as u32).collect()
}

fn arb_form(degree: u8) -> impl Strategy<Value = DiffForm> {
    let masks = masks_of_degree(degree);
    prop::collection::vec(
        (prop::sample::select(masks), arb_element()),
        0..3,
    )
    .prop_map(move |comps| DiffForm::from_components(degree, comps))
}

fn arb_poly_form(degree: u8) -> impl Strategy<Value = DiffForm> {
    let masks = masks_of_degree(degree);
    prop::collection::vec(
        (prop::sample::select(masks), arb_polynomial_element()),
        0..3,
    )
    .prop_map(move |comps| DiffForm::from_components(degree, comps))
}

/// Signed permutations of the x-axes combined with quarter-turn
/// θ-shifts; the second strategy restricts to maps sending x3 to ±x3 so
/// exponential coefficients stay in the ring.
fn arb_chart_map() -> impl Strategy<Value = AffineChartMap> {
    (
        -4i64..=4,
        prop::sample::select(vec![
            [0usize, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ]),
        prop::array::uniform3(prop::bool::ANY),
    )
        .prop_map(|(qt, perm, signs)| {
            let mut linear = [[0i64; 3]; 3];
            for i in 0..3 {
                linear[i][perm[i]] = if signs[i] { 1 } else { -1 };
            }
            AffineChartMap::new(qt, linear).expect("signed permutation")
        })
}

fn arb_x3_fixing_map() -> impl Strategy<Value = AffineChartMap> {
    (
        -4i64..=4,
        prop::bool::ANY,
        prop::array::uniform3(prop::bool::ANY),
    )
        .prop_map(|(qt, swap12, signs)| {
            let perm = if swap12 { [1usize, 0, 2] } else { [0usize, 1, 2] };
            let mut linear = [[0i64; 3]; 3];
            for i in 0..3 {
                linear[i][perm[i]] = if signs[i] { 1 } else { -1 };
            }
            AffineChartMap::new(qt, linear).expect("signed permutation")
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_distributes_and_commutes(a in arb_element(), b in arb_element(), c in arb_element()) {
        let lhs = &a * &(&b + &c);
        let rhs = &(&a * &b) + &(&a * &c);
        prop_assert_eq!(lhs, rhs);
        prop_assert_eq!(&a * &b, &b * &a);
    }

    #[test]
    fn derivations_satisfy_leibniz(a in arb_element(), b in arb_element()) {
        for v in Var::ALL {
            let lhs = (&a * &b).partial(v);
            let rhs = &(&a.partial(v) * &b) + &(&a * &b.partial(v));
            prop_assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn mixed_partials_commute(a in arb_element()) {
        for v in Var::ALL {
            for w in Var::ALL {
                let vw = a.partial(v).partial(w);
                let wv = a.partial(w).partial(v);
                prop_assert_eq!(vw, wv);
            }
        }
    }

    #[test]
    fn normalization_preserves_evaluation(raw in prop::collection::vec(arb_raw_term(), 0..6), p in arb_point()) {
        let expected = eval_raw(&raw, &p);
        let normalized = RingElement::normalize(raw).unwrap();
        let got = normalized.eval(&p);
        let scale = expected.abs().max(1.0);
        prop_assert!((got - expected).abs() <= 1e-12 * scale,
            "normalized {} vs raw {}", got, expected);
    }

    #[test]
    fn products_evaluate_pointwise(a in arb_element(), b in arb_element(), p in arb_point()) {
        let prod = (&a * &b).eval(&p);
        let expected = a.eval(&p) * b.eval(&p);
        let scale = expected.abs().max(1.0);
        prop_assert!((prod - expected).abs() <= 1e-11 * scale);
    }

    #[test]
    fn exterior_derivative_is_an_antiderivation(a in arb_form(1), b in arb_form(1)) {
        // d(a∧b) = da∧b - a∧db for 1-forms.
        let ab = a.wedge(&b).unwrap();
        let lhs = ab.ext_d();
        let rhs = &a.ext_d().wedge(&b).unwrap() - &a.wedge(&b.ext_d()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn leibniz_for_zero_forms(f in arb_element(), b in arb_form(2)) {
        let fb = b.scale_elem(&f);
        let f0 = DiffForm::scalar(f);
        let lhs = fb.ext_d();
        let rhs = &f0.ext_d().wedge(&b).unwrap() + &f0.wedge(&b.ext_d()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn d_squared_is_zero(a in arb_form(1)) {
        prop_assert!(a.ext_d().ext_d().is_zero());
    }

    #[test]
    fn hodge_fixes_self_dual_basis_and_is_involutive(a in arb_form(2)) {
        prop_assert_eq!(a.hodge4().hodge4(), a);
        for i in 1..=3usize {
            let u = sdharm::models::sd_basis(i);
            prop_assert_eq!(u.hodge4(), u);
        }
    }

    #[test]
    fn wedge_signs_are_consistent(a in 0u8..16, b in 0u8..16) {
        let s_ab = wedge_sign(a, b);
        let s_ba = wedge_sign(b, a);
        if a & b != 0 {
            prop_assert_eq!(s_ab, 0);
        } else {
            let k = a.count_ones() * b.count_ones();
            let expected = if k % 2 == 0 { s_ab } else { -s_ab };
            prop_assert_eq!(s_ba, expected);
        }
    }

    #[test]
    fn pullback_commutes_with_d(a in arb_form(1), m in arb_x3_fixing_map()) {
        let lhs = a.pullback(&m).unwrap().ext_d();
        let rhs = a.ext_d().pullback(&m).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn pullback_commutes_with_wedge(a in arb_poly_form(1), b in arb_poly_form(1), m in arb_chart_map()) {
        let lhs = a.wedge(&b).unwrap().pullback(&m).unwrap();
        let rhs = a.pullback(&m).unwrap().wedge(&b.pullback(&m).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn pullback_matches_pointwise_composition(a in arb_poly_form(0), m in arb_chart_map(), p in arb_point()) {
        // For 0-forms the pullback is literally composition.
        let pulled = a.pullback(&m).unwrap();
        let (theta, x) = m.apply(p.theta(), p.x());
        let direct = a.component(0).eval_at(theta, x);
        let via = pulled.component(0).eval(&p);
        prop_assert!((direct - via).abs() < 1e-10 * (1.0 + direct.abs()));
    }
}
