use henkin_core::exterior::{GradedElement, Universe};
use henkin_core::C64;
use proptest::prelude::*;

const U: Universe = Universe::Plain { count: 6 };

fn element(max_terms: usize) -> impl Strategy<Value = GradedElement> {
    prop::collection::vec((0u64..64, -2.0f64..2.0, -2.0f64..2.0), 0..max_terms).prop_map(|t| {
        GradedElement::from_terms(
            U,
            t.into_iter().map(|(m, a, b)| (m, C64::new(a, b))).collect(),
        )
    })
}

fn homogeneous(deg: u32) -> impl Strategy<Value = GradedElement> {
    element(8).prop_map(move |e| {
        GradedElement::from_terms(
            U,
            e.terms()
                .iter()
                .filter(|(m, _)| m.count_ones() == deg)
                .cloned()
                .collect(),
        )
    })
}

proptest! {
    #[test]
    fn wedge_is_associative(a in element(6), b in element(6), c in element(6)) {
        let l = a.wedge(&b).unwrap().wedge(&c).unwrap();
        let r = a.wedge(&b.wedge(&c).unwrap()).unwrap();
        prop_assert!(l.max_diff(&r) < 1e-10);
    }

    #[test]
    fn graded_commutativity((p, q, a, b) in (0u32..4, 0u32..4).prop_flat_map(|(p, q)| (Just(p), Just(q), homogeneous(p), homogeneous(q)))) {
        let sign = if (p * q) % 2 == 0 { 1.0 } else { -1.0 };
        let ab = a.wedge(&b).unwrap();
        let ba = b.wedge(&a).unwrap().scale(C64::new(sign, 0.0));
        prop_assert!(ab.max_diff(&ba) < 1e-12);
    }

    #[test]
    fn odd_elements_square_to_zero(a in homogeneous(1)) {
        prop_assert!(a.wedge(&a).unwrap().terms().iter().all(|(_, v)| v.norm() < 1e-12));
    }

    #[test]
    fn wedge_power_matches_repeated_wedge(a in homogeneous(2), k in 0usize..4) {
        let mut acc = GradedElement::one(U);
        for _ in 0..k {
            acc = acc.wedge(&a).unwrap();
        }
        prop_assert!(a.wedge_power(k).max_diff(&acc) < 1e-9);
    }

    #[test]
    fn pullback_is_multiplicative(
        a in element(6),
        b in element(6),
        im in prop::collection::vec(prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 5), 6),
    ) {
        let target = Universe::Plain { count: 5 };
        let bits: Vec<usize> = (0..5).collect();
        let images: Vec<GradedElement> =
            im.iter().map(|v| GradedElement::one_form(target, &bits, &v.iter().map(|(x, y)| C64::new(*x, *y)).collect::<Vec<_>>())).collect();
        let lhs = a.wedge(&b).unwrap().pullback(&images, target).unwrap();
        let rhs = a.pullback(&images, target).unwrap().wedge(&b.pullback(&images, target).unwrap()).unwrap();
        prop_assert!(lhs.max_diff(&rhs) < 1e-9);
    }

    #[test]
    fn wedge_coefficient_agrees_with_product(a in element(6), b in element(6), mask in 0u64..64) {
        let full = a.wedge(&b).unwrap().coefficient(mask);
        prop_assert!((a.wedge_coefficient(&b, mask) - full).norm() < 1e-12);
    }
}
