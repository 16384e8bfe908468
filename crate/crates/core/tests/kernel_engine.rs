//! The fast kernel evaluator against the ambient-algebra reference, and
//! the flattening map against its inverse.

use henkin_core::geometry::{BasePoint, GraphDefiningFunction, Rhat};
use henkin_core::henkin::kernel::{SourceData, TargetData};
use henkin_core::henkin::omega::{exponents, reference_coefficients, KernelEngine, Variant};
use henkin_core::henkin::{
    heisenberg_forward, heisenberg_inverse, normalization, stated_normalization,
};
use henkin_core::C64;
use proptest::prelude::*;
use std::f64::consts::PI;

fn surface(n: usize, quartic: bool) -> GraphDefiningFunction {
    let rhat = if quartic {
        Rhat::quartic(0.01, 1.0)
    } else {
        Rhat::Quadric
    };
    GraphDefiningFunction::new(n, rhat, 1.0).unwrap()
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.3f64..0.3, 2 * n - 1)
}

fn engine_gap(n: usize, quartic: bool, xi: &[f64], x: &[f64]) -> f64 {
    let m = surface(n, quartic);
    let (xi, x) = (BasePoint::new(xi), BasePoint::new(x));
    let mut worst: f64 = 0.0;
    for variant in [Variant::Interior, Variant::Boundary] {
        for p in 0..n {
            if exponents(n, p, variant).is_err() {
                continue;
            }
            let r = reference_coefficients(variant, p, &xi, &x, &m).unwrap();
            let mut e = KernelEngine::new(n, p, variant).unwrap();
            let mut out = vec![C64::new(0.0, 0.0); e.len()];
            e.eval(
                &SourceData::new(&xi, &m),
                &TargetData::new(&x, &m).unwrap(),
                &mut out,
            );
            let scale = r.iter().map(|v| v.norm()).fold(1e-300, f64::max);
            let gap = r
                .iter()
                .zip(&out)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            worst = worst.max(gap / scale);
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn engine_matches_reference_n3(xi in point(3), x in point(3), quartic in any::<bool>()) {
        prop_assume!(xi.iter().zip(&x).any(|(a, b)| (a - b).abs() > 1e-3));
        prop_assert!(engine_gap(3, quartic, &xi, &x) < 1e-10);
    }

    #[test]
    fn engine_matches_reference_n4(xi in point(4), x in point(4), quartic in any::<bool>()) {
        prop_assume!(xi.iter().zip(&x).any(|(a, b)| (a - b).abs() > 1e-3));
        prop_assert!(engine_gap(4, quartic, &xi, &x) < 1e-10);
    }

    #[test]
    fn flattening_map_round_trips(xi in point(4), x in point(4), quartic in any::<bool>()) {
        let m = surface(4, quartic);
        let (xi, x) = (BasePoint::new(&xi), BasePoint::new(&x));
        let star = heisenberg_forward(&xi, &x, &m).unwrap();
        let back = heisenberg_inverse(star.as_slice(), &x, &m).unwrap();
        let gap = back.as_slice().iter().zip(xi.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(gap < 1e-9, "gap {gap}");
    }

    #[test]
    fn flattening_map_sends_target_to_origin(x in point(3), quartic in any::<bool>()) {
        let m = surface(3, quartic);
        let x = BasePoint::new(&x);
        let star = heisenberg_forward(&x, &x, &m).unwrap();
        prop_assert!(star.norm() < 1e-12);
    }
}

#[test]
fn normalizations() {
    for n in 2..=6 {
        let tpi = C64::new(0.0, 2.0 * PI).powu(n as u32);
        assert!((normalization(n) * tpi - 1.0).norm() < 1e-12);
        assert!((stated_normalization(n) * tpi + 2.0).norm() < 1e-12);
    }
}

#[test]
fn coincident_points_are_rejected() {
    let m = surface(3, false);
    let x = BasePoint::new(&[0.1, 0.0, 0.2, 0.0, 0.05]);
    assert!(reference_coefficients(Variant::Interior, 0, &x, &x, &m).is_err());
    assert!(KernelEngine::new(3, 2, Variant::Interior).is_err());
}
