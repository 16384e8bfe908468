use henkin_core::exec::Sequential;
use henkin_core::geometry::GraphDefiningFunction;
use henkin_core::kam::{sampled_norm, solve, ConnectionForm, KamOptions, Manufactured};
use henkin_core::normlab::{
    ball_grid, check_interpolation, check_product, Derivatives, Domain, SampledField,
    TrigPolynomial,
};
use henkin_core::rng::SampleRng;
use henkin_core::C64;
use proptest::prelude::*;
use std::sync::Arc;

fn field(seed: u64, per_axis: usize) -> SampledField {
    let t = TrigPolynomial::random(3, 4, 3.0, &mut SampleRng::new(seed, 0, 0, 8));
    SampledField::sample(
        &t,
        ball_grid(3, 1.0, per_axis),
        2,
        Derivatives::Exact,
        Domain::Ball {
            center: vec![0.0; 3],
            radius: 1.0,
        },
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn norms_are_homogeneous(seed in any::<u64>(), c in 0.1f64..5.0, a in 0.0f64..2.0) {
        let u = field(seed, 5);
        let lhs = u.scaled(C64::new(0.0, c)).norm(a).unwrap();
        prop_assert!((lhs - c * u.norm(a).unwrap()).abs() <= 1e-9 * lhs.max(1.0));
    }

    #[test]
    fn norms_dominate_lower_integer_orders(seed in any::<u64>(), a in 0.0f64..2.0) {
        // not monotone in the Holder exponent itself: pairs farther apart
        // than 1 weigh less as alpha grows
        let u = field(seed, 5);
        let k = a.floor();
        prop_assert!(u.norm(k).unwrap() <= u.norm(a).unwrap());
    }

    #[test]
    fn interpolation_and_product_ratios_stay_moderate(seed in any::<u64>(), l in 0.1f64..0.9) {
        let u = field(seed, 5);
        let v = field(seed ^ 0x5555, 5);
        let r = check_interpolation(&u, 0.0, 2.0, l).unwrap();
        prop_assert!(!r.flagged && r.ratio <= 10.0, "{r:?}");
        let p = check_product(&u, &v, 0.5).unwrap();
        prop_assert!(!p.flagged && p.ratio <= 10.0, "{p:?}");
    }
}

#[test]
fn one_step_shrinks_the_manufactured_connection() {
    let m = GraphDefiningFunction::quadric(4);
    let mut opts = KamOptions::new(4, 0.55).unwrap();
    opts.quad.samples = 20_000;
    opts.max_steps = 1;
    opts.tol = 0.0;
    opts.norm_samples = 2000;
    let w0 =
        Arc::new(ConnectionForm::exact(Arc::new(Manufactured::new(&m, 0.05).unwrap())).unwrap());
    let n0 = sampled_norm(w0.as_ref(), 0.55, &opts, &m);
    let r = solve(w0, &m, &opts, &Sequential).unwrap();
    assert_eq!(r.steps.len(), 1);
    assert!((r.omega0_norm - n0).abs() <= 1e-12 * n0);
    assert!(
        r.steps[0].next_norm < 0.1 * r.omega0_norm,
        "{:?}",
        r.steps[0]
    );
    assert!(r.rel_residual.is_finite());
}
