//! Tangential Cauchy-Riemann calculus on graph hypersurfaces.

use henkin_core::crcalc::{dbar_m, ClosureForm, DbarForm, TangentialForm};
use henkin_core::geometry::{BasePoint, GraphDefiningFunction, Rhat};
use henkin_core::C64;
use proptest::prelude::*;

type Fill = fn(&[f64], &mut [C64]);

fn surfaces(n: usize) -> Vec<GraphDefiningFunction> {
    vec![
        GraphDefiningFunction::quadric(n),
        GraphDefiningFunction::new(n, Rhat::quartic(0.01, 1.0), 1.0).unwrap(),
        GraphDefiningFunction::new(n, Rhat::trig(0.01), 1.0).unwrap(),
    ]
}

/// `u = cos(a.x) + i sin(b.x)` with exact gradient.
fn smooth_function(n: usize, a: Vec<f64>, b: Vec<f64>) -> impl TangentialForm {
    let (a2, b2) = (a.clone(), b.clone());
    ClosureForm {
        n,
        q: 0,
        rank: 1,
        f: move |x: &[f64], out: &mut [C64]| {
            let (s, t): (f64, f64) = (
                x.iter().zip(&a).map(|(u, v)| u * v).sum(),
                x.iter().zip(&b).map(|(u, v)| u * v).sum(),
            );
            out[0] = C64::new(s.cos(), t.sin());
        },
        g: Some(move |x: &[f64], out: &mut [C64]| {
            let (s, t): (f64, f64) = (
                x.iter().zip(&a2).map(|(u, v)| u * v).sum(),
                x.iter().zip(&b2).map(|(u, v)| u * v).sum(),
            );
            for k in 0..x.len() {
                out[k] = C64::new(-s.sin() * a2[k], t.cos() * b2[k]);
            }
        }),
        support: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lifted_points_lie_on_the_hypersurface(x in prop::collection::vec(-0.5f64..0.5, 7)) {
        for m in surfaces(4) {
            let z = m.lift(&BasePoint::new(&x)).unwrap();
            prop_assert!(m.r(&z).abs() < 1e-12);
            let back = z.project();
            prop_assert_eq!(back.as_slice(), &x[..]);
        }
    }

    #[test]
    fn dbar_m_squares_to_zero(
        x in prop::collection::vec(-0.4f64..0.4, 7),
        a in prop::collection::vec(-2.0f64..2.0, 7),
        b in prop::collection::vec(-2.0f64..2.0, 7),
    ) {
        for m in surfaces(4) {
            let u = smooth_function(4, a.clone(), b.clone());
            let du = DbarForm { inner: &u, m: &m };
            let ddu = dbar_m(&du, &BasePoint::new(&x), &m).unwrap();
            let scale = dbar_m(&u, &BasePoint::new(&x), &m).unwrap().sup().max(1.0);
            prop_assert!(ddu.sup() < 1e-6 * scale, "sup {}", ddu.sup());
        }
    }

    #[test]
    fn restrictions_of_holomorphic_functions_are_cr(x in prop::collection::vec(-0.4f64..0.4, 5)) {
        for m in surfaces(3) {
            let mc = m.clone();
            // z^1 z^2 + (z^n)^2, restricted to M
            let u = ClosureForm {
                n: 3,
                q: 0,
                rank: 1,
                f: move |x: &[f64], out: &mut [C64]| {
                    let z = mc.lift_unchecked(x);
                    let z = z.as_slice();
                    out[0] = z[0] * z[1] + z[2] * z[2];
                },
                g: None::<Fill>,
                support: None,
            };
            let v = dbar_m(&u, &BasePoint::new(&x), &m).unwrap();
            prop_assert!(v.sup() < 1e-7, "sup {}", v.sup());
        }
    }
}

#[test]
fn dbar_of_antiholomorphic_coordinate() {
    // on the quadric dbar_M zbar^1 is dzbar^1 exactly
    let m = GraphDefiningFunction::quadric(3);
    let u = ClosureForm {
        n: 3,
        q: 0,
        rank: 1,
        f: |x: &[f64], out: &mut [C64]| out[0] = C64::new(x[0], -x[1]),
        g: None::<Fill>,
        support: None,
    };
    let v = dbar_m(&u, &BasePoint::new(&[0.2, -0.1, 0.3, 0.05, 0.1]), &m).unwrap();
    assert!((v.coeffs[0] - 1.0).norm() < 1e-8);
    assert!(v.coeffs[1].norm() < 1e-8);
}
