//! Empirical Holder ratios of `P' phi` for a coefficient that is only
//! `C^0.6` at one point.
//!
//! Values at `x0` and at `x0 + s e_n` for dyadic `s` come from one pass
//! with shared random numbers, and the combine step returns the differences
//! directly so that their standard errors are those of the differences.

use super::cutoff::{cutoff, CutoffSpec};
use super::operators::{boundary_job, interior_multi, Job, OperatorKind};
use super::{BoundaryGrid, QuadratureSpec};
use crate::crcalc::ClosureForm;
use crate::exec::Executor;
use crate::geometry::{BasePoint, GraphDefiningFunction};
use crate::math::{powf, sqrt};
use crate::{Error, Result, C64};
use alloc::vec;
use alloc::vec::Vec;

/// Exponent of the coefficient `|x - x0|^HOLDER_EXPONENT chi(x)`.
pub const HOLDER_EXPONENT: f64 = 0.6;

#[derive(Clone, Debug)]
pub struct HolderProxyReport {
    pub n: usize,
    pub separations: Vec<f64>,
    /// `|P'phi(x0 + s e_n) - P'phi(x0)|`.
    pub diffs: Vec<f64>,
    pub diff_se: Vec<f64>,
    pub ratio_half: Vec<f64>,
    pub ratio_09: Vec<f64>,
    /// Same ratios for `phi` itself (`0.6`-ratios are constant).
    pub phi_ratio: Vec<f64>,
    /// `ratio_half` last over first.
    pub half_trend: f64,
    /// `ratio_09` last over first.
    pub growth_09: f64,
    pub samples: u64,
}

/// Singular point `x0 = X0_RE e_1` (`z^1 = X0_RE`); at `z' = 0` the
/// operator would vanish identically by symmetry.
pub const X0_RE: f64 = 0.25;

/// Runs the proxy on the quadric of dimension `n` with `rho = 1`, pairs
/// `x0, x0 + s e_n` with `s = 2^-k` for `k = 1..=levels`.
pub fn holder_proxy<E: Executor>(
    n: usize,
    levels: usize,
    quad: &QuadratureSpec,
    exec: &E,
) -> Result<HolderProxyReport> {
    if n < 3 || levels < 2 {
        return Err(Error::Config(
            "holder proxy needs n >= 3 and at least two levels".into(),
        ));
    }
    let m = GraphDefiningFunction::quadric(n);
    let d = m.dim();
    let rho = 1.0;
    let sigma = 0.5;
    let spec = CutoffSpec::new(0.9 / (1.0 - sigma / 4.0), sigma)?;
    let mc = m.clone();
    let coef = move |x: &[f64]| -> f64 {
        let r2: f64 = x
            .iter()
            .enumerate()
            .map(|(k, t)| {
                if k == 0 {
                    (t - X0_RE) * (t - X0_RE)
                } else {
                    t * t
                }
            })
            .sum();
        if r2 == 0.0 {
            return 0.0;
        }
        powf(sqrt(r2), HOLDER_EXPONENT) * cutoff(&spec, x, &mc)
    };
    let c2 = coef.clone();
    let phi = ClosureForm {
        n,
        q: 1,
        rank: 1,
        f: move |x: &[f64], out: &mut [C64]| {
            out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            out[0] = C64::new(c2(x), 0.0);
        },
        g: None::<fn(&[f64], &mut [C64])>,
        support: Some(m.outer_radius(spec.outer())),
    };
    let mut separations = Vec::with_capacity(levels);
    let x0 = targets_at(d, 0.0);
    let mut targets = vec![BasePoint::new(&x0)];
    let mut s = 1.0;
    for _ in 0..levels {
        s *= 0.5;
        separations.push(s);
        targets.push(BasePoint::new(&targets_at(d, s)));
    }
    let job = Job::new(&phi, OperatorKind::P, &targets, rho, &m)?;
    let diff = |v: &[C64], out: &mut [C64]| {
        for k in 0..levels {
            out[k] = v[k + 1] - v[0];
        }
    };
    let est = interior_multi(
        &m,
        rho,
        core::slice::from_ref(&job),
        quad,
        exec,
        levels,
        diff,
    )?;
    let grid = BoundaryGrid::new(&m, rho, quad.boundary_res)?;
    let bvals: Vec<C64> = boundary_job(&m, &grid, &job)?
        .into_iter()
        .flatten()
        .collect();
    let mut bdiff = vec![C64::new(0.0, 0.0); levels];
    diff(&bvals, &mut bdiff);
    let diffs: Vec<f64> = (0..levels)
        .map(|k| (est.mean[k] + bdiff[k]).norm())
        .collect();
    let ratio = |a: f64| -> Vec<f64> {
        diffs
            .iter()
            .zip(&separations)
            .map(|(v, s)| v / powf(*s, a))
            .collect()
    };
    let ratio_half = ratio(0.5);
    let ratio_09 = ratio(0.9);
    let phi_ratio = separations
        .iter()
        .map(|s| coef(&targets_at(d, *s)) / powf(*s, HOLDER_EXPONENT))
        .collect();
    Ok(HolderProxyReport {
        n,
        half_trend: ratio_half[levels - 1] / ratio_half[0],
        growth_09: ratio_09[levels - 1] / ratio_09[0],
        separations,
        diff_se: est.se.clone(),
        diffs,
        ratio_half,
        ratio_09,
        phi_ratio,
        samples: est.samples,
    })
}

fn targets_at(d: usize, s: f64) -> Vec<f64> {
    let mut x = vec![0.0; d];
    x[0] = X0_RE;
    x[d - 1] = s;
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;

    #[test]
    fn coefficient_ratios_are_constant_and_run_is_deterministic() {
        let quad = QuadratureSpec {
            samples: 2000,
            strata: 4,
            seed: 3,
            boundary_res: 2,
        };
        let a = holder_proxy(3, 4, &quad, &Sequential).unwrap();
        for r in &a.phi_ratio {
            assert!((r - 1.0).abs() < 1e-12);
        }
        assert_eq!(a.separations, vec![0.5, 0.25, 0.125, 0.0625]);
        assert!(a.diffs.iter().all(|v| v.is_finite()));
        let b = holder_proxy(3, 4, &quad, &Sequential).unwrap();
        assert_eq!(a.diffs, b.diffs);
    }
}
