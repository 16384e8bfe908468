//! The real form of the approximate Heisenberg transformation
//! `psi~_x(xi) = (zeta' - z', 2 Im(r_z . (zeta - z)))` and its inverse.

use super::kernel::TargetData;
use crate::geometry::{BasePoint, GraphDefiningFunction};
use crate::{Error, Result, C64, MAX_D};
use alloc::format;

/// `2 Im(r_z . (zeta - z))` from the height function, for `xi' ` fixed.
#[inline]
fn xin_star(t: &TargetData, m: &GraphDefiningFunction, xi: &[f64]) -> f64 {
    let n = m.n;
    let d = 2 * n - 1;
    let x = t.x.as_slice();
    let mut lin = 0.0;
    for a in 0..n - 1 {
        let dz = C64::new(xi[2 * a] - x[2 * a], xi[2 * a + 1] - x[2 * a + 1]);
        lin += (t.deriv.r_z[a] * dz).im;
    }
    let dh = m.height(xi) - m.height(x);
    (xi[d - 1] - x[d - 1]) + t.rhat_n() * dh + 2.0 * lin
}

/// `psi~_x(xi)` in the base layout.
pub fn forward(t: &TargetData, m: &GraphDefiningFunction, xi: &[f64]) -> [f64; MAX_D] {
    let d = m.dim();
    let x = t.x.as_slice();
    let mut out = [0.0; MAX_D];
    for k in 0..d - 1 {
        out[k] = xi[k] - x[k];
    }
    out[d - 1] = xin_star(t, m, xi);
    out
}

/// Convenience wrapper computing the target data.
pub fn heisenberg_forward(
    xi: &BasePoint,
    x: &BasePoint,
    m: &GraphDefiningFunction,
) -> Result<BasePoint> {
    let t = TargetData::new(x, m)?;
    Ok(BasePoint::new(&forward(&t, m, xi.as_slice())[..m.dim()]))
}

/// Outcome of the inverse solve.
#[derive(Clone, Copy, Debug)]
pub enum Inverse {
    Point([f64; MAX_D]),
    /// `|xi^n - x^n|` would exceed the bracket.
    Outside,
    NoConvergence,
}

/// Inverse of [`forward`] as a `Result`.
pub fn inverse(
    t: &TargetData,
    m: &GraphDefiningFunction,
    xs: &[f64],
    bracket: f64,
) -> Result<[f64; MAX_D]> {
    match solve_inverse(t, m, xs, bracket) {
        Inverse::Point(p) => Ok(p),
        Inverse::Outside => Err(Error::OutsideImage(format!(
            "xi*^n = {:.3e} not bracketed",
            xs[m.dim() - 1]
        ))),
        Inverse::NoConvergence => Err(Error::OutsideImage(
            "Newton iteration did not converge in 100 steps".into(),
        )),
    }
}

/// `xi' = x' + zeta*'` and a safeguarded Newton solve in `xi^n`, whose
/// derivative is `1 + rhat_n(x) rhat_n(xi)`. `bracket` bounds
/// `|xi^n - x^n|`.
pub fn solve_inverse(
    t: &TargetData,
    m: &GraphDefiningFunction,
    xs: &[f64],
    bracket: f64,
) -> Inverse {
    let d = m.dim();
    let x = t.x.as_slice();
    let mut xi = [0.0; MAX_D];
    for k in 0..d - 1 {
        xi[k] = x[k] + xs[k];
    }
    let target = xs[d - 1];
    let an = t.rhat_n();
    let g = |v: f64, xi: &mut [f64; MAX_D]| -> f64 {
        xi[d - 1] = v;
        xin_star(t, m, &xi[..d]) - target
    };
    let tol = 1e-13 * (1.0 + target.abs());
    // linear guess, exact for the quadric
    let mut v = {
        let g0 = g(x[d - 1], &mut xi);
        x[d - 1] - g0
    };
    let mut gv = g(v, &mut xi);
    if gv.abs() <= tol {
        return Inverse::Point(xi);
    }
    let (mut lo, mut hi) = (x[d - 1] - bracket, x[d - 1] + bracket);
    let (glo, ghi) = (g(lo, &mut xi), g(hi, &mut xi));
    if glo > 0.0 || ghi < 0.0 {
        return Inverse::Outside;
    }
    if v <= lo || v >= hi {
        v = 0.5 * (lo + hi);
        gv = g(v, &mut xi);
    }
    for _ in 0..100 {
        if gv.abs() <= tol {
            xi[d - 1] = v;
            return Inverse::Point(xi);
        }
        if gv < 0.0 {
            lo = v;
        } else {
            hi = v;
        }
        xi[d - 1] = v;
        let slope = 1.0 + an * m.rhat.d1(&xi[..d], d - 1);
        let newton = v - gv / slope;
        v = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        gv = g(v, &mut xi);
    }
    Inverse::NoConvergence
}

/// Spec-level entry point: `xi` with `psi~_x(xi) = xi_star`, residual below
/// `1e-10`.
pub fn heisenberg_inverse(
    xi_star: &[f64],
    x: &BasePoint,
    m: &GraphDefiningFunction,
) -> Result<BasePoint> {
    let t = TargetData::new(x, m)?;
    let xi = inverse(&t, m, xi_star, 2.0 * m.domain_radius())?;
    Ok(BasePoint::new(&xi[..m.dim()]))
}

/// `dV(xi) / dV(xi*) = 1 / (1 + rhat_n(x) rhat_n(xi))`.
#[inline]
pub fn inverse_jacobian(t: &TargetData, m: &GraphDefiningFunction, xi: &[f64]) -> f64 {
    1.0 / (1.0 + t.rhat_n() * m.rhat.d1(xi, m.dim() - 1))
}
