//! Smooth cutoff `chi = eta(phi(x)/rho^2)`, equal to 1 on
//! `D_{rho(1-sigma/2)}` and to 0 off `D_{rho(1-sigma/4)}`.

use crate::geometry::GraphDefiningFunction;
use crate::math::exp;
use crate::{Error, Result, MAX_D};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffSpec {
    pub rho: f64,
    pub sigma: f64,
}

impl CutoffSpec {
    pub fn new(rho: f64, sigma: f64) -> Result<Self> {
        if !(rho > 0.0 && sigma > 0.0 && sigma < 1.0) {
            return Err(Error::Config(
                "cutoff needs rho > 0 and 0 < sigma < 1".into(),
            ));
        }
        Ok(CutoffSpec { rho, sigma })
    }

    /// Transition window `[t0, t1]` in `t = phi / rho^2`.
    pub fn window(&self) -> (f64, f64) {
        let a = 1.0 - self.sigma / 2.0;
        let b = 1.0 - self.sigma / 4.0;
        (a * a, b * b)
    }

    /// Outer radius: `chi = 0` off `D_{outer}`.
    pub fn outer(&self) -> f64 {
        self.rho * (1.0 - self.sigma / 4.0)
    }
}

/// `g(s) = exp(-1/s)` and its first two derivatives (zero for `s <= 0`).
#[inline]
fn g3(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let g = exp(-1.0 / s);
    let s2 = s * s;
    (g, g / s2, g * (1.0 / (s2 * s2) - 2.0 / (s2 * s)))
}

/// `eta(t)` and derivatives `eta'`, `eta''`.
pub fn eta(spec: &CutoffSpec, t: f64) -> (f64, f64, f64) {
    let (t0, t1) = spec.window();
    if t <= t0 {
        return (1.0, 0.0, 0.0);
    }
    if t >= t1 {
        return (0.0, 0.0, 0.0);
    }
    let (a, ga1, ga2) = g3(t1 - t);
    let (b, gb1, gb2) = g3(t - t0);
    let (a1, a2) = (-ga1, ga2);
    let (b1, b2) = (gb1, gb2);
    let s = a + b;
    let num = a1 * b - a * b1;
    let e1 = num / (s * s);
    let e2 = (a2 * b - a * b2) / (s * s) - 2.0 * num * (a1 + b1) / (s * s * s);
    (a / s, e1, e2)
}

/// `chi(x)`.
pub fn cutoff(spec: &CutoffSpec, x: &[f64], m: &GraphDefiningFunction) -> f64 {
    eta(spec, m.phi(x) / (spec.rho * spec.rho)).0
}

/// `chi`, its gradient and Hessian at `x`.
pub fn cutoff_jet(
    spec: &CutoffSpec,
    x: &[f64],
    m: &GraphDefiningFunction,
) -> (f64, [f64; MAX_D], [[f64; MAX_D]; MAX_D]) {
    let d = x.len();
    let r2 = spec.rho * spec.rho;
    let (e0, e1, e2) = eta(spec, m.phi(x) / r2);
    let mut g = [0.0; MAX_D];
    let mut h = [[0.0; MAX_D]; MAX_D];
    if e1 == 0.0 && e2 == 0.0 {
        return (e0, g, h);
    }
    let mut jet = crate::geometry::Jet2::default();
    m.rhat.jet2(x, &mut jet);
    let mut dphi = [0.0; MAX_D];
    for k in 0..d {
        dphi[k] = 2.0 * x[k] + jet.g[k];
        g[k] = e1 * dphi[k] / r2;
    }
    for k in 0..d {
        for l in 0..d {
            let ddphi = if k == l { 2.0 } else { 0.0 } + jet.h[k][l];
            h[k][l] = e2 * dphi[k] * dphi[l] / (r2 * r2) + e1 * ddphi / r2;
        }
    }
    (e0, g, h)
}
