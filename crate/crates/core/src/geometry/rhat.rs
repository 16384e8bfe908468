//! Closed-form perturbations `rhat` of the quadric.

use crate::math::{cos, sin};
use crate::{Error, Result, MAX_D};
use alloc::format;

/// Value, gradient and Hessian of `rhat` at a point.
#[derive(Clone, Debug)]
pub struct Jet2 {
    pub v: f64,
    pub g: [f64; MAX_D],
    pub h: [[f64; MAX_D]; MAX_D],
}

impl Default for Jet2 {
    fn default() -> Self {
        Jet2 {
            v: 0.0,
            g: [0.0; MAX_D],
            h: [[0.0; MAX_D]; MAX_D],
        }
    }
}

/// The shipped perturbations. Each has exact partial derivatives to order
/// [`Rhat::M_MAX`]; coordinates use the project-wide layout
/// `(Re z^1, Im z^1, ..., Re z^{n-1}, Im z^{n-1}, x^n)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Rhat {
    /// `rhat = 0`.
    Quadric,
    /// `coef * sum_{j < 2n-1} (x^j)^4 + coef_n * (x^n)^4`.
    Quartic { coef: f64, coef_n: f64 },
    /// `eps * sin(k1 x^1) sin(kn x^n)`.
    Trig { eps: f64, k1: f64, kn: f64 },
    /// `eps * (x^1)^2`.
    AxisSquare { eps: f64 },
}

impl Rhat {
    /// Highest derivative order with a closed form.
    pub const M_MAX: usize = 4;

    /// Quartic preset scaled so that its `C^2` norm over the `rho0`-ball is
    /// `eps` (the fourth-power coefficient is `eps / (12 rho0^2)`).
    pub fn quartic(eps: f64, rho0: f64) -> Self {
        let coef = eps / (12.0 * rho0 * rho0);
        Rhat::Quartic { coef, coef_n: coef }
    }

    pub fn trig(eps: f64) -> Self {
        Rhat::Trig {
            eps,
            k1: 1.0,
            kn: 1.0,
        }
    }

    /// Looks a preset up by name.
    pub fn from_name(name: &str, eps: f64, rho0: f64) -> Result<Self> {
        match name {
            "quadric" => Ok(Rhat::Quadric),
            "quartic" => Ok(Rhat::quartic(eps, rho0)),
            "trig" => Ok(Rhat::trig(eps)),
            "axis-square" => Ok(Rhat::AxisSquare { eps }),
            other => Err(Error::Config(format!("unknown preset '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Rhat::Quadric => "quadric",
            Rhat::Quartic { .. } => "quartic",
            Rhat::Trig { .. } => "trig",
            Rhat::AxisSquare { .. } => "axis-square",
        }
    }

    pub fn is_quadric(&self) -> bool {
        matches!(self, Rhat::Quadric)
    }

    /// `rhat^delta(z', x^n) = delta^{-2} rhat(delta z', delta^2 x^n)`.
    pub fn dilated(&self, delta: f64) -> Self {
        let d2 = delta * delta;
        match *self {
            Rhat::Quadric => Rhat::Quadric,
            Rhat::Quartic { coef, coef_n } => Rhat::Quartic {
                coef: coef * d2,
                coef_n: coef_n * d2 * d2 * d2,
            },
            Rhat::Trig { eps, k1, kn } => Rhat::Trig {
                eps: eps / d2,
                k1: k1 * delta,
                kn: kn * d2,
            },
            Rhat::AxisSquare { eps } => Rhat::AxisSquare { eps },
        }
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        let d = x.len();
        match *self {
            Rhat::Quadric => 0.0,
            Rhat::Quartic { coef, coef_n } => {
                coef * x[..d - 1].iter().map(|t| t * t * t * t).sum::<f64>()
                    + coef_n * x[d - 1] * x[d - 1] * x[d - 1] * x[d - 1]
            }
            Rhat::Trig { eps, k1, kn } => eps * sin(k1 * x[0]) * sin(kn * x[d - 1]),
            Rhat::AxisSquare { eps } => eps * x[0] * x[0],
        }
    }

    /// First partial `d rhat / d x^k`.
    #[inline]
    pub fn d1(&self, x: &[f64], k: usize) -> f64 {
        let d = x.len();
        match *self {
            Rhat::Quadric => 0.0,
            Rhat::Quartic { coef, coef_n } => {
                4.0 * if k + 1 == d { coef_n } else { coef } * x[k] * x[k] * x[k]
            }
            Rhat::Trig { eps, k1, kn } => {
                if k == 0 && d > 1 {
                    eps * k1 * cos(k1 * x[0]) * sin(kn * x[d - 1])
                } else if k == d - 1 {
                    eps * kn * sin(k1 * x[0]) * cos(kn * x[d - 1])
                } else {
                    0.0
                }
            }
            Rhat::AxisSquare { eps } => {
                if k == 0 {
                    2.0 * eps * x[0]
                } else {
                    0.0
                }
            }
        }
    }

    /// Fills value, gradient and Hessian.
    pub fn jet2(&self, x: &[f64], jet: &mut Jet2) {
        let d = x.len();
        jet.v = self.value(x);
        for k in 0..d {
            jet.g[k] = 0.0;
            for l in 0..d {
                jet.h[k][l] = 0.0;
            }
        }
        match *self {
            Rhat::Quadric => {}
            Rhat::Quartic { coef, coef_n } => {
                for k in 0..d {
                    let c = if k + 1 == d { coef_n } else { coef };
                    jet.g[k] = 4.0 * c * x[k] * x[k] * x[k];
                    jet.h[k][k] = 12.0 * c * x[k] * x[k];
                }
            }
            Rhat::Trig { eps, k1, kn } => {
                let (s1, c1) = (sin(k1 * x[0]), cos(k1 * x[0]));
                let (sn, cn) = (sin(kn * x[d - 1]), cos(kn * x[d - 1]));
                jet.g[0] = eps * k1 * c1 * sn;
                jet.g[d - 1] = eps * kn * s1 * cn;
                jet.h[0][0] = -eps * k1 * k1 * s1 * sn;
                jet.h[d - 1][d - 1] = -eps * kn * kn * s1 * sn;
                jet.h[0][d - 1] = eps * k1 * kn * c1 * cn;
                jet.h[d - 1][0] = eps * k1 * kn * c1 * cn;
            }
            Rhat::AxisSquare { eps } => {
                jet.g[0] = 2.0 * eps * x[0];
                jet.h[0][0] = 2.0 * eps;
            }
        }
    }

    /// General partial derivative `d^alpha rhat`, `alpha[k]` = order in
    /// `x^k`, total order at most [`Rhat::M_MAX`].
    pub fn partial(&self, x: &[f64], alpha: &[u8]) -> Result<f64> {
        let d = x.len();
        let total: usize = alpha.iter().map(|&a| a as usize).sum();
        if total > Self::M_MAX {
            return Err(Error::Capability(format!(
                "derivative order {total} exceeds closed-form order {}",
                Self::M_MAX
            )));
        }
        let nonzero = alpha.iter().filter(|&&a| a > 0).count();
        Ok(match *self {
            Rhat::Quadric => 0.0,
            Rhat::Quartic { coef, coef_n } => {
                if nonzero == 0 {
                    self.value(x)
                } else if nonzero > 1 {
                    0.0
                } else {
                    let k = alpha.iter().position(|&a| a > 0).unwrap();
                    let t = x[k];
                    let c = if k + 1 == d { coef_n } else { coef };
                    c * match alpha[k] {
                        1 => 4.0 * t * t * t,
                        2 => 12.0 * t * t,
                        3 => 24.0 * t,
                        _ => 24.0,
                    }
                }
            }
            Rhat::Trig { eps, k1, kn } => {
                let other = alpha
                    .iter()
                    .enumerate()
                    .any(|(k, &a)| a > 0 && k != 0 && k != d - 1);
                if other {
                    0.0
                } else {
                    eps * sin_deriv(k1, x[0], alpha[0]) * sin_deriv(kn, x[d - 1], alpha[d - 1])
                }
            }
            Rhat::AxisSquare { eps } => {
                if alpha.iter().skip(1).any(|&a| a > 0) {
                    0.0
                } else {
                    match alpha[0] {
                        0 => eps * x[0] * x[0],
                        1 => 2.0 * eps * x[0],
                        2 => 2.0 * eps,
                        _ => 0.0,
                    }
                }
            }
        })
    }
}

/// `d^k/dt^k sin(w t)`.
fn sin_deriv(w: f64, t: f64, k: u8) -> f64 {
    crate::math::powi(w, k as i32)
        * match k % 4 {
            0 => sin(w * t),
            1 => cos(w * t),
            2 => -sin(w * t),
            _ => -cos(w * t),
        }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dilation_matches_the_definition() {
        let x = [0.3, -0.2, 0.1, 0.25, -0.4];
        let delta = 0.35;
        for r in [
            Rhat::quartic(0.01, 1.0),
            Rhat::trig(0.02),
            Rhat::AxisSquare { eps: 0.01 },
        ] {
            let mut y = x;
            for t in y[..4].iter_mut() {
                *t *= delta;
            }
            y[4] *= delta * delta;
            let direct = r.value(&y) / (delta * delta);
            assert!((r.dilated(delta).value(&x) - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn partials_match_the_jet() {
        let x = [0.3, -0.2, 0.1, 0.25, -0.4];
        for r in [
            Rhat::quartic(0.01, 1.0).dilated(0.5),
            Rhat::trig(0.02).dilated(0.7),
        ] {
            let mut jet = Jet2::default();
            r.jet2(&x, &mut jet);
            for k in 0..5 {
                let mut a = [0u8; 5];
                a[k] = 1;
                assert!((r.partial(&x, &a).unwrap() - jet.g[k]).abs() < 1e-15);
                assert!((r.d1(&x, k) - jet.g[k]).abs() < 1e-15);
                for l in 0..5 {
                    let mut b = a;
                    b[l] += 1;
                    assert!((r.partial(&x, &b).unwrap() - jet.h[k][l]).abs() < 1e-15);
                }
            }
        }
    }
}
