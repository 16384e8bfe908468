//! Bounds for `int |(z', conj z', x^n)^J| / ||z'|^2 + i x^n|^a dV` over
//! `{|z'| <= rho1, |x^n| <= rho0}` and over the annulus
//! `{rho1 <= |z'| <= rho0, |x^n| <= rho0}`, with a polar quadrature oracle.
//!
//! With `m_k = j_k + j_{k+n-1}` and `j = j_{2n-1}`, the integrand only
//! depends on `|z_k|` and `|x^n|`. Integrating the sphere of radius `r` in
//! `C^{n-1}` gives `S(m) r^{2n-3+|m|}` with
//! `S(m) = 2 pi^{n-1} prod Gamma(m_k/2 + 1) / Gamma(|m|/2 + n - 1)`, so
//!
//! ```text
//! I = S(m) int r^{2n-3+|m|} F(r) dr,   F(r) = 2 int_0^rho0 x^j (r^4 + x^2)^{-a/2} dx.
//! ```

use crate::math::{exp, lgamma, ln, powf, powi};
use crate::quadrature::{adaptive, adaptive_geometric};
use crate::{Error, Result};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    /// `|z'| <= rho1`.
    Inner,
    /// `rho1 <= |z'| <= rho0`.
    Annulus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutlCase {
    pub n: usize,
    pub a: f64,
    /// Exponents on `(z', conj z', x^n)`, length `2n - 1`.
    pub j: Vec<u32>,
    pub rho1: f64,
    pub rho0: f64,
    pub region: Region,
}

/// Which of the three bound shapes applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// `beta < 2n - 3`, `beta != -1`.
    Power,
    /// `beta = -1`.
    Log,
    /// `beta >= 2n - 3`.
    Bounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutlBound {
    pub label: String,
    pub regime: Regime,
    /// The bound with `C = 1`.
    pub value: f64,
}

const BETA_TOL: f64 = 1e-12;

impl OutlCase {
    pub fn new(
        n: usize,
        a: f64,
        j: Vec<u32>,
        rho1: f64,
        rho0: f64,
        region: Region,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config("n must be at least 2".into()));
        }
        if j.len() != 2 * n - 1 {
            return Err(Error::Config(format!("J needs {} entries", 2 * n - 1)));
        }
        if !(rho1 > 0.0 && rho1 <= rho0 && rho0.is_finite() && a.is_finite()) {
            return Err(Error::Config(format!(
                "need 0 < rho1 <= rho0 < inf (got {rho1}, {rho0})"
            )));
        }
        Ok(OutlCase {
            n,
            a,
            j,
            rho1,
            rho0,
            region,
        })
    }

    /// `beta = (j_{2n-1} + |J| - 2a) + 2n - 1`.
    pub fn beta(&self) -> f64 {
        let total: u32 = self.j.iter().sum();
        (self.xn_power() + total) as f64 - 2.0 * self.a + (2 * self.n - 1) as f64
    }

    pub fn regime(&self) -> Regime {
        let b = self.beta();
        if (b + 1.0).abs() <= BETA_TOL {
            Regime::Log
        } else if b >= (2 * self.n - 3) as f64 - BETA_TOL {
            Regime::Bounded
        } else {
            Regime::Power
        }
    }

    fn xn_power(&self) -> u32 {
        self.j[2 * self.n - 2]
    }

    /// `m_k = j_k + j_{k+n-1}` for `k < n - 1`.
    fn zprime_powers(&self) -> Vec<u32> {
        (0..self.n - 1)
            .map(|k| self.j[k] + self.j[k + self.n - 1])
            .collect()
    }

    pub fn label(&self) -> String {
        let j: Vec<String> = self.j.iter().map(|v| format!("{v}")).collect();
        let region = match self.region {
            Region::Inner => "inner",
            Region::Annulus => "annulus",
        };
        format!("n={} J=({}) a={} {}", self.n, j.join(","), self.a, region)
    }
}

pub fn outl_bound(case: &OutlCase) -> OutlBound {
    let (b, n) = (case.beta(), case.n);
    let (r1, r0) = (case.rho1, case.rho0);
    let regime = case.regime();
    let (label, value) = match (case.region, regime) {
        (Region::Inner, Regime::Power) => ("rho1^(1+beta)", powf(r1, 1.0 + b)),
        (Region::Inner, Regime::Log) => ("1+|log rho1|", 1.0 + ln(r1).abs()),
        (Region::Inner, Regime::Bounded) => ("rho1^(2n-2)", powi(r1, 2 * n as i32 - 2)),
        (Region::Annulus, Regime::Power) => (
            "|rho1^(1+beta)-rho0^(1+beta)|",
            (powf(r1, 1.0 + b) - powf(r0, 1.0 + b)).abs(),
        ),
        (Region::Annulus, Regime::Log) => ("log(rho0/rho1)", ln(r0 / r1)),
        (Region::Annulus, Regime::Bounded) => ("rho0-rho1", r0 - r1),
    };
    OutlBound {
        label: label.into(),
        regime,
        value,
    }
}

/// Slope of `log(bound)` in `log(rho1)` as `rho1 -> 0`.
pub fn bound_exponent(case: &OutlCase) -> f64 {
    match (case.region, case.regime()) {
        (_, Regime::Log) => 0.0,
        (Region::Inner, Regime::Power) => 1.0 + case.beta(),
        (Region::Inner, Regime::Bounded) => (2 * case.n - 2) as f64,
        (Region::Annulus, Regime::Power) => (1.0 + case.beta()).min(0.0),
        (Region::Annulus, Regime::Bounded) => 0.0,
    }
}

/// Tolerances for [`outl_oracle`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutlQuadrature {
    /// Per-panel relative tolerance.
    pub rel_tol: f64,
    /// Rejection threshold on the combined relative error estimate.
    pub max_rel_err: f64,
}

impl Default for OutlQuadrature {
    fn default() -> Self {
        OutlQuadrature {
            rel_tol: 1e-9,
            max_rel_err: 1e-2,
        }
    }
}

/// Sphere integral of `prod |z_k|^{m_k}` over the unit sphere of `C^{n-1}`.
pub fn angular_factor(m: &[u32]) -> f64 {
    let k = m.len() as f64;
    let total: f64 = m.iter().map(|&v| v as f64).sum();
    let lg: f64 = m.iter().map(|&v| lgamma(v as f64 / 2.0 + 1.0)).sum();
    2.0 * powf(PI, k) * exp(lg - lgamma(total / 2.0 + k))
}

/// `2 int_0^rho0 x^j (r^4 + x^2)^{-a/2} dx` on dyadic panels at scale `r^2`.
fn profile(r: f64, j: u32, a: f64, rho0: f64, rel_tol: f64) -> (f64, f64) {
    let mut f = |x: f64| powi(x, j as i32) * powf(r * r * r * r + x * x, -0.5 * a);
    let scale = r * r;
    let (mut v, mut e) = (0.0, 0.0);
    let mut lo = 0.0;
    let mut hi = scale.min(rho0);
    loop {
        let (pv, pe) = adaptive(&mut f, lo, hi, rel_tol, 0.0, 60);
        v += pv;
        e += pe;
        if hi >= rho0 {
            break;
        }
        lo = hi;
        hi = (2.0 * hi).min(rho0);
    }
    (2.0 * v, 2.0 * e)
}

/// Exponent `p` with `I(rho1) ~ rho1^p` for the inner region, or `None`
/// when the inner integral diverges.
fn small_r_exponent(case: &OutlCase) -> Option<f64> {
    let m: u32 = case.zprime_powers().iter().sum();
    let j = case.xn_power() as f64;
    // F(r) ~ r^{2(j+1-a)} when a - j > 1, ~ log r at a - j = 1, bounded below that
    let f_exp = (2.0 * (j + 1.0 - case.a)).min(0.0);
    let p = (2 * case.n - 2) as f64 + m as f64 + f_exp;
    (p > BETA_TOL).then_some(p)
}

/// Polar quadrature of the integral; errors when it diverges or the error
/// estimate exceeds `quad.max_rel_err`.
pub fn outl_oracle(case: &OutlCase, quad: &OutlQuadrature) -> Result<f64> {
    let m = case.zprime_powers();
    let s = angular_factor(&m);
    let rpow = (2 * case.n - 3) as i32 + m.iter().sum::<u32>() as i32;
    let (j, a, rho0) = (case.xn_power(), case.a, case.rho0);
    let mut inner_err: f64 = 0.0;
    let mut g = |r: f64| {
        let (v, e) = profile(r, j, a, rho0, quad.rel_tol);
        if v > 0.0 {
            inner_err = inner_err.max(e / v);
        }
        powi(r, rpow) * v
    };
    let (value, err, tail) = match case.region {
        Region::Inner => {
            let p = small_r_exponent(case).ok_or_else(|| {
                Error::Numerical(format!("{}: integral diverges at z' = 0", case.label()))
            })?;
            // the last panel holds a fraction ~ 2^{-levels p} of the total
            let levels = ((30.0 / p) as usize).clamp(8, 400);
            let (v, e) = adaptive_geometric(&mut g, 0.0, case.rho1, levels, quad.rel_tol);
            (v, e, v * powf(0.5, levels as f64 * p))
        }
        Region::Annulus => {
            let (mut v, mut e) = (0.0, 0.0);
            let mut lo = case.rho1;
            while lo < case.rho0 {
                let hi = (2.0 * lo).min(case.rho0);
                let (pv, pe) = adaptive(&mut g, lo, hi, quad.rel_tol, 0.0, 100);
                v += pv;
                e += pe;
                lo = hi;
            }
            (v, e, 0.0)
        }
    };
    let rel = if value > 0.0 {
        (err + tail) / value + inner_err
    } else {
        0.0
    };
    if !(rel <= quad.max_rel_err) || !value.is_finite() {
        return Err(Error::Numerical(format!(
            "{}: relative error estimate {rel:.2e}",
            case.label()
        )));
    }
    Ok(s * value)
}

/// Case shape for a study over a `rho1` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct OutlStudyCase {
    pub n: usize,
    pub a: f64,
    pub j: Vec<u32>,
    pub region: Region,
}

impl OutlStudyCase {
    pub fn at(&self, rho1: f64, rho0: f64) -> Result<OutlCase> {
        OutlCase::new(self.n, self.a, self.j.clone(), rho1, rho0, self.region)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutlStudyRow {
    pub label: String,
    pub beta: f64,
    pub regime: Regime,
    pub bound_label: String,
    /// Predicted slope of the oracle in `log rho1`.
    pub exponent: f64,
    pub oracles: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Fitted slope of `log oracle`.
    pub slope: f64,
    /// Fitted slope of `log(oracle / bound)`; zero when the bound is sharp.
    pub ratio_slope: f64,
}

pub fn outl_study_row(
    case: &OutlStudyCase,
    rho1: &[f64],
    rho0: f64,
    quad: &OutlQuadrature,
) -> Result<OutlStudyRow> {
    let mut oracles = Vec::with_capacity(rho1.len());
    let mut ratios = Vec::with_capacity(rho1.len());
    let mut bound_label = String::new();
    let first = case.at(rho1[0], rho0)?;
    for &r in rho1 {
        let c = case.at(r, rho0)?;
        let o = outl_oracle(&c, quad)?;
        let b = outl_bound(&c);
        bound_label = b.label;
        oracles.push(o);
        ratios.push(o / b.value);
    }
    let lx: Vec<f64> = rho1.iter().map(|r| ln(*r)).collect();
    let lo: Vec<f64> = oracles.iter().map(|v| ln(*v)).collect();
    let lr: Vec<f64> = ratios.iter().map(|v| ln(*v)).collect();
    let exponent = bound_exponent(&first);
    Ok(OutlStudyRow {
        label: first.label(),
        beta: first.beta(),
        regime: first.regime(),
        bound_label,
        exponent,
        slope: crate::math::ls_slope(&lx, &lo),
        ratio_slope: crate::math::ls_slope(&lx, &lr),
        oracles,
        ratios,
    })
}

/// Twenty cases, ten per `n in {2, 3}`, in which the bound is attained up to
/// a constant: the middle regime with `a - j_{2n-1} > 1`, the bounded
/// regime with `J' = 0`, and `beta = -1` on the annulus.
pub fn reference_cases() -> Vec<OutlStudyCase> {
    let mk = |n: usize, a: f64, j: &[u32], region: Region| OutlStudyCase {
        n,
        a,
        j: j.to_vec(),
        region,
    };
    use Region::*;
    alloc::vec![
        mk(2, 1.5, &[0, 0, 0], Inner),
        mk(2, 1.75, &[0, 0, 0], Inner),
        mk(2, 2.0, &[1, 0, 0], Inner),
        mk(2, 2.25, &[1, 1, 0], Inner),
        mk(2, 2.5, &[0, 0, 1], Inner),
        mk(2, 0.0, &[0, 0, 0], Inner),
        mk(2, 0.5, &[0, 0, 1], Inner),
        mk(2, 1.0, &[0, 0, 1], Inner),
        mk(2, 1.0, &[0, 0, 2], Inner),
        mk(2, 2.0, &[0, 0, 0], Annulus),
        mk(3, 1.5, &[0, 0, 0, 0, 0], Inner),
        mk(3, 2.0, &[0, 0, 0, 0, 0], Inner),
        mk(3, 2.5, &[0, 0, 0, 0, 0], Inner),
        mk(3, 2.75, &[0, 0, 0, 0, 0], Inner),
        mk(3, 2.5, &[1, 0, 0, 0, 0], Inner),
        mk(3, 3.0, &[1, 0, 1, 0, 0], Inner),
        mk(3, 0.0, &[0, 0, 0, 0, 0], Inner),
        mk(3, 0.5, &[0, 0, 0, 0, 1], Inner),
        mk(3, 1.0, &[0, 0, 0, 0, 1], Inner),
        mk(3, 3.0, &[0, 0, 0, 0, 0], Annulus),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{asinh, sqrt};
    use crate::rng::SampleRng;

    fn case(n: usize, a: f64, j: &[u32], rho1: f64, region: Region) -> OutlCase {
        OutlCase::new(n, a, j.to_vec(), rho1, 1.0, region).unwrap()
    }

    #[test]
    fn regimes_of_the_worked_cases() {
        let c = case(2, 2.0, &[0, 0, 0], 0.5, Region::Inner);
        assert_eq!(c.beta(), -1.0);
        assert_eq!(outl_bound(&c).regime, Regime::Log);
        assert!((outl_bound(&c).value - (1.0 + ln(2.0))).abs() < 1e-15);
        let c = case(2, 1.0, &[0, 0, 0], 0.5, Region::Inner);
        assert_eq!(c.beta(), 1.0);
        assert!((outl_bound(&c).value - 0.25).abs() < 1e-15);
        let c = case(2, 1.0, &[0, 0, 2], 0.5, Region::Inner);
        assert_eq!(c.beta(), 5.0);
        assert_eq!(outl_bound(&c).regime, Regime::Bounded);
        assert!((outl_bound(&c).value - 0.25).abs() < 1e-15);
    }

    #[test]
    fn forms_agree_where_the_regime_changes() {
        // beta = 2n - 3 exactly: rho1^(1+beta) = rho1^(2n-2)
        for n in [2usize, 3, 4] {
            let b = (2 * n - 3) as f64;
            assert!((1.0 + b - (2 * n - 2) as f64).abs() < 1e-15);
            let mut j = alloc::vec![0u32; 2 * n - 1];
            j[0] = 2;
            let a = (b - 2.0 - (2 * n - 1) as f64) / -2.0;
            let c = OutlCase::new(n, a, j, 0.3, 1.0, Region::Inner).unwrap();
            assert!((c.beta() - b).abs() < 1e-12);
            let lower = OutlCase {
                a: a + 1e-6,
                ..c.clone()
            };
            let (v, w) = (outl_bound(&c).value, outl_bound(&lower).value);
            assert!((v - w).abs() <= 1e-5 * v);
        }
    }

    #[test]
    fn unit_integrand_gives_the_cylinder_volume() {
        let v = outl_oracle(
            &case(2, 0.0, &[0, 0, 0], 1.0, Region::Inner),
            &OutlQuadrature::default(),
        )
        .unwrap();
        assert!((v - 2.0 * PI).abs() < 1e-9 * 2.0 * PI);
    }

    #[test]
    fn angular_factor_matches_sphere_moments() {
        // area of S^3 = 2 pi^2, int_{S^3} |z_1|^2 = pi^2
        assert!((angular_factor(&[0, 0]) - 2.0 * PI * PI).abs() < 1e-12);
        assert!((angular_factor(&[2, 0]) - PI * PI).abs() < 1e-12);
        assert!((angular_factor(&[1]) - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn closed_form_for_a_equal_one() {
        // 2 pi int_0^{rho1^2} asinh(rho0/s) ds
        for rho1 in [0.5, 0.25, 0.125, 0.01] {
            let s = rho1 * rho1;
            let exact = 2.0 * PI * (s * asinh(1.0 / s) + asinh(s));
            let v = outl_oracle(
                &case(2, 1.0, &[0, 0, 0], rho1, Region::Inner),
                &OutlQuadrature::default(),
            )
            .unwrap();
            assert!((v - exact).abs() <= 1e-8 * exact, "{rho1}: {v} vs {exact}");
        }
    }

    #[test]
    fn monte_carlo_agrees_for_a_first_order_numerator() {
        // |z| / |(|z|^2 + i x)| on {|z| <= 0.5, |x| <= 1}
        let c = case(2, 1.0, &[1, 0, 0], 0.5, Region::Inner);
        let v = outl_oracle(&c, &OutlQuadrature::default()).unwrap();
        let mut rng = SampleRng::new(3, 0, 0, 3);
        let (mut sum, mut sum2) = (0.0, 0.0);
        let count = 200_000;
        let vol = PI * 0.25 * 2.0;
        for _ in 0..count {
            let r = 0.5 * sqrt(rng.uniform());
            let x = 2.0 * rng.uniform() - 1.0;
            let f = r / sqrt(r * r * r * r + x * x);
            sum += f;
            sum2 += f * f;
        }
        let mean = sum / count as f64;
        let se = sqrt((sum2 / count as f64 - mean * mean) / count as f64);
        assert!(
            (vol * mean - v).abs() <= 4.0 * vol * se,
            "{v} vs {}",
            vol * mean
        );
    }

    #[test]
    fn inner_log_case_diverges() {
        assert!(outl_oracle(
            &case(2, 2.0, &[0, 0, 0], 0.5, Region::Inner),
            &OutlQuadrature::default()
        )
        .is_err());
    }

    #[test]
    fn annulus_log_case_tracks_the_log() {
        let quad = OutlQuadrature::default();
        let ratios: Vec<f64> = [1e-1, 1e-2, 1e-3]
            .iter()
            .map(|&r| {
                outl_oracle(&case(2, 2.0, &[0, 0, 0], r, Region::Annulus), &quad).unwrap()
                    / (1.0 + ln(r).abs())
            })
            .collect();
        let (lo, hi) = ratios
            .iter()
            .fold((f64::MAX, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(hi <= 2.0 * lo, "{ratios:?}");
    }

    #[test]
    fn bounded_numerators_stay_below_sup_times_volume() {
        // j_{2n-1} >= a: integrand <= rho1^{|m|} rho0^{j-a}
        for (n, a, j) in [
            (2usize, 1.0, alloc::vec![1u32, 0, 1]),
            (3, 0.5, alloc::vec![0, 1, 0, 0, 1]),
            (2, 2.0, alloc::vec![0, 0, 2]),
        ] {
            for rho1 in [0.7, 0.2] {
                let c = OutlCase::new(n, a, j.clone(), rho1, 1.0, Region::Inner).unwrap();
                let v = outl_oracle(&c, &OutlQuadrature::default()).unwrap();
                let m: u32 = c.zprime_powers().iter().sum();
                let ball = powi(PI, n as i32 - 1) * powi(rho1, 2 * n as i32 - 2)
                    / crate::math::factorial(n - 1);
                assert!(v <= powi(rho1, m as i32) * ball * 2.0, "{}", c.label());
            }
        }
    }
}
