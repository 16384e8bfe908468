//! Empirical `C^{k+alpha}` norms of sampled fields and ratio checks for the
//! Holder interpolation and product inequalities.
//!
//! Conventions: `||u||_k = max_{j <= k} sup |d^j u|` with the sup running
//! over all partials of order `j`, and for `0 < alpha < 1`
//! `||u||_{k+alpha} = max(||u||_k, max_{|I| = k} |d^I u|_alpha)`.

use crate::math::{cos, floor, powf, sin, sqrt};
use crate::rng::SampleRng;
use crate::{Error, Result, C64};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Pair scans use every pair up to this many points and stride sampling
/// above it.
pub const ALL_PAIRS_LIMIT: usize = 1000;
/// Largest number of pairs scanned by a seminorm.
pub const MAX_PAIRS: usize = 1_000_000;
/// Containment constant for [`check_scaled_products`]:
/// `B_{rho/c} subset D subset B_{c rho}`.
pub const SCALED_DOMAIN_C: f64 = 4.0;

/// A scalar field with optional exact partial derivatives.
pub trait Field {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> C64;
    /// `d^I u(x)` for an index list `I`; `None` when not available.
    fn derivative(&self, _x: &[f64], _idx: &[usize]) -> Option<C64> {
        None
    }
}

/// How a [`SampledField`] obtains derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Derivatives {
    Exact,
    /// Nested central differences with step `h`.
    FiniteDifference {
        h: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// Any other sampled set; only pairwise data is used.
    Cloud,
}

/// Values and partials up to order `k_max` on a point set.
#[derive(Clone, Debug)]
pub struct SampledField {
    pub dim: usize,
    /// Row-major `count x dim`.
    pub points: Vec<f64>,
    pub k_max: usize,
    /// Nondecreasing index tuples of each order; `multi[0] = [[]]`.
    pub multi: Vec<Vec<Vec<usize>>>,
    /// `derivs[j][p * multi[j].len() + m]`.
    pub derivs: Vec<Vec<C64>>,
    pub domain: Domain,
}

fn index_tuples(dim: usize, order: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..order {
        let mut next = Vec::new();
        for t in &out {
            let lo = t.last().copied().unwrap_or(0);
            for i in lo..dim {
                let mut u = t.clone();
                u.push(i);
                next.push(u);
            }
        }
        out = next;
    }
    out
}

fn finite_difference(f: &dyn Field, x: &[f64], idx: &[usize], h: f64) -> C64 {
    match idx.split_last() {
        None => f.value(x),
        Some((&i, rest)) => {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            (finite_difference(f, &xp, rest, h) - finite_difference(f, &xm, rest, h)) / (2.0 * h)
        }
    }
}

impl SampledField {
    /// Samples `f` and its partials to order `k_max` at `points`.
    pub fn sample(
        f: &dyn Field,
        points: Vec<f64>,
        k_max: usize,
        source: Derivatives,
        domain: Domain,
    ) -> Result<Self> {
        let dim = f.dim();
        if dim == 0 || points.len() % dim != 0 {
            return Err(Error::Config(
                "point array does not match the field dimension".into(),
            ));
        }
        let count = points.len() / dim;
        if count < 2 {
            return Err(Error::Precondition(
                "a sampled field needs at least two points".into(),
            ));
        }
        let multi: Vec<Vec<Vec<usize>>> = (0..=k_max).map(|j| index_tuples(dim, j)).collect();
        let mut derivs = Vec::with_capacity(k_max + 1);
        for tuples in &multi {
            let mut vals = Vec::with_capacity(count * tuples.len());
            for p in 0..count {
                let x = &points[p * dim..(p + 1) * dim];
                for t in tuples {
                    let v = if t.is_empty() {
                        f.value(x)
                    } else {
                        match source {
                            Derivatives::Exact => f.derivative(x, t).ok_or_else(|| {
                                Error::Capability(format!(
                                    "exact derivative of order {} not available",
                                    t.len()
                                ))
                            })?,
                            Derivatives::FiniteDifference { h } => finite_difference(f, x, t, h),
                        }
                    };
                    vals.push(v);
                }
            }
            derivs.push(vals);
        }
        Ok(SampledField {
            dim,
            points,
            k_max,
            multi,
            derivs,
            domain,
        })
    }

    pub fn count(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn point(&self, p: usize) -> &[f64] {
        &self.points[p * self.dim..(p + 1) * self.dim]
    }

    fn value_at(&self, order: usize, p: usize, m: usize) -> C64 {
        self.derivs[order][p * self.multi[order].len() + m]
    }

    /// `c u`, exactly.
    pub fn scaled(&self, c: C64) -> Self {
        let mut out = self.clone();
        for d in &mut out.derivs {
            for v in d.iter_mut() {
                *v *= c;
            }
        }
        out
    }

    /// `u v` on the common point set, with partials by the Leibniz rule.
    pub fn product(&self, other: &Self) -> Result<Self> {
        if self.points != other.points {
            return Err(Error::Precondition(
                "product of fields on different point sets".into(),
            ));
        }
        let k_max = self.k_max.min(other.k_max);
        let pos = |order: usize, t: &[usize]| {
            self.multi[order]
                .iter()
                .position(|u| u.as_slice() == t)
                .expect("tuple present")
        };
        let mut derivs = Vec::new();
        for (j, tuples) in self.multi.iter().enumerate().take(k_max + 1) {
            let mut vals = Vec::with_capacity(self.count() * tuples.len());
            for p in 0..self.count() {
                for t in tuples {
                    let mut acc = C64::new(0.0, 0.0);
                    for mask in 0u32..(1 << j) {
                        let (mut a, mut b) = (Vec::new(), Vec::new());
                        for (i, &c) in t.iter().enumerate() {
                            if mask & (1 << i) != 0 {
                                a.push(c);
                            } else {
                                b.push(c);
                            }
                        }
                        acc += self.value_at(a.len(), p, pos(a.len(), &a))
                            * other.value_at(b.len(), p, pos(b.len(), &b));
                    }
                    vals.push(acc);
                }
            }
            derivs.push(vals);
        }
        Ok(SampledField {
            dim: self.dim,
            points: self.points.clone(),
            k_max,
            multi: self.multi[..=k_max].to_vec(),
            derivs,
            domain: self.domain.clone(),
        })
    }

    /// `sup |d^j u|` over points and partials of order `j`.
    pub fn sup_order(&self, j: usize) -> Result<f64> {
        self.require(j)?;
        Ok(self.derivs[j].iter().map(|v| v.norm()).fold(0.0, f64::max))
    }

    fn require(&self, k: usize) -> Result<()> {
        if k > self.k_max {
            return Err(Error::Capability(format!(
                "derivatives of order {k} not sampled (k_max = {})",
                self.k_max
            )));
        }
        Ok(())
    }

    /// `|d^I u|_alpha` maximized over `|I| = order`, with the attaining pair.
    pub fn derivative_seminorm(
        &self,
        order: usize,
        alpha: f64,
    ) -> Result<(f64, Option<(usize, usize)>)> {
        self.require(order)?;
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Precondition(format!(
                "alpha = {alpha} outside (0, 1]"
            )));
        }
        let nm = self.multi[order].len();
        let vals = &self.derivs[order];
        let mut best = 0.0;
        let mut arg = None;
        for_each_pair(self.count(), |a, b| {
            let mut d2 = 0.0;
            for (x, y) in self.point(a).iter().zip(self.point(b)) {
                d2 += (x - y) * (x - y);
            }
            if d2 == 0.0 {
                return;
            }
            let w = powf(d2, -0.5 * alpha);
            for m in 0..nm {
                let q = (vals[a * nm + m] - vals[b * nm + m]).norm() * w;
                if q > best {
                    best = q;
                    arg = Some((a, b));
                }
            }
        });
        Ok((best, arg))
    }

    /// `||u||_a` for real `a >= 0`.
    pub fn norm(&self, a: f64) -> Result<f64> {
        if a < 0.0 {
            return Err(Error::Precondition("negative norm order".into()));
        }
        let k = floor(a + 1e-12) as usize;
        let alpha = a - k as f64;
        let mut v = 0.0;
        for j in 0..=k {
            v = f64::max(v, self.sup_order(j)?);
        }
        if alpha > 1e-12 {
            v = v.max(self.derivative_seminorm(k, alpha)?.0);
        }
        Ok(v)
    }
}

/// Calls `f(a, b)` for all pairs `a < b` when `count <= ALL_PAIRS_LIMIT`,
/// else for every `stride`-th pair in lexicographic order.
fn for_each_pair<F: FnMut(usize, usize)>(count: usize, mut f: F) {
    let total = count * (count - 1) / 2;
    let stride = if count <= ALL_PAIRS_LIMIT {
        1
    } else {
        total.div_ceil(MAX_PAIRS)
    };
    let mut k = 0usize;
    for a in 0..count {
        for b in a + 1..count {
            if k % stride == 0 {
                f(a, b);
            }
            k += 1;
        }
    }
}

/// `|u|_alpha` with the attaining pair.
pub fn holder_seminorm(u: &SampledField, alpha: f64) -> Result<(f64, Option<(usize, usize)>)> {
    u.derivative_seminorm(0, alpha)
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormReport {
    pub k: usize,
    pub alpha: f64,
    /// `||u||_j` for `j <= k`.
    pub values: Vec<f64>,
    /// `max_{|I| = k} |d^I u|_alpha` (0 when `alpha = 0`).
    pub seminorm: f64,
    pub pair: Option<(usize, usize)>,
    pub norm: f64,
}

pub fn ck_alpha_norm(u: &SampledField, k: usize, alpha: f64) -> Result<NormReport> {
    let mut values = Vec::with_capacity(k + 1);
    let mut run = 0.0;
    for j in 0..=k {
        run = f64::max(run, u.sup_order(j)?);
        values.push(run);
    }
    let (seminorm, pair) = if alpha > 0.0 {
        u.derivative_seminorm(k, alpha)?
    } else {
        (0.0, None)
    };
    Ok(NormReport {
        k,
        alpha,
        norm: run.max(seminorm),
        values,
        seminorm,
        pair,
    })
}

/// `lhs / rhs` for one inequality with unit constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// Set when `rhs = 0 < lhs`, which contradicts the inequality's premise.
    pub flagged: bool,
}

impl RatioReport {
    fn new(lhs: f64, rhs: f64) -> Self {
        if rhs > 0.0 {
            RatioReport {
                lhs,
                rhs,
                ratio: lhs / rhs,
                flagged: false,
            }
        } else if lhs > 0.0 {
            RatioReport {
                lhs,
                rhs,
                ratio: f64::INFINITY,
                flagged: true,
            }
        } else {
            RatioReport {
                lhs,
                rhs,
                ratio: 0.0,
                flagged: false,
            }
        }
    }
}

/// `||u||_{lambda a + (1-lambda) b} / (||u||_a^lambda ||u||_b^{1-lambda})`.
pub fn check_interpolation(u: &SampledField, a: f64, b: f64, lambda: f64) -> Result<RatioReport> {
    if !(lambda > 0.0 && lambda < 1.0) || !(0.0 <= a && a < b) {
        return Err(Error::Precondition(format!(
            "need 0 < lambda < 1 and 0 <= a < b (got {lambda}, {a}, {b})"
        )));
    }
    let lhs = u.norm(lambda * a + (1.0 - lambda) * b)?;
    let rhs = powf(u.norm(a)?, lambda) * powf(u.norm(b)?, 1.0 - lambda);
    Ok(RatioReport::new(lhs, rhs))
}

/// `||uv||_a / (||u||_0 ||v||_a + ||u||_a ||v||_0)`.
pub fn check_product(u: &SampledField, v: &SampledField, a: f64) -> Result<RatioReport> {
    let uv = u.product(v)?;
    let lhs = uv.norm(a)?;
    let rhs = u.norm(0.0)? * v.norm(a)? + u.norm(a)? * v.norm(0.0)?;
    Ok(RatioReport::new(lhs, rhs))
}

/// `rho^e prod ||u_j||_{d_j+b_j} / (prod ||u_j||_{d_j+a_j} + prod ||u_j||_{d_j+c_j})`
/// with `e = sum (b_j + d_j - [d_j])`; `b` must lie on the segment `[a, c]`.
pub fn check_scaled_products(
    fields: &[&SampledField],
    d: &[f64],
    a: &[f64],
    b: &[f64],
    c: &[f64],
    rho: f64,
) -> Result<RatioReport> {
    let m = fields.len();
    if m == 0 || d.len() != m || a.len() != m || b.len() != m || c.len() != m {
        return Err(Error::Config(
            "exponent lists must match the number of fields".into(),
        ));
    }
    if [d, a, b, c].iter().any(|v| v.iter().any(|x| *x < 0.0)) {
        return Err(Error::Precondition("exponents must be non-negative".into()));
    }
    if !on_segment(a, b, c) {
        return Err(Error::Precondition(
            "b is not in the convex hull of a and c".into(),
        ));
    }
    for f in fields {
        match &f.domain {
            Domain::Ball { radius, .. }
                if *radius >= rho / SCALED_DOMAIN_C && *radius <= SCALED_DOMAIN_C * rho => {}
            _ => {
                return Err(Error::Precondition(
                    "domain must be a ball comparable to B_rho".into(),
                ))
            }
        }
    }
    let e: f64 = (0..m).map(|j| b[j] + d[j] - floor(d[j])).sum();
    let mut lhs = powf(rho, e);
    let (mut ra, mut rc) = (1.0, 1.0);
    for j in 0..m {
        lhs *= fields[j].norm(d[j] + b[j])?;
        ra *= fields[j].norm(d[j] + a[j])?;
        rc *= fields[j].norm(d[j] + c[j])?;
    }
    Ok(RatioReport::new(lhs, ra + rc))
}

fn on_segment(a: &[f64], b: &[f64], c: &[f64]) -> bool {
    let tol = 1e-12;
    let mut lambda: Option<f64> = None;
    for j in 0..a.len() {
        let span = a[j] - c[j];
        if span.abs() <= tol {
            if (b[j] - c[j]).abs() > tol {
                return false;
            }
            continue;
        }
        let l = (b[j] - c[j]) / span;
        if !(-tol..=1.0 + tol).contains(&l) {
            return false;
        }
        match lambda {
            Some(prev) if (prev - l).abs() > 1e-9 => return false,
            _ => lambda = Some(l),
        }
    }
    true
}

/// Tensor grid of `per_axis` points on `[-r, r]^dim` clipped to the closed
/// ball of radius `r` (the axis endpoints are kept).
pub fn ball_grid(dim: usize, radius: f64, per_axis: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut idx = vec![0usize; dim];
    let step = 2.0 * radius / (per_axis - 1) as f64;
    loop {
        let x: Vec<f64> = idx.iter().map(|&i| -radius + step * i as f64).collect();
        if x.iter().map(|t| t * t).sum::<f64>() <= radius * radius * (1.0 + 1e-12) {
            out.extend_from_slice(&x);
        }
        let mut k = 0;
        loop {
            if k == dim {
                return out;
            }
            idx[k] += 1;
            if idx[k] < per_axis {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// `sum_m amp_m sin(k_m . x + phase_m)` with exact derivatives of all orders.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPolynomial {
    pub dim: usize,
    pub terms: Vec<(Vec<f64>, f64, f64)>,
}

impl TrigPolynomial {
    /// `terms` random modes with integer-free frequencies in `[-max_freq, max_freq]`.
    pub fn random(dim: usize, terms: usize, max_freq: f64, rng: &mut SampleRng) -> Self {
        let terms = (0..terms)
            .map(|_| {
                let k: Vec<f64> = (0..dim)
                    .map(|_| max_freq * (2.0 * rng.uniform() - 1.0))
                    .collect();
                let amp = 2.0 * rng.uniform() - 1.0;
                let phase = 2.0 * core::f64::consts::PI * rng.uniform();
                (k, amp, phase)
            })
            .collect();
        TrigPolynomial { dim, terms }
    }
}

impl Field for TrigPolynomial {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> C64 {
        C64::new(self.derivative(x, &[]).map(|c| c.re).unwrap_or(0.0), 0.0)
    }

    fn derivative(&self, x: &[f64], idx: &[usize]) -> Option<C64> {
        let mut s = 0.0;
        for (k, amp, phase) in &self.terms {
            let t = k.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + phase;
            let mut coef = *amp;
            for &i in idx {
                coef *= k[i];
            }
            // d^j sin = sin(t + j pi/2)
            s += coef
                * match idx.len() % 4 {
                    0 => sin(t),
                    1 => cos(t),
                    2 => -sin(t),
                    _ => -cos(t),
                };
        }
        Some(C64::new(s, 0.0))
    }
}

/// A field given by closures for the value and (optionally) derivatives.
pub struct FnField<V, D>
where
    V: Fn(&[f64]) -> C64,
    D: Fn(&[f64], &[usize]) -> Option<C64>,
{
    pub dim: usize,
    pub value: V,
    pub derivative: D,
}

impl<V, D> Field for FnField<V, D>
where
    V: Fn(&[f64]) -> C64,
    D: Fn(&[f64], &[usize]) -> Option<C64>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> C64 {
        (self.value)(x)
    }

    fn derivative(&self, x: &[f64], idx: &[usize]) -> Option<C64> {
        (self.derivative)(x, idx)
    }
}

/// Euclidean distance helper for reports.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball(dim: usize, per_axis: usize) -> (Vec<f64>, Domain) {
        (
            ball_grid(dim, 1.0, per_axis),
            Domain::Ball {
                center: vec![0.0; dim],
                radius: 1.0,
            },
        )
    }

    fn x1_squared() -> FnField<impl Fn(&[f64]) -> C64, impl Fn(&[f64], &[usize]) -> Option<C64>> {
        FnField {
            dim: 3,
            value: |x: &[f64]| C64::new(x[0] * x[0], 0.0),
            derivative: |x: &[f64], idx: &[usize]| {
                Some(C64::new(
                    match idx {
                        [] => x[0] * x[0],
                        [0] => 2.0 * x[0],
                        [0, 0] => 2.0,
                        _ => 0.0,
                    },
                    0.0,
                ))
            },
        }
    }

    #[test]
    fn holder_of_coordinate_is_sqrt_two() {
        let (pts, dom) = ball(3, 7);
        let f = FnField {
            dim: 3,
            value: |x: &[f64]| C64::new(x[0], 0.0),
            derivative: |_: &[f64], _: &[usize]| None,
        };
        let u = SampledField::sample(&f, pts, 0, Derivatives::Exact, dom).unwrap();
        let (v, pair) = holder_seminorm(&u, 0.5).unwrap();
        assert!((v - sqrt(2.0)).abs() < 1e-12);
        let (a, b) = pair.unwrap();
        assert!((distance(u.point(a), u.point(b)) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_field_has_zero_seminorm() {
        let (pts, dom) = ball(2, 9);
        let f = FnField {
            dim: 2,
            value: |_: &[f64]| C64::new(3.0, 0.0),
            derivative: |_: &[f64], _: &[usize]| Some(C64::new(0.0, 0.0)),
        };
        let u = SampledField::sample(&f, pts, 1, Derivatives::Exact, dom).unwrap();
        assert_eq!(holder_seminorm(&u, 0.3).unwrap().0, 0.0);
        let r = check_interpolation(&u, 0.0, 1.0, 0.5).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sqrt_radius_field_against_radial_oracle() {
        let (pts, dom) = ball(3, 11);
        let f = FnField {
            dim: 3,
            value: |x: &[f64]| C64::new(sqrt(sqrt(x.iter().map(|t| t * t).sum())), 0.0),
            derivative: |_: &[f64], _: &[usize]| None,
        };
        let u = SampledField::sample(&f, pts, 0, Derivatives::Exact, dom).unwrap();
        let (v, _) = holder_seminorm(&u, 0.5).unwrap();
        // dense 1D radial oracle: t -> t^{1/2} on [0, 1]
        let mut oracle: f64 = 0.0;
        let m = 2001;
        for i in 0..m {
            for j in i + 1..m {
                let (a, b) = (i as f64 / (m - 1) as f64, j as f64 / (m - 1) as f64);
                oracle = oracle.max((sqrt(b) - sqrt(a)) / sqrt(b - a));
            }
        }
        assert!((oracle - 1.0).abs() < 1e-9);
        assert!((v - oracle).abs() <= 0.05 * oracle, "{v}");
    }

    #[test]
    fn norms_of_x1_squared() {
        let (pts, dom) = ball(3, 5);
        let u = SampledField::sample(&x1_squared(), pts, 2, Derivatives::Exact, dom).unwrap();
        let rep = ck_alpha_norm(&u, 2, 0.0).unwrap();
        assert_eq!(rep.values, vec![1.0, 2.0, 2.0]);
        assert_eq!(rep.norm, 2.0);
        let r = check_interpolation(&u, 0.0, 2.0, 0.5).unwrap();
        assert!((r.ratio - sqrt(2.0)).abs() < 1e-12);
    }

    #[test]
    fn linear_field_has_flat_gradient() {
        let (pts, dom) = ball(3, 5);
        let f = FnField {
            dim: 3,
            value: |x: &[f64]| C64::new(x[0] - 2.0 * x[2], 0.0),
            derivative: |_: &[f64], idx: &[usize]| {
                Some(C64::new(
                    match idx {
                        [0] => 1.0,
                        [2] => -2.0,
                        _ => 0.0,
                    },
                    0.0,
                ))
            },
        };
        let u = SampledField::sample(&f, pts, 1, Derivatives::Exact, dom).unwrap();
        assert_eq!(u.derivative_seminorm(1, 0.5).unwrap().0, 0.0);
    }

    #[test]
    fn finite_differences_match_exact_norms() {
        let mut rng = SampleRng::new(42, 0, 0, 8);
        let t = TrigPolynomial::random(3, 5, 3.0, &mut rng);
        let (pts, dom) = ball(3, 7);
        let ex = SampledField::sample(&t, pts.clone(), 2, Derivatives::Exact, dom.clone()).unwrap();
        let fd = SampledField::sample(&t, pts, 2, Derivatives::FiniteDifference { h: 1e-4 }, dom)
            .unwrap();
        for a in [0.0, 0.5, 1.0, 1.5, 2.0] {
            let (x, y) = (ex.norm(a).unwrap(), fd.norm(a).unwrap());
            assert!((x - y).abs() <= 1e-3 * x, "a = {a}: {x} vs {y}");
        }
    }

    #[test]
    fn missing_exact_derivatives_are_a_capability_error() {
        let (pts, dom) = ball(2, 5);
        let f = FnField {
            dim: 2,
            value: |x: &[f64]| C64::new(x[0], 0.0),
            derivative: |_: &[f64], _: &[usize]| None,
        };
        assert!(matches!(
            SampledField::sample(&f, pts, 1, Derivatives::Exact, dom),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn product_with_one_and_with_itself() {
        let (pts, dom) = ball(3, 5);
        let one = FnField {
            dim: 3,
            value: |_: &[f64]| C64::new(1.0, 0.0),
            derivative: |_: &[f64], _: &[usize]| Some(C64::new(0.0, 0.0)),
        };
        let x1 = FnField {
            dim: 3,
            value: |x: &[f64]| C64::new(x[0], 0.0),
            derivative: |x: &[f64], idx: &[usize]| {
                Some(C64::new(
                    match idx {
                        [] => x[0],
                        [0] => 1.0,
                        _ => 0.0,
                    },
                    0.0,
                ))
            },
        };
        let u = SampledField::sample(&x1, pts.clone(), 2, Derivatives::Exact, dom.clone()).unwrap();
        let v = SampledField::sample(&one, pts, 2, Derivatives::Exact, dom).unwrap();
        assert!((check_product(&u, &v, 1.0).unwrap().ratio - 0.5).abs() < 1e-12);
        // (x^1)^2: ||.||_1 = 2, bound 1*1 + 1*1
        assert!((check_product(&u, &u, 1.0).unwrap().ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scaled_products_are_symmetric_and_check_the_hull() {
        let (pts, dom) = ball(2, 9);
        let mut rng = SampleRng::new(7, 0, 0, 8);
        let t = TrigPolynomial::random(2, 3, 2.0, &mut rng);
        let u = SampledField::sample(&t, pts, 1, Derivatives::Exact, dom).unwrap();
        let f = [&u, &u];
        let r1 = check_scaled_products(&f, &[0.0, 0.0], &[0.0, 1.0], &[0.5, 0.5], &[1.0, 0.0], 1.0)
            .unwrap();
        let r2 = check_scaled_products(&f, &[0.0, 0.0], &[1.0, 0.0], &[0.5, 0.5], &[0.0, 1.0], 1.0)
            .unwrap();
        assert_eq!(r1, r2);
        assert!(
            check_scaled_products(&f, &[0.0, 0.0], &[0.0, 1.0], &[0.7, 0.5], &[1.0, 0.0], 1.0)
                .is_err()
        );
        let single = check_scaled_products(&[&u], &[0.0], &[1.0], &[1.0], &[1.0], 1.0).unwrap();
        assert!(single.ratio <= 0.5 + 1e-12);
    }

    #[test]
    fn dilated_sine_ratio_does_not_grow() {
        let mut ratios = Vec::new();
        for rho in [1.0, 0.5, 0.25] {
            let pts = ball_grid(2, rho, 15);
            let dom = Domain::Ball {
                center: vec![0.0; 2],
                radius: rho,
            };
            let f = FnField {
                dim: 2,
                value: move |x: &[f64]| C64::new(sin(x[0] / rho), 0.0),
                derivative: move |x: &[f64], idx: &[usize]| {
                    if idx.iter().any(|&i| i != 0) {
                        return Some(C64::new(0.0, 0.0));
                    }
                    let s = powf(rho, -(idx.len() as f64));
                    let t = x[0] / rho;
                    Some(C64::new(
                        s * match idx.len() % 4 {
                            0 => sin(t),
                            1 => cos(t),
                            2 => -sin(t),
                            _ => -cos(t),
                        },
                        0.0,
                    ))
                },
            };
            let u = SampledField::sample(&f, pts, 1, Derivatives::Exact, dom).unwrap();
            ratios.push(
                check_scaled_products(
                    &[&u, &u],
                    &[0.0, 0.0],
                    &[0.0, 1.0],
                    &[0.5, 0.5],
                    &[1.0, 0.0],
                    rho,
                )
                .unwrap()
                .ratio,
            );
        }
        for r in &ratios {
            assert!(*r <= 4.0 * ratios[0], "{ratios:?}");
        }
    }
}
