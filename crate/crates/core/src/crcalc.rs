//! Tangential `(0,q)`-forms on `M`, the operator `dbar_M`, matrix wedge
//! products and the tangential projection modulo `theta`.

use crate::geometry::{BasePoint, GraphDefiningFunction};
use crate::{Error, Result, C64, MAX_N};
use alloc::vec;
use alloc::vec::Vec;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Strictly increasing tuples from `{0, .., m-1}` of length `q`, as bit
/// masks in lexicographic tuple order.
pub fn multi_indices(m: usize, q: usize) -> Vec<u32> {
    fn rec(start: usize, m: usize, q: usize, acc: u32, out: &mut Vec<u32>) {
        if q == 0 {
            out.push(acc);
            return;
        }
        for i in start..m {
            rec(i + 1, m, q - 1, acc | (1 << i), out);
        }
    }
    let mut out = Vec::new();
    if q <= m {
        rec(0, m, q, 0, &mut out);
    }
    out
}

/// Position of `mask` in [`multi_indices`]`(m, q)`.
pub fn index_of(list: &[u32], mask: u32) -> Option<usize> {
    list.iter().position(|&k| k == mask)
}

/// Elements of a mask in increasing order.
pub fn elements(mask: u32) -> Vec<usize> {
    (0..32).filter(|b| mask & (1 << b) != 0).collect()
}

/// Sign of `dzbar^I ^ dzbar^J` relative to `dzbar^{I u J}` (disjoint masks).
#[inline]
pub fn index_merge_sign(i: u32, j: u32) -> f64 {
    crate::exterior::merge_sign(i as u64, j as u64)
}

/// The pointwise value of a form: for each increasing index (in
/// [`multi_indices`] order) an `r x r` row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FormValue {
    /// Number of `dzbar` generators the indices range over.
    pub m: usize,
    pub q: usize,
    pub rank: usize,
    pub coeffs: Vec<C64>,
}

impl FormValue {
    pub fn zero(m: usize, q: usize, rank: usize) -> Self {
        let len = multi_indices(m, q).len() * rank * rank;
        FormValue {
            m,
            q,
            rank,
            coeffs: vec![ZERO; len],
        }
    }

    pub fn indices(&self) -> Vec<u32> {
        multi_indices(self.m, self.q)
    }

    /// Matrix block of index `k`.
    pub fn block(&self, k: usize) -> &[C64] {
        let r2 = self.rank * self.rank;
        &self.coeffs[k * r2..(k + 1) * r2]
    }

    pub fn block_mut(&mut self, k: usize) -> &mut [C64] {
        let r2 = self.rank * self.rank;
        &mut self.coeffs[k * r2..(k + 1) * r2]
    }

    /// Coefficient matrix of index mask `mask` (zero-based bits).
    pub fn get(&self, mask: u32) -> Option<&[C64]> {
        let list = self.indices();
        index_of(&list, mask).map(|k| self.block(k))
    }

    /// Max-modulus entry.
    pub fn sup(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut v = self.clone();
        v.coeffs.iter_mut().for_each(|t| *t *= c);
        v
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut v = self.clone();
        v.coeffs
            .iter_mut()
            .zip(&other.coeffs)
            .for_each(|(a, b)| *a -= *b);
        v
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut v = self.clone();
        v.coeffs
            .iter_mut()
            .zip(&other.coeffs)
            .for_each(|(a, b)| *a += *b);
        v
    }
}

/// A tangential `(0,q)`-form `sum_I phi_I dzbar'^I` on `M`, possibly
/// `r x r` matrix valued.
pub trait TangentialForm: Sync {
    fn n(&self) -> usize;
    fn degree(&self) -> usize;
    fn rank(&self) -> usize {
        1
    }
    /// Writes all coefficients (index-major, then row-major matrix entries).
    fn eval(&self, x: &[f64], out: &mut [C64]);
    /// Writes the base-coordinate gradient of every coefficient entry:
    /// `out[(entry) * d + k] = d coeff_entry / d x^k`. Returns `false` when no
    /// exact derivative is available.
    fn eval_gradient(&self, _x: &[f64], _out: &mut [C64]) -> bool {
        false
    }
    /// Radius of a Euclidean ball containing the support, if compact.
    fn support_radius(&self) -> Option<f64> {
        None
    }

    /// Number of coefficient entries.
    fn entries(&self) -> usize {
        multi_indices(self.n() - 1, self.degree()).len() * self.rank() * self.rank()
    }

    /// Evaluates at a base point.
    fn value(&self, x: &BasePoint) -> FormValue {
        let mut v = FormValue::zero(self.n() - 1, self.degree(), self.rank());
        self.eval(x.as_slice(), &mut v.coeffs);
        v
    }
}

/// `r_{zbar^alpha} / r_{zbar^n}` for `alpha < n-1`.
pub fn dbar_ratios(x: &BasePoint, m: &GraphDefiningFunction) -> Result<[C64; MAX_N]> {
    let p = m.derivatives(x)?;
    let n = m.n;
    let mut out = [ZERO; MAX_N];
    for a in 0..n - 1 {
        out[a] = p.r_zbar[a] / p.r_zbar[n - 1];
    }
    Ok(out)
}

/// `Xbar_alpha f` from the base-coordinate gradient `g` of `f`:
/// `1/2 (d_a + i d_b) f - (r_{zbar^alpha}/r_{zbar^n}) 1/2 d_{x^n} f`.
#[inline]
pub fn xbar(g: &[C64], alpha: usize, ratio: C64) -> C64 {
    let d = g.len();
    let i = C64::new(0.0, 1.0);
    (g[2 * alpha] + i * g[2 * alpha + 1]) * 0.5 - ratio * g[d - 1] * 0.5
}

/// Gradient of every coefficient entry, exact when available, otherwise by
/// central differences with step `1e-4 rho0`.
pub fn form_gradient(
    phi: &dyn TangentialForm,
    x: &BasePoint,
    m: &GraphDefiningFunction,
) -> Vec<C64> {
    let d = x.dim();
    let e = phi.entries();
    let mut g = vec![ZERO; e * d];
    if phi.eval_gradient(x.as_slice(), &mut g) {
        return g;
    }
    let h = 1e-4 * m.rho0;
    let mut fp = vec![ZERO; e];
    let mut fm = vec![ZERO; e];
    for k in 0..d {
        phi.eval(x.shifted(k, h).as_slice(), &mut fp);
        phi.eval(x.shifted(k, -h).as_slice(), &mut fm);
        for j in 0..e {
            g[j * d + k] = (fp[j] - fm[j]) / (2.0 * h);
        }
    }
    g
}

/// `dbar_M phi` at `x`; coefficient of `dzbar^K` is
/// `sum_m (-1)^m Xbar_{K_m} phi_{K minus K_m}`.
pub fn dbar_m(
    phi: &dyn TangentialForm,
    x: &BasePoint,
    m: &GraphDefiningFunction,
) -> Result<FormValue> {
    let n = m.n;
    if phi.n() != n {
        return Err(Error::Config(
            "form and hypersurface dimensions differ".into(),
        ));
    }
    let q = phi.degree();
    if q + 1 > n - 1 {
        return Ok(FormValue::zero(n - 1, q + 1, phi.rank()));
    }
    let ratios = dbar_ratios(x, m)?;
    let grad = form_gradient(phi, x, m);
    Ok(dbar_from_gradient(
        &grad,
        x.dim(),
        n,
        q,
        phi.rank(),
        &ratios,
    ))
}

/// `dbar_M` assembled from precomputed coefficient gradients.
pub fn dbar_from_gradient(
    grad: &[C64],
    d: usize,
    n: usize,
    q: usize,
    rank: usize,
    ratios: &[C64],
) -> FormValue {
    let src = multi_indices(n - 1, q);
    let mut out = FormValue::zero(n - 1, q + 1, rank);
    let r2 = rank * rank;
    for (ko, &kmask) in out.indices().iter().enumerate() {
        for (pos, &alpha) in elements(kmask).iter().enumerate() {
            let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
            let rest = kmask & !(1 << alpha);
            let ki = index_of(&src, rest).expect("sub-index exists");
            for e in 0..r2 {
                let g = &grad[(ki * r2 + e) * d..(ki * r2 + e + 1) * d];
                out.coeffs[ko * r2 + e] += xbar(g, alpha, ratios[alpha]) * sign;
            }
        }
    }
    out
}

/// Matrix wedge `(w ^ e)_K = sum sign(I,J) w_I e_J`.
pub fn wedge_forms(w: &FormValue, e: &FormValue) -> Result<FormValue> {
    if w.rank != e.rank {
        return Err(Error::RankMismatch(w.rank, e.rank));
    }
    if w.m != e.m {
        return Err(Error::Config("forms over different index sets".into()));
    }
    let r = w.rank;
    let mut out = FormValue::zero(w.m, w.q + e.q, r);
    if w.q + e.q > w.m {
        return Ok(out);
    }
    let out_idx = out.indices();
    let mut prod = vec![ZERO; r * r];
    for (a, &im) in w.indices().iter().enumerate() {
        for (b, &jm) in e.indices().iter().enumerate() {
            if im & jm != 0 {
                continue;
            }
            let sign = index_merge_sign(im, jm);
            crate::linalg::matmul(w.block(a), e.block(b), r, &mut prod);
            let k = index_of(&out_idx, im | jm).unwrap();
            for (o, p) in out.block_mut(k).iter_mut().zip(&prod) {
                *o += *p * sign;
            }
        }
    }
    Ok(out)
}

/// Replaces `dzbar^n` by `-sum_beta (r_{zbar^beta}/r_{zbar^n}) dzbar^beta`.
/// `full` is indexed over `{0, .., n-1}` (bit `n-1` is `dzbar^n`).
pub fn tangential_projection(
    full: &FormValue,
    x: &BasePoint,
    m: &GraphDefiningFunction,
) -> Result<FormValue> {
    let n = m.n;
    if full.m != n {
        return Err(Error::Config(
            "full form must be indexed over n generators".into(),
        ));
    }
    let ratios = dbar_ratios(x, m)?;
    Ok(project_with_ratios(full, n, &ratios))
}

pub fn project_with_ratios(full: &FormValue, n: usize, ratios: &[C64]) -> FormValue {
    let mut out = FormValue::zero(n - 1, full.q, full.rank);
    let out_idx = out.indices();
    let nbit = 1u32 << (n - 1);
    for (k, &mask) in full.indices().iter().enumerate() {
        let src = full.block(k);
        if mask & nbit == 0 {
            let o = index_of(&out_idx, mask).unwrap();
            for (a, b) in out.block_mut(o).iter_mut().zip(src) {
                *a += *b;
            }
            continue;
        }
        // dzbar^{I'} ^ dzbar^n with n last
        let rest = mask & !nbit;
        for beta in 0..n - 1 {
            if rest & (1 << beta) != 0 {
                continue;
            }
            let sign = index_merge_sign(rest, 1 << beta);
            let o = index_of(&out_idx, rest | (1 << beta)).unwrap();
            let f = -ratios[beta] * sign;
            for (a, b) in out.block_mut(o).iter_mut().zip(src) {
                *a += *b * f;
            }
        }
    }
    out
}

/// A form given by closures.
pub struct ClosureForm<F, G> {
    pub n: usize,
    pub q: usize,
    pub rank: usize,
    pub f: F,
    pub g: Option<G>,
    pub support: Option<f64>,
}

impl<F, G> TangentialForm for ClosureForm<F, G>
where
    F: Fn(&[f64], &mut [C64]) + Sync,
    G: Fn(&[f64], &mut [C64]) + Sync,
{
    fn n(&self) -> usize {
        self.n
    }
    fn degree(&self) -> usize {
        self.q
    }
    fn rank(&self) -> usize {
        self.rank
    }
    fn eval(&self, x: &[f64], out: &mut [C64]) {
        (self.f)(x, out)
    }
    fn eval_gradient(&self, x: &[f64], out: &mut [C64]) -> bool {
        match &self.g {
            Some(g) => {
                g(x, out);
                true
            }
            None => false,
        }
    }
    fn support_radius(&self) -> Option<f64> {
        self.support
    }
}

/// `dbar_M phi` as a form; gradients by finite differences of the inner
/// `dbar_M` (which itself uses exact derivatives when available).
pub struct DbarForm<'a> {
    pub inner: &'a dyn TangentialForm,
    pub m: &'a GraphDefiningFunction,
}

impl TangentialForm for DbarForm<'_> {
    fn n(&self) -> usize {
        self.inner.n()
    }
    fn degree(&self) -> usize {
        self.inner.degree() + 1
    }
    fn rank(&self) -> usize {
        self.inner.rank()
    }
    fn eval(&self, x: &[f64], out: &mut [C64]) {
        let v = dbar_m(self.inner, &BasePoint::new(x), self.m).expect("dbar_M of inner form");
        out.copy_from_slice(&v.coeffs);
    }
    fn support_radius(&self) -> Option<f64> {
        self.inner.support_radius()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multi_index_order_is_lexicographic() {
        assert_eq!(multi_indices(3, 2), vec![0b011, 0b101, 0b110]);
        assert_eq!(multi_indices(3, 0), vec![0]);
        assert!(multi_indices(2, 3).is_empty());
    }

    #[test]
    fn projection_of_dzbar_n_on_quadric() {
        let m = GraphDefiningFunction::quadric(4);
        let x = BasePoint::new(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let mut full = FormValue::zero(4, 1, 1);
        let k = index_of(&full.indices(), 0b1000).unwrap();
        full.coeffs[k] = C64::new(1.0, 0.0);
        let t = tangential_projection(&full, &x, &m).unwrap();
        assert!((t.coeffs[0] - C64::new(0.0, -2.0)).norm() < 1e-15);
        assert_eq!(t.coeffs[1], ZERO);
        assert_eq!(t.coeffs[2], ZERO);
    }
}
