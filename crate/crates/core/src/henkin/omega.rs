//! Kernel forms `Omega_{0,p}` (interior) and `Omega^0_{0,p}` (boundary).
//!
//! `omega_value` builds the ambient form from its definition; it is the
//! reference path. [`KernelEngine`] evaluates the same kernels already pulled
//! back to the source chart and paired with the frame `dzetabar^J`, which is
//! what the integrators need.

use super::dense::{Chain, Factor};
use super::kernel::{SourceData, TargetData};
use crate::crcalc::multi_indices;
use crate::exterior::{merge_sign, GradedElement, Universe};
use crate::geometry::{BasePoint, GraphDefiningFunction};
use crate::{Error, Result, C64, MAX_D, MAX_N};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Interior,
    Boundary,
}

/// `c_0 = (2 pi i)^n / 2`.
pub fn c0(n: usize) -> C64 {
    let mut c = C64::new(0.5, 0.0);
    for _ in 0..n {
        c *= C64::new(0.0, 2.0 * PI);
    }
    c
}

/// The literature prefactor `-1/c_0 = -2/(2 pi i)^n`.
pub fn stated_normalization(n: usize) -> C64 {
    -c0(n).inv()
}

/// The prefactor the operators use, `1/(2 pi i)^n`, with `M` oriented as
/// the base chart. This is the value the homotopy identity calibrates to on
/// the quadric; it differs from [`stated_normalization`] by a factor `-1/2`.
pub fn normalization(n: usize) -> C64 {
    (c0(n) * 2.0).inv()
}

/// Exponents `(k_H, k_N0)` of `H` and `N0`; errors when negative.
pub fn exponents(n: usize, p: usize, variant: Variant) -> Result<(usize, usize)> {
    let shift = if variant == Variant::Boundary { 1 } else { 0 };
    if n < 2 || p + 2 + shift > n {
        return Err(Error::Precondition(format!(
            "kernel index p = {p} out of range for n = {n} ({variant:?})"
        )));
    }
    Ok((n - 2 - p - shift, n - 1 - p - shift))
}

/// Denominator `N0^k S0^{p+1}`, times `(zeta^n - z^n)` on the boundary.
fn denominator(s: &SourceData, t: &TargetData, n: usize, p: usize, variant: Variant) -> C64 {
    let (_, k_n0) = exponents(n, p, variant).expect("checked at construction");
    let n0 = super::kernel::pair(&s.deriv.r_z[..n], &s.zeta, &t.z);
    let s0 = super::kernel::pair(&t.deriv.r_z[..n], &s.zeta, &t.z);
    let mut den = n0.powu(k_n0 as u32) * s0.powu(p as u32 + 1);
    if variant == Variant::Boundary {
        den *= s.zeta.as_slice()[n - 1] - t.z.as_slice()[n - 1];
    }
    den
}

/// The ambient kernel form in `Universe::Ambient`.
pub fn omega_value(
    variant: Variant,
    p: usize,
    xi: &BasePoint,
    x: &BasePoint,
    m: &GraphDefiningFunction,
) -> Result<GradedElement> {
    let n = m.n;
    let (k_h, _) = exponents(n, p, variant)?;
    if xi.as_slice() == x.as_slice() {
        return Err(Error::Singular("source equals target".into()));
    }
    m.lift(xi)?;
    let t = TargetData::new(x, m)?;
    let s = SourceData::new(xi, m);
    let u = Universe::Ambient { n: n as u8 };
    let mut dzeta = [0usize; MAX_N];
    for (j, b) in dzeta.iter_mut().enumerate().take(n) {
        *b = u.dzeta(j);
    }
    let a = GradedElement::one_form(u, &dzeta[..n], &s.deriv.r_z[..n]);
    let b = GradedElement::one_form(u, &dzeta[..n], &t.deriv.r_z[..n]);
    let mut h_terms = Vec::new();
    let mut g_terms = Vec::new();
    for j in 0..n {
        for k in 0..n {
            // dzetabar^k ^ dzeta^j = -dzeta^j ^ dzetabar^k (dzeta bits are lower)
            let mask = (1u64 << u.dzeta(j)) | (1u64 << u.dzetabar(k));
            h_terms.push((mask, -s.deriv.hess_zzbar[j][k]));
        }
        for beta in 0..n - 1 {
            let mask = (1u64 << u.dzeta(j)) | (1u64 << u.dzbar(beta));
            g_terms.push((mask, -t.g[j][beta]));
        }
    }
    let h = GradedElement::from_terms(u, h_terms);
    let g = GradedElement::from_terms(u, g_terms);
    let mut w = a
        .wedge(&b)?
        .wedge(&h.wedge_power(k_h))?
        .wedge(&g.wedge_power(p))?;
    if variant == Variant::Boundary {
        w = GradedElement::generator(u, u.dzeta(n - 1), C64::new(1.0, 0.0)).wedge(&w)?;
    }
    Ok(w.scale(denominator(&s, &t, n, p, variant).inv()))
}

/// Images of the ambient generators under pullback to the source chart.
pub fn pullback_images(s: &SourceData, n: usize) -> Vec<GradedElement> {
    let ua = Universe::Ambient { n: n as u8 };
    let ub = Universe::Base { n: n as u8 };
    let d = 2 * n - 1;
    let xi_bits: Vec<usize> = (0..d).map(|k| ub.dxi(k)).collect();
    let mut images = vec![GradedElement::zero(ub); ua.count()];
    for j in 0..n {
        let conj: Vec<C64> = s.e[j][..d].iter().map(|c| c.conj()).collect();
        images[ua.dzeta(j)] = GradedElement::one_form(ub, &xi_bits, &s.e[j][..d]);
        images[ua.dzetabar(j)] = GradedElement::one_form(ub, &xi_bits, &conj);
    }
    for beta in 0..n - 1 {
        images[ua.dzbar(beta)] = GradedElement::generator(ub, ub.dzbar(beta), C64::new(1.0, 0.0));
    }
    for k in 0..d {
        images[ua.dxi(k)] = GradedElement::generator(ub, ub.dxi(k), C64::new(1.0, 0.0));
    }
    images
}

/// Reference evaluation of the pulled-back coefficients of
/// `Omega ^ dzetabar^J` by building everything in the ambient algebra.
/// Layout as in [`KernelEngine::eval`].
pub fn reference_coefficients(
    variant: Variant,
    p: usize,
    xi: &BasePoint,
    x: &BasePoint,
    m: &GraphDefiningFunction,
) -> Result<Vec<C64>> {
    let n = m.n;
    let d = 2 * n - 1;
    let omega = omega_value(variant, p, xi, x, m)?;
    let s = SourceData::new(xi, m);
    let ua = Universe::Ambient { n: n as u8 };
    let ub = Universe::Base { n: n as u8 };
    let images = pullback_images(&s, n);
    let out_idx = multi_indices(n - 1, p);
    let in_idx = multi_indices(n - 1, p + 1);
    let slots = if variant == Variant::Interior { 1 } else { d };
    let mut out = vec![ZERO; slots * out_idx.len() * in_idx.len()];
    for (jj, &jm) in in_idx.iter().enumerate() {
        let mut frame = GradedElement::one(ua);
        for j in crate::crcalc::elements(jm) {
            frame = frame.wedge(&GradedElement::generator(
                ua,
                ua.dzetabar(j),
                C64::new(1.0, 0.0),
            ))?;
        }
        let pulled = omega.wedge(&frame)?.pullback(&images, ub)?;
        for slot in 0..slots {
            let xi_mask = if variant == Variant::Interior {
                ub.xi_mask()
            } else {
                ub.xi_mask() & !(1u64 << ub.dxi(slot))
            };
            for (ii, &im) in out_idx.iter().enumerate() {
                let mask = xi_mask | ((im as u64) << ub.dzbar(0));
                out[(slot * out_idx.len() + ii) * in_idx.len() + jj] = pulled.coefficient(mask);
            }
        }
    }
    Ok(out)
}

/// Fast evaluator of pulled-back kernel coefficients for a fixed
/// `(n, p, variant)`.
///
/// Works in the constant complex coframe `b = (e_0, ebar_0, ..., e_{n-2},
/// ebar_{n-2}, dxi^{d-1})`, where the frames `dzetabar^J` are unit monomials,
/// and converts to `dxi` monomials at the end. The `dzbar` factors are split
/// off in closed form: the `dzbar^I` part of `G^p` is
/// `(-1)^{p(p+1)/2} p! g_I ^ dzbar^I` with `g_beta = sum_j g_{j beta} e_j`.
pub struct KernelEngine {
    pub n: usize,
    pub p: usize,
    pub variant: Variant,
    k_h: usize,
    pub out_idx: Vec<u32>,
    pub in_idx: Vec<u32>,
    out_elems: Vec<Vec<usize>>,
    chain: Chain,
    /// Per `J`: `(slot, position in the final state, coefficient)`.
    frames: Vec<Vec<(u16, u16, C64)>>,
    g_sign: f64,
    bufs: [Vec<C64>; 3],
}

/// Coordinates of a `dxi` 1-form in the coframe `b`.
fn to_coframe(v: &[C64], d: usize) -> [C64; MAX_D] {
    let mut out = [ZERO; MAX_D];
    let i = C64::new(0.0, 1.0);
    for k in 0..(d - 1) / 2 {
        out[2 * k] = (v[2 * k] - i * v[2 * k + 1]) * 0.5;
        out[2 * k + 1] = (v[2 * k] + i * v[2 * k + 1]) * 0.5;
    }
    out[d - 1] = v[d - 1];
    out
}

/// `wedge_{i in mask} b_i` expanded in `dxi` monomials.
fn coframe_monomial(mask: u32, d: usize) -> GradedElement {
    let u = Universe::Plain { count: d as u8 };
    let mut acc = GradedElement::one(u);
    for k in 0..d {
        if mask & (1 << k) == 0 {
            continue;
        }
        let f = if k == d - 1 {
            GradedElement::generator(u, k, C64::new(1.0, 0.0))
        } else {
            let base = k & !1;
            let im = if k % 2 == 0 { 1.0 } else { -1.0 };
            GradedElement::one_form(
                u,
                &[base, base + 1],
                &[C64::new(1.0, 0.0), C64::new(0.0, im)],
            )
        };
        acc = acc.wedge(&f).expect("same universe");
    }
    acc
}

impl KernelEngine {
    pub fn new(n: usize, p: usize, variant: Variant) -> Result<Self> {
        let (k_h, _) = exponents(n, p, variant)?;
        let d = 2 * n - 1;
        let all = (1u32 << d) - 1;
        let mut factors = Vec::new();
        if variant == Variant::Boundary {
            factors.push(Factor::One);
        }
        factors.push(Factor::One);
        factors.extend(core::iter::repeat(Factor::Two).take(k_h));
        factors.extend(core::iter::repeat(Factor::One).take(p));
        let in_idx = multi_indices(n - 1, p + 1);
        let frame_mask = |jm: u32| {
            crate::crcalc::elements(jm)
                .into_iter()
                .fold(0u32, |m, j| m | (1 << (2 * j + 1)))
        };
        let mut targets = Vec::new();
        for &jm in &in_idx {
            let f = frame_mask(jm);
            if variant == Variant::Interior {
                targets.push(all & !f);
            } else {
                targets.extend(
                    (0..d)
                        .filter(|b| f & (1 << b) == 0)
                        .map(|b| all & !f & !(1 << b)),
                );
            }
        }
        let chain = Chain::new(d, &factors, &targets);
        let top = coframe_monomial(all, d).coefficient(all as u64);
        let frames = in_idx
            .iter()
            .map(|&jm| {
                let f = frame_mask(jm);
                let mut list = Vec::new();
                if variant == Variant::Interior {
                    let rest = all & !f;
                    let s = merge_sign(rest as u64, f as u64);
                    list.push((0, chain.position(rest) as u16, top * s));
                } else {
                    for b in (0..d).filter(|b| f & (1 << b) == 0) {
                        let rest = all & !f & !(1 << b);
                        let s = merge_sign(rest as u64, f as u64);
                        let mono = coframe_monomial(all & !(1 << b), d);
                        for slot in 0..d {
                            let c = mono.coefficient((all & !(1 << slot)) as u64);
                            if c != ZERO {
                                list.push((slot as u16, chain.position(rest) as u16, c * s));
                            }
                        }
                    }
                }
                list
            })
            .collect();
        let mut fact = 1.0;
        for i in 1..=p {
            fact *= i as f64;
        }
        let g_sign = if (p * (p + 1) / 2) % 2 == 0 {
            fact
        } else {
            -fact
        };
        let w = chain.width().max(d);
        Ok(KernelEngine {
            n,
            p,
            variant,
            k_h,
            out_elems: multi_indices(n - 1, p)
                .into_iter()
                .map(crate::crcalc::elements)
                .collect(),
            out_idx: multi_indices(n - 1, p),
            in_idx,
            chain,
            frames,
            g_sign,
            bufs: [vec![ZERO; w], vec![ZERO; w], vec![ZERO; w]],
        })
    }

    /// Number of tangent slots: 1 for the interior, `2n-1` on the boundary
    /// (slot `k` is the coefficient of `dV` with `dxi^k` removed).
    pub fn slots(&self) -> usize {
        if self.variant == Variant::Interior {
            1
        } else {
            2 * self.n - 1
        }
    }

    pub fn len(&self) -> usize {
        self.slots() * self.out_idx.len() * self.in_idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes `out[(slot * |I| + I) * |J| + J]`, the coefficient of
    /// `dV_slot(xi) ^ dzbar^I` in `Omega(xi, x) ^ dzetabar^J`.
    pub fn eval(&mut self, s: &SourceData, t: &TargetData, out: &mut [C64]) {
        let n = self.n;
        let d = 2 * n - 1;
        let slots = self.slots();
        // In the coframe, e_j and ebar_j for j < n-1 are the unit vectors
        // b_{2j} and b_{2j+1}; only e_{n-1} is dense.
        debug_assert!((0..n - 1).all(
            |j| s.e[j][2 * j] == C64::new(1.0, 0.0) && s.e[j][2 * j + 1] == C64::new(0.0, 1.0)
        ));
        let last = to_coframe(&s.e[n - 1][..d], d);
        let mut conj = [ZERO; MAX_D];
        for k in 0..d {
            conj[k] = s.e[n - 1][k].conj();
        }
        let last_bar = to_coframe(&conj[..d], d);
        let combo = |c: &[C64; MAX_N]| {
            let mut v = [ZERO; MAX_D];
            let cl = c[n - 1];
            for k in 0..d {
                v[k] = cl * last[k];
            }
            for j in 0..n - 1 {
                v[2 * j] += c[j];
            }
            v
        };
        let mut ca = [ZERO; MAX_N];
        for j in 0..n {
            ca[j] = s.deriv.r_z[j] - t.deriv.r_z[j];
        }
        let av = combo(&ca);
        let bv = combo(&t.deriv.r_z);
        let chain = &self.chain;
        let [b0, b1, b2] = &mut self.bufs;
        let mut stage = 0;
        if self.variant == Variant::Boundary {
            chain.load(&last[..d], b0);
            chain.apply(stage, b0, &av, b1);
            stage += 1;
        } else {
            chain.load(&av[..d], b1);
        }
        chain.apply(stage, b1, &bv, b0);
        stage += 1;
        let (mut cur, mut nxt) = (b0, b1);
        if self.k_h > 0 {
            // H = sum_k ebar_k ^ w_k with w_k = sum_j h_jk e_j
            let mut h = [ZERO; MAX_D * MAX_D];
            for k in 0..n {
                let mut col = [ZERO; MAX_N];
                for j in 0..n {
                    col[j] = s.deriv.hess_zzbar[j][k];
                }
                let w = combo(&col);
                if k < n - 1 {
                    let a = 2 * k + 1;
                    for l in 0..d {
                        if l > a {
                            h[a * d + l] += w[l];
                        } else if l < a {
                            h[l * d + a] -= w[l];
                        }
                    }
                    continue;
                }
                for a in 0..d {
                    let ea = last_bar[a];
                    for l in a + 1..d {
                        h[a * d + l] += ea * w[l] - last_bar[l] * w[a];
                    }
                }
            }
            for _ in 0..self.k_h {
                chain.apply(stage, cur, &h, nxt);
                stage += 1;
                core::mem::swap(&mut cur, &mut nxt);
            }
        }
        let den = denominator(s, t, n, self.p, self.variant).inv() * self.g_sign;
        let mut gv = [[ZERO; MAX_D]; MAX_N];
        for (beta, g) in gv
            .iter_mut()
            .enumerate()
            .take(if self.p > 0 { n - 1 } else { 0 })
        {
            let mut col = [ZERO; MAX_N];
            for j in 0..n {
                col[j] = t.g[j][beta];
            }
            *g = combo(&col);
        }
        let (ni, nj) = (self.out_idx.len(), self.in_idx.len());
        for ii in 0..ni {
            let y: &[C64] = if self.p == 0 {
                cur
            } else {
                for (step, &beta) in self.out_elems[ii].iter().enumerate() {
                    let g = &gv[beta][..d];
                    match step {
                        0 => chain.apply(stage, cur, g, b2),
                        k if k % 2 == 1 => chain.apply(stage + k, b2, g, nxt),
                        k => chain.apply(stage + k, nxt, g, b2),
                    }
                }
                if self.p % 2 == 1 {
                    b2
                } else {
                    nxt
                }
            };
            for (jj, frame) in self.frames.iter().enumerate() {
                for o in 0..slots {
                    out[(o * ni + ii) * nj + jj] = ZERO;
                }
                for &(slot, iy, c) in frame {
                    out[(slot as usize * ni + ii) * nj + jj] += y[iy as usize] * c * den;
                }
            }
        }
    }
}
