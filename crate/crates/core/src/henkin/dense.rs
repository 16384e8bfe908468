//! Pruned dense wedge chains, used by the kernel engine's hot path.
//!
//! A chain evaluates `v_0 ^ F_1 ^ ... ^ F_s` for 1-forms and 2-forms `F_i`
//! on `d` generators, keeping at every stage only the monomials that can
//! still reach one of the requested final monomials.

use crate::exterior::merge_sign;
use crate::C64;
use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factor {
    /// A 1-form stored as `d` coefficients.
    One,
    /// A 2-form stored as `d * d` with entry `k * d + l` for `k < l`.
    Two,
}

impl Factor {
    fn degree(self) -> usize {
        match self {
            Factor::One => 1,
            Factor::Two => 2,
        }
    }
}

#[derive(Clone, Debug)]
struct Stage {
    /// Output `o` sums `entries[bounds[o].0..bounds[o].1]` with sign `+` and
    /// `entries[bounds[o].1..bounds[o].2]` with sign `-`.
    bounds: Vec<(u32, u32, u32)>,
    /// `(in, component)`.
    entries: Vec<(u16, u16)>,
}

#[inline(always)]
fn dot(x: &[C64], f: &[C64], entries: &[(u16, u16)]) -> (f64, f64) {
    let (mut re, mut im) = (0.0, 0.0);
    for &(i, k) in entries {
        let (u, v) = (x[i as usize], f[k as usize]);
        re += u.re * v.re - u.im * v.im;
        im += u.re * v.im + u.im * v.re;
    }
    (re, im)
}

#[derive(Clone, Debug)]
pub struct Chain {
    pub d: usize,
    /// Bits of the initial 1-form that are used, in state order.
    start: Vec<u16>,
    stages: Vec<Stage>,
    final_pos: BTreeMap<u32, usize>,
}

fn submasks(m: u32, k: usize) -> Vec<u32> {
    let bits: Vec<u32> = (0..32).filter(|b| m & (1 << b) != 0).collect();
    let mut out = Vec::new();
    if k == 1 {
        out.extend(bits.iter().map(|b| 1u32 << b));
    } else {
        for i in 0..bits.len() {
            for j in i + 1..bits.len() {
                out.push((1 << bits[i]) | (1 << bits[j]));
            }
        }
    }
    out
}

fn component(sub: u32, d: usize) -> u16 {
    let lo = sub.trailing_zeros() as usize;
    let rest = sub & !(1 << lo);
    if rest == 0 {
        lo as u16
    } else {
        (lo * d + rest.trailing_zeros() as usize) as u16
    }
}

impl Chain {
    /// Builds the chain for factor kinds `factors` and requested final
    /// monomials `targets`.
    pub fn new(d: usize, factors: &[Factor], targets: &[u32]) -> Self {
        let mut needed: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); factors.len() + 1];
        needed[factors.len()] = targets.iter().copied().collect();
        for s in (0..factors.len()).rev() {
            let k = factors[s].degree();
            let next: BTreeSet<u32> = needed[s + 1]
                .iter()
                .flat_map(|&m| submasks(m, k).into_iter().map(move |sub| m & !sub))
                .collect();
            needed[s] = next;
        }
        let pos: Vec<BTreeMap<u32, usize>> = needed
            .iter()
            .map(|set| set.iter().enumerate().map(|(i, &m)| (m, i)).collect())
            .collect();
        let start = needed[0]
            .iter()
            .map(|m| m.trailing_zeros() as u16)
            .collect();
        let stages = factors
            .iter()
            .enumerate()
            .map(|(s, &f)| {
                let mut entries = Vec::new();
                let mut bounds = Vec::new();
                for &m in pos[s + 1].keys() {
                    let start = entries.len() as u32;
                    let mut minus = Vec::new();
                    for sub in submasks(m, f.degree()) {
                        let rest = m & !sub;
                        if let Some(&i) = pos[s].get(&rest) {
                            let e = (i as u16, component(sub, d));
                            if merge_sign(rest as u64, sub as u64) > 0.0 {
                                entries.push(e);
                            } else {
                                minus.push(e);
                            }
                        }
                    }
                    let mid = entries.len() as u32;
                    entries.extend(minus);
                    bounds.push((start, mid, entries.len() as u32));
                }
                Stage { bounds, entries }
            })
            .collect();
        Chain {
            d,
            start,
            stages,
            final_pos: pos[factors.len()].clone(),
        }
    }

    /// Position of a requested final monomial in the output state.
    pub fn position(&self, mask: u32) -> usize {
        self.final_pos[&mask]
    }

    /// Largest state length, for sizing buffers.
    pub fn width(&self) -> usize {
        self.stages
            .iter()
            .map(|s| s.bounds.len())
            .chain(core::iter::once(self.start.len()))
            .max()
            .unwrap_or(0)
    }

    /// Loads the initial 1-form into `state`.
    pub fn load(&self, v: &[C64], state: &mut [C64]) {
        for (i, &b) in self.start.iter().enumerate() {
            state[i] = v[b as usize];
        }
    }

    /// Applies stage `s` with factor coefficients `f`.
    #[inline]
    pub fn apply(&self, s: usize, input: &[C64], f: &[C64], out: &mut [C64]) {
        let st = &self.stages[s];
        for (o, &(a, b, c)) in out.iter_mut().zip(&st.bounds) {
            let (p_re, p_im) = dot(input, f, &st.entries[a as usize..b as usize]);
            let (m_re, m_im) = dot(input, f, &st.entries[b as usize..c as usize]);
            *o = C64::new(p_re - m_re, p_im - m_im);
        }
    }

    pub fn stages(&self) -> usize {
        self.stages.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::{GradedElement, Universe};

    const ZERO: C64 = C64::new(0.0, 0.0);

    fn one(u: Universe, v: &[C64]) -> GradedElement {
        GradedElement::from_terms(
            u,
            v.iter().enumerate().map(|(l, c)| (1u64 << l, *c)).collect(),
        )
    }

    #[test]
    fn chain_matches_sparse_wedge() {
        let d = 5;
        let u = Universe::Plain { count: d as u8 };
        let a: Vec<C64> = (0..d).map(|i| C64::new(1.0 + i as f64, -0.5)).collect();
        let b: Vec<C64> = (0..d).map(|i| C64::new(0.3, i as f64)).collect();
        let mut h = vec![ZERO; d * d];
        let mut terms = Vec::new();
        for k in 0..d {
            for l in k + 1..d {
                h[k * d + l] = C64::new((k + 2 * l) as f64, 1.0 - k as f64);
                terms.push(((1u64 << k) | (1u64 << l), h[k * d + l]));
            }
        }
        let sh = GradedElement::from_terms(u, terms);
        let full = one(u, &a).wedge(&one(u, &b)).unwrap().wedge(&sh).unwrap();
        let targets = [0b01111u32, 0b11110, 0b10111];
        let chain = Chain::new(d, &[Factor::One, Factor::Two], &targets);
        let mut s0 = vec![ZERO; chain.width()];
        let mut s1 = vec![ZERO; chain.width()];
        let mut s2 = vec![ZERO; chain.width()];
        chain.load(&a, &mut s0);
        chain.apply(0, &s0, &b, &mut s1);
        chain.apply(1, &s1, &h, &mut s2);
        for t in targets {
            assert!((s2[chain.position(t)] - full.coefficient(t as u64)).norm() < 1e-12);
        }
    }
}
