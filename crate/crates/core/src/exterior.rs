//! Sparse complex exterior algebra over at most 64 ordered generators.
//!
//! An element is a list of `(mask, coefficient)` pairs sorted by mask; bit
//! `k` of a mask stands for generator `k`, and the coefficient refers to the
//! ascending-order monomial. Mixed degrees are allowed.

use crate::{Error, Result, C64};
use alloc::vec;
use alloc::vec::Vec;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Named generator layouts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Universe {
    /// `dzeta^1..dzeta^n, dzetabar^1..dzetabar^n, dzbar^1..dzbar^{n-1},
    /// dxi^1..dxi^{2n-1}` (in this order).
    Ambient { n: u8 },
    /// `dxi^1..dxi^{2n-1}, dzbar^1..dzbar^{n-1}`: forms pulled back to the
    /// base chart of `M` in the source variable.
    Base { n: u8 },
    /// Anonymous generators `0..count`.
    Plain { count: u8 },
}

impl Universe {
    pub fn count(&self) -> usize {
        match *self {
            Universe::Ambient { n } => 5 * n as usize - 2,
            Universe::Base { n } => 3 * n as usize - 2,
            Universe::Plain { count } => count as usize,
        }
    }

    fn n(&self) -> usize {
        match *self {
            Universe::Ambient { n } | Universe::Base { n } => n as usize,
            Universe::Plain { .. } => 0,
        }
    }

    /// Bit of `dzeta^j` (zero-based `j`) in the ambient layout.
    pub fn dzeta(&self, j: usize) -> usize {
        debug_assert!(matches!(self, Universe::Ambient { .. }));
        j
    }

    /// Bit of `dzetabar^j` in the ambient layout.
    pub fn dzetabar(&self, j: usize) -> usize {
        debug_assert!(matches!(self, Universe::Ambient { .. }));
        self.n() + j
    }

    /// Bit of `dzbar^beta` (`beta < n-1`).
    pub fn dzbar(&self, beta: usize) -> usize {
        match *self {
            Universe::Ambient { n } => 2 * n as usize + beta,
            Universe::Base { n } => 2 * n as usize - 1 + beta,
            Universe::Plain { .. } => panic!("plain universe has no named generators"),
        }
    }

    /// Bit of `dxi^k` (`k < 2n-1`).
    pub fn dxi(&self, k: usize) -> usize {
        match *self {
            Universe::Ambient { n } => 3 * n as usize - 1 + k,
            Universe::Base { .. } => k,
            Universe::Plain { .. } => panic!("plain universe has no named generators"),
        }
    }

    /// Mask of all `dxi` generators.
    pub fn xi_mask(&self) -> u64 {
        let n = self.n();
        let m = (1u64 << (2 * n - 1)) - 1;
        m << self.dxi(0)
    }

    /// Mask of the `dzbar` generators listed (zero-based) in `idx`.
    pub fn dzbar_mask(&self, idx: &[usize]) -> u64 {
        idx.iter().fold(0, |m, &b| m | (1u64 << self.dzbar(b)))
    }
}

/// Bit `i` is set iff `m` has an odd number of bits below position `i`.
#[inline]
fn below_parity(m: u64) -> u64 {
    let mut x = m << 1;
    x ^= x << 1;
    x ^= x << 2;
    x ^= x << 4;
    x ^= x << 8;
    x ^= x << 16;
    x ^= x << 32;
    x
}

/// Sign of `mono(a) ^ mono(b)` relative to `mono(a | b)`; caller ensures
/// `a & b == 0`.
#[inline]
pub fn merge_sign(a: u64, b: u64) -> f64 {
    if (a & below_parity(b)).count_ones() & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// A sparse element of the exterior algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct GradedElement {
    universe: Universe,
    terms: Vec<(u64, C64)>,
}

impl GradedElement {
    pub fn zero(universe: Universe) -> Self {
        GradedElement {
            universe,
            terms: Vec::new(),
        }
    }

    pub fn scalar(universe: Universe, c: C64) -> Self {
        Self::monomial(universe, 0, c)
    }

    pub fn one(universe: Universe) -> Self {
        Self::scalar(universe, C64::new(1.0, 0.0))
    }

    /// `c` times the generator with the given bit.
    pub fn generator(universe: Universe, bit: usize, c: C64) -> Self {
        assert!(bit < universe.count(), "generator {bit} outside universe");
        Self::monomial(universe, 1u64 << bit, c)
    }

    /// `c` times the ascending monomial `mask`.
    pub fn monomial(universe: Universe, mask: u64, c: C64) -> Self {
        let mut e = GradedElement {
            universe,
            terms: Vec::with_capacity(1),
        };
        if c != ZERO {
            e.terms.push((mask, c));
        }
        e
    }

    /// The 1-form `sum_k v_k g_{bits[k]}`.
    pub fn one_form(universe: Universe, bits: &[usize], v: &[C64]) -> Self {
        let mut terms: Vec<(u64, C64)> = bits
            .iter()
            .zip(v)
            .filter(|(_, c)| **c != ZERO)
            .map(|(&b, &c)| (1u64 << b, c))
            .collect();
        terms.sort_unstable_by_key(|t| t.0);
        let mut e = GradedElement {
            universe,
            terms: Vec::new(),
        };
        e.absorb(terms);
        e
    }

    /// From arbitrary `(mask, coefficient)` pairs; duplicates are summed.
    pub fn from_terms(universe: Universe, mut terms: Vec<(u64, C64)>) -> Self {
        terms.sort_unstable_by_key(|t| t.0);
        let mut e = GradedElement {
            universe,
            terms: Vec::new(),
        };
        e.absorb(terms);
        e
    }

    fn absorb(&mut self, sorted: Vec<(u64, C64)>) {
        self.terms.clear();
        for (m, c) in sorted {
            match self.terms.last_mut() {
                Some(last) if last.0 == m => last.1 += c,
                _ => self.terms.push((m, c)),
            }
        }
        self.terms.retain(|t| t.1 != ZERO);
    }

    pub fn universe(&self) -> Universe {
        self.universe
    }

    pub fn terms(&self) -> &[(u64, C64)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of the ascending monomial `mask` (0 if absent).
    #[inline]
    pub fn coefficient(&self, mask: u64) -> C64 {
        match self.terms.binary_search_by_key(&mask, |t| t.0) {
            Ok(i) => self.terms[i].1,
            Err(_) => ZERO,
        }
    }

    /// Degree when homogeneous.
    pub fn degree(&self) -> Option<u32> {
        let d = self.terms.first()?.0.count_ones();
        self.terms
            .iter()
            .all(|t| t.0.count_ones() == d)
            .then_some(d)
    }

    pub fn scale(&self, c: C64) -> Self {
        if c == ZERO {
            return Self::zero(self.universe);
        }
        GradedElement {
            universe: self.universe,
            terms: self.terms.iter().map(|&(m, v)| (m, v * c)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.universe != other.universe {
            return Err(Error::UniverseMismatch);
        }
        let mut t = self.terms.clone();
        t.extend_from_slice(&other.terms);
        Ok(Self::from_terms(self.universe, t))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// `self ^ other`.
    pub fn wedge(&self, other: &Self) -> Result<Self> {
        if self.universe != other.universe {
            return Err(Error::UniverseMismatch);
        }
        let mut scratch = Scratch::new();
        Ok(self.wedge_with(other, &mut scratch))
    }

    /// `self ^ other` using caller-owned scratch space.
    pub fn wedge_with(&self, other: &Self, scratch: &mut Scratch) -> Self {
        debug_assert_eq!(self.universe, other.universe);
        scratch.begin(self.universe.count());
        for &(mb, cb) in &other.terms {
            let pb = below_parity(mb);
            for &(ma, ca) in &self.terms {
                if ma & mb != 0 {
                    continue;
                }
                let v = ca * cb;
                if (ma & pb).count_ones() & 1 == 0 {
                    scratch.add(ma | mb, v);
                } else {
                    scratch.add(ma | mb, -v);
                }
            }
        }
        GradedElement {
            universe: self.universe,
            terms: scratch.finish(),
        }
    }

    /// `self ^ ... ^ self` (`k` factors); `k = 0` gives 1.
    pub fn wedge_power(&self, k: usize) -> Self {
        let mut scratch = Scratch::new();
        self.wedge_power_with(k, &mut scratch)
    }

    pub fn wedge_power_with(&self, k: usize, scratch: &mut Scratch) -> Self {
        if k == 0 {
            return Self::one(self.universe);
        }
        if k == 1 {
            return self.clone();
        }
        let even_nilpotent = self
            .terms
            .iter()
            .all(|t| t.0 != 0 && t.0.count_ones() % 2 == 0);
        if !even_nilpotent {
            let mut acc = self.clone();
            for _ in 1..k {
                acc = acc.wedge_with(self, scratch);
            }
            return acc;
        }
        // For commuting nilpotent terms, a^k = k! e_k(terms) where e_k is the
        // k-th elementary symmetric product.
        let mut e: Vec<GradedElement> = vec![Self::one(self.universe)];
        e.resize(k + 1, Self::zero(self.universe));
        for &(m, c) in &self.terms {
            let mono = GradedElement {
                universe: self.universe,
                terms: vec![(m, c)],
            };
            for j in (1..=k).rev() {
                if e[j - 1].is_empty() {
                    continue;
                }
                let prod = e[j - 1].wedge_with(&mono, scratch);
                if !prod.is_empty() {
                    let mut t = core::mem::take(&mut e[j].terms);
                    t.extend_from_slice(&prod.terms);
                    e[j] = Self::from_terms(self.universe, t);
                }
            }
        }
        e.swap_remove(k)
            .scale(C64::new(crate::math::factorial(k), 0.0))
    }

    /// Coefficient of the ascending monomial `mask` in `self ^ other`,
    /// computed without forming the product.
    #[inline]
    pub fn wedge_coefficient(&self, other: &Self, mask: u64) -> C64 {
        let mut s = ZERO;
        let (small, large, small_left) = if self.terms.len() <= other.terms.len() {
            (self, other, true)
        } else {
            (other, self, false)
        };
        for &(m, c) in &small.terms {
            if m & !mask != 0 {
                continue;
            }
            let rest = mask ^ m;
            let v = large.coefficient(rest);
            if v == ZERO {
                continue;
            }
            let sign = if small_left {
                merge_sign(m, rest)
            } else {
                merge_sign(rest, m)
            };
            s += c * v * sign;
        }
        s
    }

    /// Pullback under the linear substitution `g_k -> images[k]` into
    /// `target` (each image an element of `target`).
    pub fn pullback(&self, images: &[GradedElement], target: Universe) -> Result<Self> {
        if images.len() != self.universe.count() || images.iter().any(|e| e.universe != target) {
            return Err(Error::UniverseMismatch);
        }
        let mut scratch = Scratch::new();
        let mut acc: Vec<(u64, C64)> = Vec::new();
        for &(m, c) in &self.terms {
            let mut prod = Self::scalar(target, c);
            let mut bits = m;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                prod = prod.wedge_with(&images[b], &mut scratch);
                if prod.is_empty() {
                    break;
                }
            }
            acc.extend_from_slice(&prod.terms);
        }
        Ok(Self::from_terms(target, acc))
    }

    /// Max-modulus coefficient difference.
    pub fn max_diff(&self, other: &Self) -> f64 {
        let mut masks: Vec<u64> = self.terms.iter().chain(&other.terms).map(|t| t.0).collect();
        masks.sort_unstable();
        masks.dedup();
        masks.iter().fold(0.0, |m, &k| {
            m.max((self.coefficient(k) - other.coefficient(k)).norm())
        })
    }
}

/// Reusable accumulator for products. Universes up to 16 generators use a
/// dense table; larger ones fall back to sort-and-merge.
#[derive(Default)]
pub struct Scratch {
    dense: Vec<C64>,
    mark: Vec<bool>,
    touched: Vec<u64>,
    pairs: Vec<(u64, C64)>,
    use_dense: bool,
}

impl Scratch {
    pub fn new() -> Self {
        Self::default()
    }

    fn begin(&mut self, gens: usize) {
        self.use_dense = gens <= 16;
        if self.use_dense {
            let size = 1usize << gens;
            if self.dense.len() < size {
                self.dense.resize(size, ZERO);
                self.mark.resize(size, false);
            }
            self.touched.clear();
        } else {
            self.pairs.clear();
        }
    }

    #[inline]
    fn add(&mut self, m: u64, v: C64) {
        if self.use_dense {
            let i = m as usize;
            if !self.mark[i] {
                self.mark[i] = true;
                self.touched.push(m);
                self.dense[i] = v;
            } else {
                self.dense[i] += v;
            }
        } else {
            self.pairs.push((m, v));
        }
    }

    fn finish(&mut self) -> Vec<(u64, C64)> {
        if self.use_dense {
            self.touched.sort_unstable();
            let mut out = Vec::with_capacity(self.touched.len());
            for &m in &self.touched {
                let i = m as usize;
                self.mark[i] = false;
                let v = self.dense[i];
                if v != ZERO {
                    out.push((m, v));
                }
            }
            out
        } else {
            self.pairs.sort_unstable_by_key(|t| t.0);
            let mut out: Vec<(u64, C64)> = Vec::with_capacity(self.pairs.len());
            for &(m, v) in &self.pairs {
                match out.last_mut() {
                    Some(last) if last.0 == m => last.1 += v,
                    _ => out.push((m, v)),
                }
            }
            out.retain(|t| t.1 != ZERO);
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn antisymmetry_and_nilpotence() {
        let u = Universe::Ambient { n: 4 };
        let d1 = GradedElement::generator(u, u.dzeta(0), c(1.0));
        let d2 = GradedElement::generator(u, u.dzeta(1), c(1.0));
        let m12 = (1u64 << u.dzeta(0)) | (1u64 << u.dzeta(1));
        assert_eq!(d1.wedge(&d2).unwrap().coefficient(m12), c(1.0));
        assert_eq!(d2.wedge(&d1).unwrap().coefficient(m12), c(-1.0));
        assert!(d1.wedge(&d1).unwrap().is_empty());
    }

    #[test]
    fn expand_sum_times_difference() {
        let u = Universe::Ambient { n: 4 };
        let a = GradedElement::one_form(u, &[u.dzeta(0), u.dzetabar(0)], &[c(1.0), c(1.0)]);
        let b = GradedElement::one_form(u, &[u.dzeta(0), u.dzetabar(0)], &[c(1.0), c(-1.0)]);
        let p = a.wedge(&b).unwrap();
        let m = (1u64 << u.dzeta(0)) | (1u64 << u.dzetabar(0));
        assert_eq!(p.terms(), &[(m, c(-2.0))]);
    }

    #[test]
    fn square_of_two_plane_sum() {
        let u = Universe::Plain { count: 4 };
        let a = GradedElement::from_terms(u, vec![(0b0011, c(1.0)), (0b1100, c(1.0))]);
        let sq = a.wedge_power(2);
        assert_eq!(sq.terms(), &[(0b1111, c(2.0))]);
        // generic path agrees
        assert_eq!(a.wedge(&a).unwrap(), sq);
    }

    #[test]
    fn universe_mismatch_is_error() {
        let a = GradedElement::one(Universe::Plain { count: 3 });
        let b = GradedElement::one(Universe::Plain { count: 4 });
        assert_eq!(a.wedge(&b), Err(Error::UniverseMismatch));
    }

    #[test]
    fn wedge_coefficient_matches_product() {
        let u = Universe::Plain { count: 6 };
        let a =
            GradedElement::from_terms(u, vec![(0b000011, c(1.5)), (0b010001, C64::new(0.0, 2.0))]);
        let b = GradedElement::from_terms(
            u,
            vec![(0b001100, c(-1.0)), (0b100110, c(0.5)), (0b101000, c(3.0))],
        );
        let p = a.wedge(&b).unwrap();
        for &(m, v) in p.terms() {
            assert_eq!(a.wedge_coefficient(&b, m), v);
            assert_eq!(
                b.wedge_coefficient(&a, m),
                b.wedge(&a).unwrap().coefficient(m)
            );
        }
    }
}
