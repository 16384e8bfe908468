//! The graph hypersurface `M: -y^n + |z'|^2 + rhat(x) = 0` over
//! `D subset R^{2n-1}`, its Wirtinger derivatives and the domains `D_rho`.

mod rhat;

pub use rhat::{Jet2, Rhat};

use crate::math::{cos, sin, sqrt};
use crate::rng::SampleRng;
use crate::{Error, Result, C64, MAX_D, MAX_N};
use alloc::format;
use alloc::vec::Vec;

const ZERO: C64 = C64::new(0.0, 0.0);

/// A point of the base domain in the layout
/// `(Re z^1, Im z^1, ..., Re z^{n-1}, Im z^{n-1}, x^n)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasePoint {
    d: usize,
    x: [f64; MAX_D],
}

impl BasePoint {
    pub fn new(x: &[f64]) -> Self {
        assert!(x.len() <= MAX_D, "dimension {} exceeds {}", x.len(), MAX_D);
        let mut c = [0.0; MAX_D];
        c[..x.len()].copy_from_slice(x);
        BasePoint { d: x.len(), x: c }
    }

    pub fn origin(n: usize) -> Self {
        BasePoint {
            d: 2 * n - 1,
            x: [0.0; MAX_D],
        }
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.x[..self.d]
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.x[..self.d]
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Complex dimension `n`.
    #[inline]
    pub fn n(&self) -> usize {
        (self.d + 1) / 2
    }

    /// `z^alpha` for `alpha < n` (zero-based).
    #[inline]
    pub fn z(&self, alpha: usize) -> C64 {
        C64::new(self.x[2 * alpha], self.x[2 * alpha + 1])
    }

    /// `x^n`.
    #[inline]
    pub fn xn(&self) -> f64 {
        self.x[self.d - 1]
    }

    /// `|z'|^2`.
    #[inline]
    pub fn zprime_norm2(&self) -> f64 {
        self.x[..self.d - 1].iter().map(|t| t * t).sum()
    }

    pub fn norm(&self) -> f64 {
        crate::math::norm(self.as_slice())
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|t| t.is_finite())
    }

    /// `self + h e_k`.
    pub fn shifted(&self, k: usize, h: f64) -> Self {
        let mut p = *self;
        p.x[k] += h;
        p
    }
}

/// A point of `C^n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmbientPoint {
    n: usize,
    z: [C64; MAX_N],
}

impl AmbientPoint {
    pub fn new(z: &[C64]) -> Self {
        let mut c = [ZERO; MAX_N];
        c[..z.len()].copy_from_slice(z);
        AmbientPoint { n: z.len(), z: c }
    }

    #[inline]
    pub fn as_slice(&self) -> &[C64] {
        &self.z[..self.n]
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// The projection `pi(z) = (Re z, Im z')`.
    pub fn project(&self) -> BasePoint {
        let n = self.n;
        let mut x = [0.0; MAX_D];
        for a in 0..n - 1 {
            x[2 * a] = self.z[a].re;
            x[2 * a + 1] = self.z[a].im;
        }
        x[2 * n - 2] = self.z[n - 1].re;
        BasePoint { d: 2 * n - 1, x }
    }
}

/// Holomorphic and anti-holomorphic first and second derivatives of `r`.
#[derive(Clone, Debug)]
pub struct DerivativePack {
    pub n: usize,
    /// `r_{z^j}`.
    pub r_z: [C64; MAX_N],
    /// `r_{zbar^j}`, the conjugate of `r_z`.
    pub r_zbar: [C64; MAX_N],
    /// `r_{z^j z^k}`.
    pub hess_zz: [[C64; MAX_N]; MAX_N],
    /// `r_{z^j zbar^k}`; Hermitian.
    pub hess_zzbar: [[C64; MAX_N]; MAX_N],
}

/// The hypersurface data shared by every computation.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphDefiningFunction {
    pub n: usize,
    pub rhat: Rhat,
    pub rho0: f64,
    /// Measured `max_{k <= 2} sup |d^k rhat|` over `D_{rho0}`.
    pub eps: f64,
    pub c0_gate: f64,
    /// Highest closed-form derivative order.
    pub m_max: usize,
}

/// Default admissibility constant `C_0`.
pub const DEFAULT_C0_GATE: f64 = 100.0;

impl GraphDefiningFunction {
    /// Builds and validates `M` with the default gate `C_0 = 100`.
    pub fn new(n: usize, rhat: Rhat, rho0: f64) -> Result<Self> {
        Self::with_gate(n, rhat, rho0, DEFAULT_C0_GATE)
    }

    /// The quadric `y^n = |z'|^2` with `rho0 = 1`.
    pub fn quadric(n: usize) -> Self {
        Self::new(n, Rhat::Quadric, 1.0).expect("quadric is admissible")
    }

    /// Builds `M`, measures `eps` and checks `eps <= 1/c0_gate`.
    pub fn with_gate(n: usize, rhat: Rhat, rho0: f64, c0_gate: f64) -> Result<Self> {
        let m = Self::unchecked(n, rhat, rho0, c0_gate)?;
        if m.eps > 1.0 / c0_gate {
            return Err(Error::Geometry(format!(
                "not admissible: measured eps {:.4e} exceeds 1/C0 = {:.4e}",
                m.eps,
                1.0 / c0_gate
            )));
        }
        Ok(m)
    }

    /// Builds `M` without the smallness gate (used by tests of non-admissible
    /// examples). Still checks `rhat(0) = 0`, `d rhat(0) = 0`.
    pub fn unchecked(n: usize, rhat: Rhat, rho0: f64, c0_gate: f64) -> Result<Self> {
        if !(2..=MAX_N).contains(&n) {
            return Err(Error::Config(format!("n = {n} outside 2..={MAX_N}")));
        }
        if !(rho0 > 0.0 && rho0 <= 3.0) {
            return Err(Error::Config(format!("rho0 = {rho0} outside (0, 3]")));
        }
        let d = 2 * n - 1;
        let o = [0.0; MAX_D];
        let mut jet = Jet2::default();
        rhat.jet2(&o[..d], &mut jet);
        if jet.v.abs() > 1e-14 || jet.g[..d].iter().any(|g| g.abs() > 1e-14) {
            return Err(Error::Geometry(
                "rhat must vanish to first order at 0".into(),
            ));
        }
        let mut m = GraphDefiningFunction {
            n,
            rhat,
            rho0,
            eps: 0.0,
            c0_gate,
            m_max: Rhat::M_MAX,
        };
        m.eps = if rhat.is_quadric() {
            0.0
        } else {
            m.measure_eps(4096, 0x5eed)
        };
        Ok(m)
    }

    /// `max_{k <= 2} sup |d^k rhat|` over sampled points of `D_{rho0}`.
    pub fn measure_eps(&self, samples: usize, seed: u64) -> f64 {
        let d = self.dim();
        let mut jet = Jet2::default();
        let sup = |x: &[f64], jet: &mut Jet2| {
            self.rhat.jet2(x, jet);
            let mut s = jet.v.abs();
            for k in 0..d {
                s = s.max(jet.g[k].abs());
                for l in 0..d {
                    s = s.max(jet.h[k][l].abs());
                }
            }
            s
        };
        let mut best = sup(&[0.0; MAX_D][..d], &mut jet);
        let mut rng = SampleRng::new(seed, 0, 0, 2 * d as u64);
        let mut x = [0.0; MAX_D];
        let r = self.rho0 * 1.5;
        let mut kept = 0;
        let mut tries = 0;
        while kept < samples && tries < samples * 200 {
            tries += 1;
            for t in x[..d].iter_mut() {
                *t = r * (2.0 * rng.uniform() - 1.0);
            }
            if self.phi(&x[..d]) < self.rho0 * self.rho0 {
                kept += 1;
                best = best.max(sup(&x[..d], &mut jet));
            }
        }
        best
    }

    /// Real dimension `2n - 1`.
    #[inline]
    pub fn dim(&self) -> usize {
        2 * self.n - 1
    }

    /// Radius of the ball on which the evaluator is defined.
    pub fn domain_radius(&self) -> f64 {
        4.0 * self.rho0
    }

    fn check_domain(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::OutOfDomain(format!(
                "expected {} coordinates, got {}",
                self.dim(),
                x.len()
            )));
        }
        if !x.iter().all(|t| t.is_finite()) || crate::math::norm(x) > self.domain_radius() {
            return Err(Error::OutOfDomain(format!(
                "|x| = {:.3e}",
                crate::math::norm(x)
            )));
        }
        Ok(())
    }

    /// `y^n = |z'|^2 + rhat(x)` on `M`.
    #[inline]
    pub fn height(&self, x: &[f64]) -> f64 {
        let d = x.len();
        x[..d - 1].iter().map(|t| t * t).sum::<f64>() + self.rhat.value(x)
    }

    /// Lifts a base point to `M`.
    pub fn lift(&self, x: &BasePoint) -> Result<AmbientPoint> {
        self.check_domain(x.as_slice())?;
        Ok(self.lift_unchecked(x.as_slice()))
    }

    #[inline]
    pub fn lift_unchecked(&self, x: &[f64]) -> AmbientPoint {
        let n = self.n;
        let mut z = [ZERO; MAX_N];
        for a in 0..n - 1 {
            z[a] = C64::new(x[2 * a], x[2 * a + 1]);
        }
        z[n - 1] = C64::new(x[2 * n - 2], self.height(x));
        AmbientPoint { n, z }
    }

    /// `r(z) = -y^n + |z'|^2 + rhat(pi z)` for any `z` in `C^n`.
    pub fn r(&self, z: &AmbientPoint) -> f64 {
        let x = z.project();
        -z.as_slice()[self.n - 1].im + x.zprime_norm2() + self.rhat.value(x.as_slice())
    }

    /// Exact Wirtinger derivatives of `r` at `x`.
    pub fn derivatives(&self, x: &BasePoint) -> Result<DerivativePack> {
        if self.m_max < 2 {
            return Err(Error::Capability("derivatives need m_max >= 2".into()));
        }
        self.check_domain(x.as_slice())?;
        let mut jet = Jet2::default();
        self.rhat.jet2(x.as_slice(), &mut jet);
        Ok(self.derivatives_from_jet(x.as_slice(), &jet))
    }

    /// Assembles Wirtinger derivatives from a real jet of `rhat`.
    ///
    /// Complex index `j < n-1` pairs with real coordinates
    /// `(p_j, q_j) = (2j, 2j+1)`; index `n-1` pairs with `(x^n, -)`, since
    /// `rhat` does not depend on `y^n`.
    pub fn derivatives_from_jet(&self, x: &[f64], jet: &Jet2) -> DerivativePack {
        let n = self.n;
        let d = 2 * n - 1;
        let mut pack = DerivativePack {
            n,
            r_z: [ZERO; MAX_N],
            r_zbar: [ZERO; MAX_N],
            hess_zz: [[ZERO; MAX_N]; MAX_N],
            hess_zzbar: [[ZERO; MAX_N]; MAX_N],
        };
        // holomorphic derivative of rhat along index j: 1/2 (d_p - i d_q)
        let grad = |j: usize| -> C64 {
            if j + 1 < n {
                C64::new(0.5 * jet.g[2 * j], -0.5 * jet.g[2 * j + 1])
            } else {
                C64::new(0.5 * jet.g[d - 1], 0.0)
            }
        };
        for j in 0..n {
            let mut v = grad(j);
            if j + 1 < n {
                v += C64::new(x[2 * j], -x[2 * j + 1]);
            } else {
                v += C64::new(0.0, 0.5);
            }
            pack.r_z[j] = v;
            pack.r_zbar[j] = v.conj();
        }
        let h = |a: Option<usize>, b: Option<usize>| -> f64 {
            match (a, b) {
                (Some(a), Some(b)) => jet.h[a][b],
                _ => 0.0,
            }
        };
        let pq = |j: usize| -> (Option<usize>, Option<usize>) {
            if j + 1 < n {
                (Some(2 * j), Some(2 * j + 1))
            } else {
                (Some(d - 1), None)
            }
        };
        for j in 0..n {
            let (pj, qj) = pq(j);
            for k in 0..n {
                let (pk, qk) = pq(k);
                // 1/4 (d_pj - i d_qj)(d_pk + i d_qk) rhat
                let re = h(pj, pk) + h(qj, qk);
                let im = h(pj, qk) - h(qj, pk);
                let mut v = C64::new(0.25 * re, 0.25 * im);
                if j == k && j + 1 < n {
                    v += C64::new(1.0, 0.0);
                }
                pack.hess_zzbar[j][k] = v;
                // 1/4 (d_pj - i d_qj)(d_pk - i d_qk) rhat
                let re = h(pj, pk) - h(qj, qk);
                let im = -(h(pj, qk) + h(qj, pk));
                pack.hess_zz[j][k] = C64::new(0.25 * re, 0.25 * im);
            }
        }
        pack
    }

    /// `phi(x) = |x|^2 + rhat(x) = (x^n)^2 + y^n`.
    #[inline]
    pub fn phi(&self, x: &[f64]) -> f64 {
        x.iter().map(|t| t * t).sum::<f64>() + self.rhat.value(x)
    }

    /// Strict membership `x in D_rho`.
    #[inline]
    pub fn contains(&self, x: &[f64], rho: f64) -> bool {
        self.phi(x) < rho * rho
    }

    /// Radius of a Euclidean ball guaranteed to contain `D_rho`.
    pub fn outer_radius(&self, rho: f64) -> f64 {
        (1.0 + 10.0 * self.eps) * rho / crate::math::sqrt((1.0 - self.eps).max(0.5))
    }

    /// Solves `phi(t u) = rho^2` for `t > 0` along the unit vector `u`.
    pub fn radial_root(&self, rho: f64, u: &[f64]) -> Result<f64> {
        let target = rho * rho;
        let f = |t: f64| -> f64 {
            let mut x = [0.0; MAX_D];
            for (k, v) in u.iter().enumerate() {
                x[k] = t * v;
            }
            self.phi(&x[..u.len()]) - target
        };
        let (mut lo, mut hi) = (0.0, rho);
        let mut grow = 0;
        while f(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
            grow += 1;
            if grow > 60 {
                return Err(Error::Geometry("boundary root not bracketed".into()));
            }
        }
        let mut t = 0.5 * (lo + hi);
        for _ in 0..200 {
            let ft = f(t);
            if ft.abs() <= 1e-15 * target {
                return Ok(t);
            }
            if ft < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            // derivative of phi(t u) in t
            let mut x = [0.0; MAX_D];
            for (k, v) in u.iter().enumerate() {
                x[k] = t * v;
            }
            let dphi: f64 = u
                .iter()
                .enumerate()
                .map(|(k, v)| v * (2.0 * x[k] + self.rhat.d1(&x[..u.len()], k)))
                .sum();
            let newton = t - ft / dphi;
            t = if dphi > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-16 * hi {
                return Ok(t);
            }
        }
        Ok(t)
    }

    /// Point of `partial D_rho` over the hyperspherical chart `angles`
    /// together with the chart partials of `t`.
    pub fn boundary_parametrize(&self, rho: f64, angles: &[f64]) -> Result<BoundaryPoint> {
        let d = self.dim();
        if angles.len() != d - 1 {
            return Err(Error::Config(format!("expected {} angles", d - 1)));
        }
        let mut u = [0.0; MAX_D];
        sphere_point(angles, &mut u[..d]);
        let t = self.radial_root(rho, &u[..d])?;
        let mut a = [0.0; MAX_D];
        a[..d - 1].copy_from_slice(angles);
        let mut dt = [0.0; MAX_D];
        for i in 0..d - 1 {
            let mut up = [0.0; MAX_D];
            let mut dn = [0.0; MAX_D];
            a[i] += BOUNDARY_FD_STEP;
            sphere_point(&a[..d - 1], &mut up[..d]);
            a[i] -= 2.0 * BOUNDARY_FD_STEP;
            sphere_point(&a[..d - 1], &mut dn[..d]);
            a[i] += BOUNDARY_FD_STEP;
            let tp = self.radial_root(rho, &up[..d])?;
            let tm = self.radial_root(rho, &dn[..d])?;
            dt[i] = (tp - tm) / (2.0 * BOUNDARY_FD_STEP);
        }
        let mut x = [0.0; MAX_D];
        for k in 0..d {
            x[k] = t * u[k];
        }
        Ok(BoundaryPoint {
            x: BasePoint::new(&x[..d]),
            t,
            u: BasePoint::new(&u[..d]),
            angles: a,
            dt,
        })
    }
}

/// Finite-difference step for chart derivatives of the boundary radius.
pub const BOUNDARY_FD_STEP: f64 = 1e-5;

/// A boundary point with chart data.
#[derive(Clone, Debug)]
pub struct BoundaryPoint {
    pub x: BasePoint,
    pub t: f64,
    pub u: BasePoint,
    pub angles: [f64; MAX_D],
    /// `dt / d angle_i`.
    pub dt: [f64; MAX_D],
}

impl BoundaryPoint {
    /// Jacobian `dx / d angle` as a `d x (d-1)` row-major matrix.
    pub fn jacobian(&self) -> Vec<f64> {
        let d = self.x.dim();
        let mut du = alloc::vec![0.0; d * (d - 1)];
        sphere_jacobian(&self.angles[..d - 1], &mut du);
        let u = self.u.as_slice();
        let mut j = alloc::vec![0.0; d * (d - 1)];
        for k in 0..d {
            for i in 0..d - 1 {
                j[k * (d - 1) + i] = self.dt[i] * u[k] + self.t * du[k * (d - 1) + i];
            }
        }
        j
    }

    /// Signed `(d-1)`-minors of the Jacobian: entry `k` is the coefficient of
    /// `dxi_{[d] minus k}` (ascending) pulled back to `d angle_1 ... d angle_{d-1}`,
    /// oriented so that the outward normal comes first.
    pub fn surface_minors(&self) -> Vec<f64> {
        let d = self.x.dim();
        let j = self.jacobian();
        let mut minors = alloc::vec![0.0; d];
        let mut sub = alloc::vec![0.0; (d - 1) * (d - 1)];
        for k in 0..d {
            let mut r = 0;
            for row in 0..d {
                if row == k {
                    continue;
                }
                sub[r * (d - 1)..(r + 1) * (d - 1)]
                    .copy_from_slice(&j[row * (d - 1)..(row + 1) * (d - 1)]);
                r += 1;
            }
            minors[k] = crate::linalg::det_real(&sub, d - 1);
        }
        // det[nu, J] = sum_k (-1)^k nu_k M_k with the radial direction as nu
        let u = self.u.as_slice();
        let orient: f64 = (0..d)
            .map(|k| {
                if k % 2 == 0 {
                    u[k] * minors[k]
                } else {
                    -u[k] * minors[k]
                }
            })
            .sum();
        if orient < 0.0 {
            for m in minors.iter_mut() {
                *m = -*m;
            }
        }
        minors
    }
}

/// Unit vector from hyperspherical angles: `u_1 = cos a_1`,
/// `u_k = sin a_1 ... sin a_{k-1} cos a_k`, `u_d = sin a_1 ... sin a_{d-1}`.
pub fn sphere_point(angles: &[f64], u: &mut [f64]) {
    let d = angles.len() + 1;
    let mut s = 1.0;
    for k in 0..d - 1 {
        u[k] = s * cos(angles[k]);
        s *= sin(angles[k]);
    }
    u[d - 1] = s;
}

/// `du / d angle` as a `d x (d-1)` row-major matrix.
pub fn sphere_jacobian(angles: &[f64], out: &mut [f64]) {
    let m = angles.len();
    let d = m + 1;
    for k in 0..d {
        for i in 0..m {
            // u_k = prod_{l<k} sin a_l * (cos a_k if k < m)
            let val = if i > k || (i == k && k == m) {
                0.0
            } else {
                let mut v = 1.0;
                for l in 0..k.min(m) {
                    v *= if l == i {
                        cos(angles[l])
                    } else {
                        sin(angles[l])
                    };
                }
                if k < m {
                    v *= if i == k {
                        -sin(angles[k])
                    } else {
                        cos(angles[k])
                    };
                }
                v
            };
            out[k * m + i] = val;
        }
    }
}

/// Hyperspherical surface element `prod_k sin^{d-2-k} a_k`.
pub fn sphere_element(angles: &[f64]) -> f64 {
    let m = angles.len();
    (0..m).fold(1.0, |acc, k| {
        acc * crate::math::powi(sin(angles[k]), (m - 1 - k) as i32)
    })
}

/// Euclidean distance.
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    sqrt(a.iter().zip(b).map(|(s, t)| (s - t) * (s - t)).sum())
}
