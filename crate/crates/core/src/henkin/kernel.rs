//! Pointwise kernel data `N0, S0, N, A, B, T1, T2` and the approximate
//! Heisenberg coordinates of a source point relative to a target.

use crate::geometry::{AmbientPoint, BasePoint, DerivativePack, GraphDefiningFunction, Jet2};
use crate::{Error, Result, C64, MAX_D, MAX_N};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Everything about the target `z = lift(x)` that the kernels need.
#[derive(Clone, Debug)]
pub struct TargetData {
    pub x: BasePoint,
    pub z: AmbientPoint,
    pub deriv: DerivativePack,
    pub jet: Jet2,
    /// `r_{zbar^beta} / r_{zbar^n}`.
    pub ratios: [C64; MAX_N],
    /// Tangentially projected `dbar_z r_z ^ dzeta` coefficients:
    /// `g[j][beta] = r_{z^j zbar^beta} - ratios[beta] r_{z^j zbar^n}`.
    pub g: [[C64; MAX_N]; MAX_N],
}

impl TargetData {
    pub fn new(x: &BasePoint, m: &GraphDefiningFunction) -> Result<Self> {
        let z = m.lift(x)?;
        let mut jet = Jet2::default();
        m.rhat.jet2(x.as_slice(), &mut jet);
        let deriv = m.derivatives_from_jet(x.as_slice(), &jet);
        let n = m.n;
        let mut ratios = [ZERO; MAX_N];
        for b in 0..n - 1 {
            ratios[b] = deriv.r_zbar[b] / deriv.r_zbar[n - 1];
        }
        let mut g = [[ZERO; MAX_N]; MAX_N];
        for j in 0..n {
            for b in 0..n - 1 {
                g[j][b] = deriv.hess_zzbar[j][b] - ratios[b] * deriv.hess_zzbar[j][n - 1];
            }
        }
        Ok(TargetData {
            x: *x,
            z,
            deriv,
            jet,
            ratios,
            g,
        })
    }

    /// `d rhat / d x^n` at the target.
    #[inline]
    pub fn rhat_n(&self) -> f64 {
        self.jet.g[self.x.dim() - 1]
    }
}

/// Source-point data: lift, derivatives and the pulled-back differentials.
#[derive(Clone, Debug)]
pub struct SourceData {
    pub xi: BasePoint,
    pub zeta: AmbientPoint,
    pub jet: Jet2,
    pub deriv: DerivativePack,
    /// `dzeta^j` pulled back to `M` as a `dxi` covector.
    pub e: [[C64; MAX_D]; MAX_N],
}

impl SourceData {
    pub fn new(xi: &BasePoint, m: &GraphDefiningFunction) -> Self {
        let mut s = SourceData {
            xi: *xi,
            zeta: AmbientPoint::new(&[ZERO; MAX_N][..m.n]),
            jet: Jet2::default(),
            deriv: m.derivatives_from_jet(&[0.0; MAX_D][..m.dim()], &Jet2::default()),
            e: [[ZERO; MAX_D]; MAX_N],
        };
        s.reset(xi, m);
        s
    }

    /// Recomputes in place for a new source point.
    pub fn reset(&mut self, xi: &BasePoint, m: &GraphDefiningFunction) {
        let n = m.n;
        let d = 2 * n - 1;
        let x = xi.as_slice();
        self.xi = *xi;
        m.rhat.jet2(x, &mut self.jet);
        self.zeta = m.lift_unchecked(x);
        self.deriv = m.derivatives_from_jet(x, &self.jet);
        for row in self.e.iter_mut().take(n) {
            row.iter_mut().for_each(|v| *v = ZERO);
        }
        for a in 0..n - 1 {
            self.e[a][2 * a] = C64::new(1.0, 0.0);
            self.e[a][2 * a + 1] = C64::new(0.0, 1.0);
        }
        // dzeta^n = dxi^n + i d(|zeta'|^2 + rhat)
        for k in 0..d {
            let dy = if k + 1 < d { 2.0 * x[k] } else { 0.0 } + self.jet.g[k];
            self.e[n - 1][k] = C64::new(if k + 1 == d { 1.0 } else { 0.0 }, dy);
        }
    }

    #[inline]
    pub fn rhat_n(&self) -> f64 {
        self.jet.g[self.xi.dim() - 1]
    }
}

/// Kernel data for a pair, named as in the text.
#[derive(Clone, Debug)]
pub struct KernelPointData {
    pub zeta: AmbientPoint,
    pub z: AmbientPoint,
    /// `r_zeta . (zeta - z)`.
    pub n0: C64,
    /// `r_z . (zeta - z)`.
    pub s0: C64,
    /// `|zeta' - z'|^2 + 2i Im(r_z . (zeta - z))`.
    pub nn: C64,
    /// `rhat(zeta) - rhat(z) - 2 Re(rhat_z . (zeta - z))`.
    pub a_rem: f64,
    /// `2 (rhat_zeta - rhat_z) . (zeta - z) - A`.
    pub b_rem: C64,
    /// `psi_z(zeta) = (zeta' - z', -2i r_z . (zeta - z))`.
    pub zeta_star: [C64; MAX_N],
    /// `2 N0 / N`.
    pub t1: C64,
    /// `-2 S0 / conj(N)`.
    pub t2: C64,
}

/// `u . (zeta - z)` for a covector `u`.
#[inline]
pub fn pair(u: &[C64], zeta: &AmbientPoint, z: &AmbientPoint) -> C64 {
    u.iter()
        .zip(zeta.as_slice().iter().zip(z.as_slice()))
        .map(|(a, (b, c))| *a * (*b - *c))
        .sum()
}

pub fn kernel_point_data(
    xi: &BasePoint,
    x: &BasePoint,
    m: &GraphDefiningFunction,
) -> Result<KernelPointData> {
    if xi.as_slice() == x.as_slice() {
        return Err(Error::Singular("source equals target".into()));
    }
    let t = TargetData::new(x, m)?;
    m.lift(xi)?;
    let s = SourceData::new(xi, m);
    Ok(point_data(&s, &t, m))
}

pub fn point_data(s: &SourceData, t: &TargetData, m: &GraphDefiningFunction) -> KernelPointData {
    let n = m.n;
    let (zeta, z) = (&s.zeta, &t.z);
    let n0 = pair(&s.deriv.r_z[..n], zeta, z);
    let s0 = pair(&t.deriv.r_z[..n], zeta, z);
    let dz: f64 = (0..n - 1)
        .map(|a| (zeta.as_slice()[a] - z.as_slice()[a]).norm_sqr())
        .sum();
    let nn = C64::new(dz, 2.0 * s0.im);
    // holomorphic gradient of rhat alone: r_z minus the quadric part
    let mut rh_z = [ZERO; MAX_N];
    let mut rh_zeta = [ZERO; MAX_N];
    for j in 0..n {
        let (qz, qzeta) = if j + 1 < n {
            (z.as_slice()[j].conj(), zeta.as_slice()[j].conj())
        } else {
            (C64::new(0.0, 0.5), C64::new(0.0, 0.5))
        };
        rh_z[j] = t.deriv.r_z[j] - qz;
        rh_zeta[j] = s.deriv.r_z[j] - qzeta;
    }
    let lin = pair(&rh_z[..n], zeta, z);
    let a_rem = s.jet.v - t.jet.v - 2.0 * lin.re;
    let mut diff = [ZERO; MAX_N];
    for j in 0..n {
        diff[j] = rh_zeta[j] - rh_z[j];
    }
    let b_rem = pair(&diff[..n], zeta, z) * 2.0 - a_rem;
    let mut zeta_star = [ZERO; MAX_N];
    for a in 0..n - 1 {
        zeta_star[a] = zeta.as_slice()[a] - z.as_slice()[a];
    }
    zeta_star[n - 1] = C64::new(0.0, -2.0) * s0;
    KernelPointData {
        zeta: *zeta,
        z: *z,
        n0,
        s0,
        nn,
        a_rem,
        b_rem,
        zeta_star,
        t1: n0 * 2.0 / nn,
        t2: -s0 * 2.0 / nn.conj(),
    }
}
