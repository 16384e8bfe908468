//! Stratified Monte Carlo over the Heisenberg image `xi*` of the domain.
//!
//! Samples are drawn in the gauge `s = (|zeta*'|^4 + (xi*^n)^2)^{1/2}` with
//! `s = S u^2`, which makes the weighted kernel bounded near the
//! singularity. Strata are dyadic shells in `s` plus an inner ball. Every
//! sample is addressed by `(seed, stratum, index)` and chunks are reduced in
//! a fixed order, so results do not depend on the worker count. The first
//! quarter of every stratum is also reduced separately, giving a nested
//! estimate at one quarter of the budget from the same draws.

use crate::exec::Executor;
use crate::math::{cos, sin, sphere_area, sqrt};
use crate::rng::{box_muller, derive, SampleRng};
use crate::{Error, Result, C64, MAX_D};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

/// Samples per task; fixed so that chunk boundaries never move.
pub const CHUNK: usize = 1024;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureSpec {
    /// Total interior samples.
    pub samples: usize,
    /// Number of strata (`>= 2`).
    pub strata: usize,
    pub seed: u64,
    /// Boundary grid resolution (nodes per polar angle).
    pub boundary_res: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            samples: 200_000,
            strata: 12,
            seed: 1,
            boundary_res: 6,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.strata < 2 || self.samples < 8 * self.strata || self.boundary_res < 2 {
            return Err(Error::Config(format!("invalid quadrature spec {self:?}")));
        }
        Ok(())
    }

    /// `(u_lo, u_hi, count)` per stratum; `s = S u^2`.
    pub fn strata_layout(&self) -> Vec<(f64, f64, usize)> {
        let k = self.strata;
        let mut out = Vec::with_capacity(k);
        let u = |j: usize| crate::math::powf(2.0, -(j as f64) / 2.0);
        for j in 0..k - 1 {
            out.push((u(j + 1), u(j), 0));
        }
        out.push((0.0, u(k - 1), 0));
        for st in out.iter_mut() {
            st.2 = crate::math::round((self.samples as f64) * (st.1 - st.0)).max(8.0) as usize;
        }
        out
    }
}

/// A Monte Carlo estimate of a vector of integrals.
#[derive(Clone, Debug, Default)]
pub struct Estimate {
    pub mean: Vec<C64>,
    pub se: Vec<f64>,
    /// The same estimate restricted to the first quarter of every stratum.
    pub nested_mean: Vec<C64>,
    pub nested_se: Vec<f64>,
    pub samples: u64,
    /// Samples whose inverse transform failed to converge.
    pub skipped: u64,
}

/// What a sample evaluation reports back.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleStatus {
    Ok,
    Skipped,
}

/// One sample point of the image space.
#[derive(Clone, Copy, Debug)]
pub struct Draw {
    pub xi_star: [f64; MAX_D],
    pub weight: f64,
}

/// Maps uniforms to `xi*` and its weight.
pub fn draw(n: usize, s_max: f64, u_lo: f64, u_hi: f64, rng: &mut SampleRng) -> Draw {
    let d = 2 * n - 1;
    let u = u_lo + (u_hi - u_lo) * rng.uniform();
    let s = s_max * u * u;
    let psi = PI * (rng.uniform() - 0.5);
    let mut dir = [0.0; MAX_D];
    let mut norm2 = 0.0;
    for k in 0..n - 1 {
        let (a, b) = box_muller(rng.uniform(), rng.uniform());
        dir[2 * k] = a;
        dir[2 * k + 1] = b;
        norm2 += a * a + b * b;
    }
    let (cp, sp) = (cos(psi), sin(psi));
    let r = sqrt(s * cp.max(0.0)) / sqrt(norm2);
    let mut xs = [0.0; MAX_D];
    for k in 0..d - 1 {
        xs[k] = r * dir[k];
    }
    xs[d - 1] = s * sp;
    let mut w = (u_hi - u_lo) * 2.0 * s_max * u * PI * sphere_area(2 * n - 2) * 0.5;
    w *= crate::math::powi(s, n as i32 - 1) * crate::math::powi(cp.max(0.0), n as i32 - 2);
    Draw {
        xi_star: xs,
        weight: w,
    }
}

#[derive(Clone, Debug)]
struct Acc {
    sum: Vec<C64>,
    sq: Vec<f64>,
    nsum: Vec<C64>,
    nsq: Vec<f64>,
    count: usize,
    ncount: usize,
    skipped: u64,
}

impl Acc {
    fn new(k: usize) -> Self {
        Acc {
            sum: vec![C64::new(0.0, 0.0); k],
            sq: vec![0.0; k],
            nsum: vec![C64::new(0.0, 0.0); k],
            nsq: vec![0.0; k],
            count: 0,
            ncount: 0,
            skipped: 0,
        }
    }

    fn merge(&mut self, o: &Acc) {
        for i in 0..self.sum.len() {
            self.sum[i] += o.sum[i];
            self.sq[i] += o.sq[i];
            self.nsum[i] += o.nsum[i];
            self.nsq[i] += o.nsq[i];
        }
        self.count += o.count;
        self.ncount += o.ncount;
        self.skipped += o.skipped;
    }
}

/// Stratum mean and the variance of that mean, per component.
fn moments(sum: &[C64], sq: &[f64], cnt: usize, mean: &mut [C64], var: &mut [f64]) {
    if cnt == 0 {
        return;
    }
    let nf = cnt as f64;
    for i in 0..sum.len() {
        let m = sum[i] / nf;
        mean[i] += m;
        let v = (sq[i] / nf - m.norm_sqr()).max(0.0) * nf / (nf - 1.0).max(1.0);
        var[i] += v / nf;
    }
}

/// Integrates `n_out` functions of `xi*` over the sampled region of gauge
/// at most `s_max`. `eval(state, xi*, out)` writes unweighted values into a
/// zeroed `out`; `make_state` builds per-task scratch.
pub fn integrate<E, S, M, F>(
    quad: &QuadratureSpec,
    n: usize,
    s_max: f64,
    n_out: usize,
    exec: &E,
    make_state: M,
    eval: F,
) -> Result<Estimate>
where
    E: Executor,
    M: Fn() -> S + Sync,
    F: Fn(&mut S, &[f64], &mut [C64]) -> SampleStatus + Sync,
{
    quad.validate()?;
    if !(s_max > 0.0 && s_max.is_finite()) {
        return Err(Error::Numerical(format!("bad gauge bound {s_max}")));
    }
    let layout = quad.strata_layout();
    let mut tasks = Vec::new();
    for (k, st) in layout.iter().enumerate() {
        let mut start = 0;
        while start < st.2 {
            tasks.push((k, start, (st.2 - start).min(CHUNK)));
            start += CHUNK;
        }
    }
    let words = 4 * n as u64;
    let accs = exec.map(tasks.len(), |ti| {
        let (k, start, len) = tasks[ti];
        let (u_lo, u_hi, total) = layout[k];
        let nested_cut = total / 4;
        let mut rng = SampleRng::new(quad.seed, derive(quad.seed, k as u64), start as u64, words);
        let mut state = make_state();
        let mut acc = Acc::new(n_out);
        let mut out = vec![C64::new(0.0, 0.0); n_out];
        for i in start..start + len {
            let dr = draw(n, s_max, u_lo, u_hi, &mut rng);
            out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            if eval(&mut state, &dr.xi_star[..2 * n - 1], &mut out) == SampleStatus::Skipped {
                acc.skipped += 1;
            }
            let nested = i < nested_cut;
            for (c, v) in out.iter().enumerate() {
                let y = *v * dr.weight;
                acc.sum[c] += y;
                acc.sq[c] += y.norm_sqr();
                if nested {
                    acc.nsum[c] += y;
                    acc.nsq[c] += y.norm_sqr();
                }
            }
            acc.count += 1;
            if nested {
                acc.ncount += 1;
            }
        }
        (k, acc)
    });
    let mut est = Estimate {
        mean: vec![C64::new(0.0, 0.0); n_out],
        se: vec![0.0; n_out],
        nested_mean: vec![C64::new(0.0, 0.0); n_out],
        nested_se: vec![0.0; n_out],
        samples: 0,
        skipped: 0,
    };
    let mut var = vec![0.0; n_out];
    let mut nvar = vec![0.0; n_out];
    let mut i = 0;
    while i < accs.len() {
        let k = accs[i].0;
        let mut acc = Acc::new(n_out);
        while i < accs.len() && accs[i].0 == k {
            acc.merge(&accs[i].1);
            i += 1;
        }
        moments(&acc.sum, &acc.sq, acc.count, &mut est.mean, &mut var);
        moments(
            &acc.nsum,
            &acc.nsq,
            acc.ncount,
            &mut est.nested_mean,
            &mut nvar,
        );
        est.samples += acc.count as u64;
        est.skipped += acc.skipped;
    }
    for c in 0..n_out {
        est.se[c] = sqrt(var[c]);
        est.nested_se[c] = sqrt(nvar[c]);
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;

    #[test]
    fn strata_cover_unit_interval() {
        let q = QuadratureSpec {
            samples: 10_000,
            strata: 6,
            seed: 3,
            boundary_res: 4,
        };
        let l = q.strata_layout();
        assert_eq!(l.last().unwrap().0, 0.0);
        assert_eq!(l[0].1, 1.0);
        for w in l.windows(2) {
            assert_eq!(w[0].0, w[1].1);
        }
    }

    #[test]
    fn volume_of_gauge_ball() {
        // The region s <= S has volume that can be computed independently
        // with the substitution below on a fine grid.
        let n = 2;
        let s_max = 1.3;
        let q = QuadratureSpec {
            samples: 40_000,
            strata: 6,
            seed: 11,
            boundary_res: 4,
        };
        let est = integrate(
            &q,
            n,
            s_max,
            1,
            &Sequential,
            || (),
            |_, _, out| {
                out[0] = C64::new(1.0, 0.0);
                SampleStatus::Ok
            },
        )
        .unwrap();
        // n = 2: the set {|w|^4 + t^2 <= S^2} in R^3; volume
        // = int_{-S}^{S} pi (S^2 - t^2)^{1/2} dt = pi^2 S^2 / 2.
        let exact = PI * PI * s_max * s_max / 2.0;
        let rel = (est.mean[0].re - exact).abs() / exact;
        assert!(rel < 4.0 * est.se[0] / exact + 1e-3, "rel {rel}");
    }

    #[test]
    fn volume_of_gauge_ball_n4() {
        let s_max = 0.9;
        let q = QuadratureSpec {
            samples: 60_000,
            strata: 8,
            seed: 3,
            boundary_res: 4,
        };
        let est = integrate(
            &q,
            4,
            s_max,
            1,
            &Sequential,
            || (),
            |_, _, out| {
                out[0] = C64::new(1.0, 0.0);
                SampleStatus::Ok
            },
        )
        .unwrap();
        // vol_6 of the ball of radius (S^2 - t^2)^{1/4}, integrated in t:
        // (pi^3 / 6) * (3 pi / 8) S^4.
        let exact = PI.powi(4) * s_max.powi(4) / 16.0;
        let rel = (est.mean[0].re - exact).abs() / exact;
        assert!(rel < 4.0 * est.se[0] / exact + 1e-3, "rel {rel}");
    }

    #[test]
    fn deterministic_across_repeats() {
        let q = QuadratureSpec {
            samples: 5_000,
            strata: 4,
            seed: 5,
            boundary_res: 4,
        };
        let f = |_: &mut (), xs: &[f64], out: &mut [C64]| {
            out[0] = C64::new(xs[0] * xs[0], xs[2]);
            SampleStatus::Ok
        };
        let a = integrate(&q, 2, 1.0, 1, &Sequential, || (), f).unwrap();
        let b = integrate(&q, 2, 1.0, 1, &Sequential, || (), f).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.nested_mean, b.nested_mean);
    }
}
