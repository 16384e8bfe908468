//! Sampling reports for the quasi-distance, the boundary gaps, the
//! approximate Heisenberg transformation and the ratios `T1`, `T2`.

use crate::exec::Executor;
use crate::geometry::{dist, BasePoint, GraphDefiningFunction};
use crate::henkin::kernel::{pair, point_data, SourceData, TargetData};
use crate::henkin::transform::forward;
use crate::math::{hypot, powf, sqrt};
use crate::rng::{box_muller, derive, SampleRng};
use crate::{Error, Result, MAX_D};
use alloc::vec::Vec;

/// Samples per task; task boundaries depend only on the sample count.
pub const CHUNK: usize = 4096;

/// Uniform point of `D_rho` by rejection from the enclosing ball.
pub fn sample_domain(m: &GraphDefiningFunction, rho: f64, rng: &mut SampleRng) -> BasePoint {
    let d = m.dim();
    let radius = m.outer_radius(rho);
    loop {
        let p = ball_point(d, radius, rng);
        if m.contains(&p[..d], rho) {
            return BasePoint::new(&p[..d]);
        }
    }
}

/// Point of `partial D_rho` in a uniformly random direction.
pub fn sample_boundary(
    m: &GraphDefiningFunction,
    rho: f64,
    rng: &mut SampleRng,
) -> Result<BasePoint> {
    let d = m.dim();
    let u = direction(d, rng);
    let t = m.radial_root(rho, &u[..d])?;
    let mut x = [0.0; MAX_D];
    for k in 0..d {
        x[k] = t * u[k];
    }
    Ok(BasePoint::new(&x[..d]))
}

fn direction(d: usize, rng: &mut SampleRng) -> [f64; MAX_D] {
    let mut u = [0.0; MAX_D];
    loop {
        let mut k = 0;
        while k < d {
            let (a, b) = box_muller(rng.uniform(), rng.uniform());
            u[k] = a;
            if k + 1 < d {
                u[k + 1] = b;
            }
            k += 2;
        }
        let s = sqrt(u[..d].iter().map(|v| v * v).sum());
        if s > 1e-12 {
            u[..d].iter_mut().for_each(|v| *v /= s);
            return u;
        }
    }
}

fn ball_point(d: usize, radius: f64, rng: &mut SampleRng) -> [f64; MAX_D] {
    let mut u = direction(d, rng);
    let r = radius * powf(rng.uniform(), 1.0 / d as f64);
    u[..d].iter_mut().for_each(|v| *v *= r);
    u
}

fn task_rng(seed: u64, tag: u64, task: usize) -> SampleRng {
    SampleRng::new(seed, derive(tag, task as u64), 0, 0)
}

fn tasks(samples: usize) -> usize {
    samples.div_ceil(CHUNK)
}

fn chunk_len(samples: usize, task: usize) -> usize {
    CHUNK.min(samples - task * CHUNK)
}

/// `d(zeta, z) = |r_z . (zeta - z)|`.
pub fn quasi_distance(zeta: &SourceData, z: &TargetData, m: &GraphDefiningFunction) -> f64 {
    pair(&z.deriv.r_z[..m.n], &zeta.zeta, &z.z).norm()
}

fn ambient_dist2(s: &SourceData, t: &TargetData) -> f64 {
    s.zeta
        .as_slice()
        .iter()
        .zip(t.z.as_slice())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryGap {
    pub sigma: f64,
    /// `min d(zeta, z) / (rho sigma)^2` over `z in D_{(1-sigma)rho}`, `zeta in partial D_rho`.
    pub min_d: f64,
    /// `min |zeta^n - z^n| / (rho^2 sigma)`.
    pub min_dzn: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuasiDistanceReport {
    pub rho: f64,
    pub samples: usize,
    /// `min d(zeta, z) / |zeta - z|^2`.
    pub min_ratio: f64,
    /// `max d(zeta, z) / (d(zeta, v) + d(v, z))`.
    pub max_triangle: f64,
    pub gaps: Vec<BoundaryGap>,
}

pub fn quasi_distance_report<E: Executor>(
    rho: f64,
    sigmas: &[f64],
    samples: usize,
    seed: u64,
    m: &GraphDefiningFunction,
    exec: &E,
) -> Result<QuasiDistanceReport> {
    if !(rho > 0.0 && rho <= m.rho0) || samples == 0 {
        return Err(Error::Config("need 0 < rho <= rho0 and samples > 0".into()));
    }
    if sigmas.iter().any(|s| !(*s > 0.0 && *s < 1.0)) {
        return Err(Error::Config("sigma must lie in (0, 1)".into()));
    }
    let parts = exec.map(tasks(samples), |task| -> Result<(f64, f64)> {
        let mut rng = task_rng(seed, 0xd157, task);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for _ in 0..chunk_len(samples, task) {
            let pts = [
                sample_domain(m, rho, &mut rng),
                sample_domain(m, rho, &mut rng),
                sample_domain(m, rho, &mut rng),
            ];
            let s: Vec<SourceData> = pts.iter().map(|p| SourceData::new(p, m)).collect();
            let t: Vec<TargetData> = pts
                .iter()
                .map(|p| TargetData::new(p, m))
                .collect::<Result<_>>()?;
            // (zeta, z, v) = points 0, 1, 2
            let dzz = quasi_distance(&s[0], &t[1], m);
            lo = lo.min(dzz / ambient_dist2(&s[0], &t[1]));
            let via = quasi_distance(&s[0], &t[2], m) + quasi_distance(&s[2], &t[1], m);
            hi = hi.max(dzz / via);
        }
        Ok((lo, hi))
    });
    let (mut min_ratio, mut max_triangle) = (f64::INFINITY, 0.0f64);
    for p in parts {
        let (a, b) = p?;
        min_ratio = min_ratio.min(a);
        max_triangle = max_triangle.max(b);
    }
    let mut gaps = Vec::with_capacity(sigmas.len());
    for (g, &sigma) in sigmas.iter().enumerate() {
        let parts = exec.map(tasks(samples), |task| -> Result<(f64, f64)> {
            let mut rng = task_rng(seed, derive(0xb0a7, g as u64), task);
            let (mut a, mut b) = (f64::INFINITY, f64::INFINITY);
            for _ in 0..chunk_len(samples, task) {
                let z = sample_domain(m, (1.0 - sigma) * rho, &mut rng);
                let zeta = sample_boundary(m, rho, &mut rng)?;
                let (s, t) = (SourceData::new(&zeta, m), TargetData::new(&z, m)?);
                a = a.min(quasi_distance(&s, &t, m) / (rho * sigma * rho * sigma));
                let dzn = (s.zeta.as_slice()[m.n - 1] - t.z.as_slice()[m.n - 1]).norm();
                b = b.min(dzn / (rho * rho * sigma));
            }
            Ok((a, b))
        });
        let (mut min_d, mut min_dzn) = (f64::INFINITY, f64::INFINITY);
        for p in parts {
            let (a, b) = p?;
            min_d = min_d.min(a);
            min_dzn = min_dzn.min(b);
        }
        gaps.push(BoundaryGap {
            sigma,
            min_d,
            min_dzn,
        });
    }
    Ok(QuasiDistanceReport {
        rho,
        samples,
        min_ratio,
        max_triangle,
        gaps,
    })
}

/// Containment threshold for `psi~_x(D_rho)`, in units of `rho`.
pub const IMAGE_RADIUS: f64 = 9.0;

#[derive(Clone, Debug, PartialEq)]
pub struct TransformReport {
    pub rho: f64,
    pub samples: usize,
    /// `max |psi~_x(xi)| / rho`.
    pub max_image_radius: f64,
    /// Pairs with `|psi~_x(xi)| >= 9 rho`.
    pub containment_violations: usize,
    /// Extremes of `|Psi(v) - Psi(u)| / |v - u|` for `Psi(xi, x) = (psi~_x(xi), x)`.
    pub lipschitz_min: f64,
    pub lipschitz_max: f64,
    /// `max |h(xi*, x)|` with `h = eta*^n - |zeta*'|^2`.
    pub max_h: f64,
    /// `max |h| / (eps |xi*|^2)`; zero when `eps = 0`.
    pub max_h_ratio: f64,
    pub max_t1_dev: f64,
    pub max_t2_dev: f64,
    /// `max |N(z, zeta)| / |N(zeta, z)|`.
    pub max_n_ratio: f64,
    /// Pairs with `|T1 - 1| >= 1/2`, `|T2 - 1| >= 1/2` or an `N` ratio `>= 4`.
    pub nr_violations: usize,
}

#[derive(Clone, Copy)]
struct TransformPart {
    max_image: f64,
    violations: usize,
    lip_min: f64,
    lip_max: f64,
    max_h: f64,
    max_h_ratio: f64,
    t1: f64,
    t2: f64,
    n_ratio: f64,
    nr_violations: usize,
}

/// Relative size of the local perturbations in the Lipschitz scan.
const LOCAL_STEP: f64 = 1e-3;

pub fn transform_report<E: Executor>(
    rho: f64,
    samples: usize,
    seed: u64,
    m: &GraphDefiningFunction,
    exec: &E,
) -> Result<TransformReport> {
    if !(rho > 0.0 && rho <= m.rho0) || samples == 0 {
        return Err(Error::Config("need 0 < rho <= rho0 and samples > 0".into()));
    }
    let d = m.dim();
    let n = m.n;
    let parts = exec.map(tasks(samples), |task| -> Result<TransformPart> {
        let mut rng = task_rng(seed, 0x75f0, task);
        let mut p = TransformPart {
            max_image: 0.0,
            violations: 0,
            lip_min: f64::INFINITY,
            lip_max: 0.0,
            max_h: 0.0,
            max_h_ratio: 0.0,
            t1: 0.0,
            t2: 0.0,
            n_ratio: 0.0,
            nr_violations: 0,
        };
        for i in 0..chunk_len(samples, task) {
            let xi = sample_domain(m, rho, &mut rng);
            let x = sample_domain(m, rho, &mut rng);
            let t = TargetData::new(&x, m)?;
            let img = forward(&t, m, xi.as_slice());
            let r = sqrt(img[..d].iter().map(|v| v * v).sum());
            p.max_image = p.max_image.max(r / rho);
            if r >= IMAGE_RADIUS * rho {
                p.violations += 1;
            }
            // alternate far pairs and local pairs for the Lipschitz ratio
            let (xi2, x2) = if i % 2 == 0 {
                (
                    sample_domain(m, rho, &mut rng),
                    sample_domain(m, rho, &mut rng),
                )
            } else {
                let (a, b) = (direction(d, &mut rng), direction(d, &mut rng));
                let h = LOCAL_STEP * rho;
                let mut u = [0.0; MAX_D];
                let mut v = [0.0; MAX_D];
                for k in 0..d {
                    u[k] = xi.as_slice()[k] + h * a[k];
                    v[k] = x.as_slice()[k] + h * b[k];
                }
                (BasePoint::new(&u[..d]), BasePoint::new(&v[..d]))
            };
            let t2 = TargetData::new(&x2, m)?;
            let img2 = forward(&t2, m, xi2.as_slice());
            let dx = dist(x.as_slice(), x2.as_slice());
            let num = hypot(dist(&img[..d], &img2[..d]), dx);
            let den = hypot(dist(xi.as_slice(), xi2.as_slice()), dx);
            if den > 0.0 {
                p.lip_min = p.lip_min.min(num / den);
                p.lip_max = p.lip_max.max(num / den);
            }
            if xi.as_slice() == x.as_slice() {
                continue;
            }
            let s = SourceData::new(&xi, m);
            let k = point_data(&s, &t, m);
            let zp2: f64 = k.zeta_star[..n - 1].iter().map(|v| v.norm_sqr()).sum();
            let h = (k.zeta_star[n - 1].im - zp2).abs();
            p.max_h = p.max_h.max(h);
            if m.eps > 0.0 {
                p.max_h_ratio = p.max_h_ratio.max(h / (m.eps * r * r));
            }
            let back = point_data(&SourceData::new(&x, m), &TargetData::new(&xi, m)?, m);
            let (d1, d2) = ((k.t1 - 1.0).norm(), (k.t2 - 1.0).norm());
            let nr = back.nn.norm() / k.nn.norm();
            p.t1 = p.t1.max(d1);
            p.t2 = p.t2.max(d2);
            p.n_ratio = p.n_ratio.max(nr);
            if d1 >= 0.5 || d2 >= 0.5 || nr >= 4.0 {
                p.nr_violations += 1;
            }
        }
        Ok(p)
    });
    let mut rep = TransformReport {
        rho,
        samples,
        max_image_radius: 0.0,
        containment_violations: 0,
        lipschitz_min: f64::INFINITY,
        lipschitz_max: 0.0,
        max_h: 0.0,
        max_h_ratio: 0.0,
        max_t1_dev: 0.0,
        max_t2_dev: 0.0,
        max_n_ratio: 0.0,
        nr_violations: 0,
    };
    for p in parts {
        let p = p?;
        rep.max_image_radius = rep.max_image_radius.max(p.max_image);
        rep.containment_violations += p.violations;
        rep.lipschitz_min = rep.lipschitz_min.min(p.lip_min);
        rep.lipschitz_max = rep.lipschitz_max.max(p.lip_max);
        rep.max_h = rep.max_h.max(p.max_h);
        rep.max_h_ratio = rep.max_h_ratio.max(p.max_h_ratio);
        rep.max_t1_dev = rep.max_t1_dev.max(p.t1);
        rep.max_t2_dev = rep.max_t2_dev.max(p.t2);
        rep.max_n_ratio = rep.max_n_ratio.max(p.n_ratio);
        rep.nr_violations += p.nr_violations;
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::geometry::Rhat;
    use crate::henkin::kernel_point_data;

    #[test]
    fn worked_pair_has_ratio_one_quarter() {
        let m = GraphDefiningFunction::quadric(4);
        // zeta = 0, z = (1, 0, 0, i): x = (1, 0, 0, 0, 0, 0, 0)
        let z = BasePoint::new(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let s = SourceData::new(&BasePoint::origin(4), &m);
        let t = TargetData::new(&z, &m).unwrap();
        let dd = quasi_distance(&s, &t, &m);
        assert!((dd - 0.5).abs() < 1e-15);
        assert!((dd / ambient_dist2(&s, &t) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn collinear_triples_on_the_real_axis() {
        let m = GraphDefiningFunction::quadric(3);
        let pt = |a: f64| BasePoint::new(&[a, 0.0, 0.0, 0.0, 0.0]);
        let mut worst: f64 = 0.0;
        let grid: Vec<f64> = (0..21).map(|i| -0.5 + 0.05 * i as f64).collect();
        for &a in &grid {
            for &b in &grid {
                for &c in &grid {
                    if a == b {
                        continue;
                    }
                    let (sa, sc) = (SourceData::new(&pt(a), &m), SourceData::new(&pt(c), &m));
                    let (tb, tc) = (
                        TargetData::new(&pt(b), &m).unwrap(),
                        TargetData::new(&pt(c), &m).unwrap(),
                    );
                    let via = quasi_distance(&sa, &tc, &m) + quasi_distance(&sc, &tb, &m);
                    worst = worst.max(quasi_distance(&sa, &tb, &m) / via);
                }
            }
        }
        assert!(worst <= 4.0, "{worst}");
    }

    #[test]
    fn quadric_transform_is_exact() {
        let m = GraphDefiningFunction::quadric(4);
        let rep = transform_report(1.0, 3000, 5, &m, &Sequential).unwrap();
        assert!(rep.max_h < 1e-12, "{}", rep.max_h);
        assert!(rep.max_t1_dev < 1e-12 && rep.max_t2_dev < 1e-12);
        assert!(
            rep.lipschitz_min >= 1.0 / 8.0 && rep.lipschitz_max <= 8.0,
            "{rep:?}"
        );
        assert_eq!(rep.containment_violations, 0);
    }

    #[test]
    fn quartic_nr_ratios_stay_inside() {
        let m = GraphDefiningFunction::new(3, Rhat::quartic(0.01, 1.0), 1.0).unwrap();
        let rep = transform_report(1.0, 4000, 9, &m, &Sequential).unwrap();
        assert_eq!(rep.nr_violations, 0);
        assert!(rep.max_t1_dev < 0.5 && rep.max_n_ratio < 4.0);
        assert!(rep.max_h_ratio.is_finite());
    }

    #[test]
    fn gaps_and_ratios_are_positive() {
        let m = GraphDefiningFunction::new(3, Rhat::quartic(0.01, 1.0), 1.0).unwrap();
        let rep = quasi_distance_report(1.0, &[0.1, 0.5], 2000, 1, &m, &Sequential).unwrap();
        assert!(rep.min_ratio > 0.0 && rep.max_triangle.is_finite());
        for g in &rep.gaps {
            assert!(g.min_d > 0.0 && g.min_dzn > 0.0);
        }
        let again = quasi_distance_report(1.0, &[0.1, 0.5], 2000, 1, &m, &Sequential).unwrap();
        assert_eq!(rep, again);
    }

    #[test]
    fn samples_lie_where_claimed() {
        let m = GraphDefiningFunction::new(2, Rhat::quartic(0.01, 1.0), 1.0).unwrap();
        let mut rng = SampleRng::new(1, 0, 0, 0);
        for _ in 0..200 {
            assert!(m.contains(sample_domain(&m, 0.4, &mut rng).as_slice(), 0.4));
            let b = sample_boundary(&m, 0.4, &mut rng).unwrap();
            assert!((m.phi(b.as_slice()) - 0.16).abs() < 1e-12);
        }
        let a = BasePoint::new(&[0.1, 0.0, 0.2]);
        assert!(kernel_point_data(&a, &a, &m).is_err());
    }
}
