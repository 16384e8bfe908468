//! The solution operators: interior Monte Carlo and boundary quadrature for
//! `T phi = -(1/c0) [ int_D Omega ^ phi + int_{partial D} Omega^0 ^ phi ]`.
//!
//! On a `(0,m)`-form both pieces use the kernel index `p = m - 1`; `P` acts
//! on `(0,q)`-forms and `Q` on `(0,q+1)`-forms.

use super::boundary::BoundaryGrid;
use super::kernel::{SourceData, TargetData};
use super::omega::{normalization, KernelEngine, Variant};
use super::sampler::{integrate, Estimate, QuadratureSpec, SampleStatus};
use super::transform::{inverse_jacobian, solve_inverse, Inverse};
use crate::crcalc::{FormValue, TangentialForm};
use crate::exec::Executor;
use crate::geometry::{BasePoint, GraphDefiningFunction};
use crate::math::sqrt;
use crate::{Error, Result, C64, MAX_D};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Largest tolerated fraction of samples whose inverse solve failed.
pub const MAX_SKIPPED_FRACTION: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    P,
    Q,
}

impl OperatorKind {
    /// Kernel index for an input of the given degree.
    pub fn kernel_index(self, input_degree: usize, n: usize) -> Result<usize> {
        let ok = match self {
            OperatorKind::P => input_degree >= 1 && input_degree + 2 <= n,
            OperatorKind::Q => input_degree >= 2 && input_degree + 1 <= n - 1,
        };
        if !ok {
            return Err(Error::Precondition(format!(
                "{self:?} is not defined on (0,{input_degree})-forms for n = {n}"
            )));
        }
        Ok(input_degree - 1)
    }
}

/// One operator applied to one form at a list of targets.
pub struct Job<'a> {
    pub phi: &'a dyn TangentialForm,
    pub p: usize,
    pub targets: Vec<TargetData>,
    /// Multiplies the kernel in addition to [`normalization`].
    pub scale: C64,
}

impl<'a> Job<'a> {
    pub fn new(
        phi: &'a dyn TangentialForm,
        op: OperatorKind,
        targets: &[BasePoint],
        rho: f64,
        m: &GraphDefiningFunction,
    ) -> Result<Self> {
        if phi.n() != m.n {
            return Err(Error::Config(
                "form and hypersurface dimensions differ".into(),
            ));
        }
        let p = op.kernel_index(phi.degree(), m.n)?;
        let mut td = Vec::with_capacity(targets.len());
        for x in targets {
            if !m.contains(x.as_slice(), rho) {
                return Err(Error::OutOfDomain(format!(
                    "target {:?} not in D_rho",
                    x.as_slice()
                )));
            }
            td.push(TargetData::new(x, m)?);
        }
        Ok(Job {
            phi,
            p,
            targets: td,
            scale: C64::new(1.0, 0.0),
        })
    }

    /// Values per target: `|I| * rank^2`.
    pub fn width(&self) -> usize {
        crate::crcalc::multi_indices(self.phi.n() - 1, self.p).len()
            * self.phi.rank()
            * self.phi.rank()
    }

    fn factor(&self, n: usize) -> C64 {
        normalization(n) * self.scale
    }
}

/// Radius of the Euclidean ball that contains `D_rho` intersected with the
/// supports of all forms.
fn region_radius(m: &GraphDefiningFunction, rho: f64, jobs: &[Job]) -> f64 {
    let mut r = m.outer_radius(rho).min(m.domain_radius());
    if jobs.iter().all(|j| j.phi.support_radius().is_some()) {
        let s = jobs
            .iter()
            .map(|j| j.phi.support_radius().unwrap())
            .fold(0.0, f64::max);
        r = r.min(s);
    }
    r
}

/// Bound on the gauge `s` of `psi~_y(xi)` for `|xi| <= r`.
pub fn gauge_bound(m: &GraphDefiningFunction, r: f64, t: &TargetData) -> f64 {
    let d = m.dim();
    let y = t.x.as_slice();
    let yp = sqrt(y[..d - 1].iter().map(|v| v * v).sum());
    let rhat_sup = 0.5 * d as f64 * m.eps.max(1e-300) * r * r * 2.0;
    let w = sqrt(r * r + (r * r + rhat_sup) * (r * r + rhat_sup));
    let rz = sqrt(t.deriv.r_z[..m.n].iter().map(|c| c.norm_sqr()).sum());
    (r + yp) * (r + yp)
        + 2.0 * rz * (w + sqrt(t.z.as_slice().iter().map(|c| c.norm_sqr()).sum::<f64>()))
}

struct State {
    engines: Vec<KernelEngine>,
    src: Option<SourceData>,
    phi: Vec<C64>,
    kern: Vec<C64>,
}

/// Interior integrals of all jobs with common random numbers. `combine`
/// maps the concatenated per-target values (job-major, then target, then
/// entry) of one sample to `n_out` outputs; it must be linear.
pub fn interior_multi<E, C>(
    m: &GraphDefiningFunction,
    rho: f64,
    jobs: &[Job],
    quad: &QuadratureSpec,
    exec: &E,
    n_out: usize,
    combine: C,
) -> Result<Estimate>
where
    E: Executor,
    C: Fn(&[C64], &mut [C64]) + Sync,
{
    let n = m.n;
    let d = m.dim();
    let radius = region_radius(m, rho, jobs);
    let s_max = jobs
        .iter()
        .flat_map(|j| j.targets.iter())
        .map(|t| gauge_bound(m, radius, t))
        .fold(0.0, f64::max);
    let bracket = 2.0 * m.domain_radius();
    let total: usize = jobs.iter().map(|j| j.width() * j.targets.len()).sum();
    for j in jobs {
        KernelEngine::new(n, j.p, Variant::Interior)?;
    }
    let est = integrate(
        quad,
        n,
        s_max,
        n_out,
        exec,
        || State {
            engines: jobs
                .iter()
                .map(|j| KernelEngine::new(n, j.p, Variant::Interior).unwrap())
                .collect(),
            src: None,
            phi: Vec::new(),
            kern: Vec::new(),
        },
        |st, xs, out| {
            let mut vals = vec![C64::new(0.0, 0.0); total];
            let mut status = SampleStatus::Ok;
            let mut off = 0;
            for (ji, job) in jobs.iter().enumerate() {
                let w = job.width();
                let r2 = job.phi.rank() * job.phi.rank();
                let fac = job.factor(n);
                let eng = &mut st.engines[ji];
                let (ni, nj) = (eng.out_idx.len(), eng.in_idx.len());
                st.phi.resize(job.phi.entries(), C64::new(0.0, 0.0));
                st.kern.resize(eng.len(), C64::new(0.0, 0.0));
                for t in &job.targets {
                    let y = t.x.as_slice();
                    let mut xp2 = 0.0;
                    for k in 0..d - 1 {
                        let v = y[k] + xs[k];
                        xp2 += v * v;
                    }
                    if xp2 > radius * radius {
                        off += w;
                        continue;
                    }
                    let xi = match solve_inverse(t, m, xs, bracket) {
                        Inverse::Point(p) => p,
                        Inverse::Outside => {
                            off += w;
                            continue;
                        }
                        Inverse::NoConvergence => {
                            status = SampleStatus::Skipped;
                            off += w;
                            continue;
                        }
                    };
                    let xi_s = &xi[..d];
                    if xp2 + xi_s[d - 1] * xi_s[d - 1] > radius * radius || !m.contains(xi_s, rho) {
                        off += w;
                        continue;
                    }
                    job.phi.eval(xi_s, &mut st.phi);
                    if st.phi.iter().all(|v| *v == C64::new(0.0, 0.0)) {
                        off += w;
                        continue;
                    }
                    let bp = BasePoint::new(xi_s);
                    match st.src.as_mut() {
                        Some(s) => s.reset(&bp, m),
                        None => st.src = Some(SourceData::new(&bp, m)),
                    }
                    let src = st.src.as_ref().unwrap();
                    eng.eval(src, t, &mut st.kern);
                    let f = fac * inverse_jacobian(t, m, xi_s);
                    let v = &mut vals[off..off + w];
                    for ii in 0..ni {
                        for jj in 0..nj {
                            let k = st.kern[ii * nj + jj] * f;
                            for e in 0..r2 {
                                v[ii * r2 + e] += k * st.phi[jj * r2 + e];
                            }
                        }
                    }
                    off += w;
                }
            }
            combine(&vals, out);
            status
        },
    )?;
    if est.skipped as f64 > MAX_SKIPPED_FRACTION * est.samples as f64 {
        return Err(Error::Numerical(format!(
            "{} of {} samples failed the inverse transform",
            est.skipped, est.samples
        )));
    }
    Ok(est)
}

/// Boundary integrals of one job at each of its targets.
pub fn boundary_job(
    m: &GraphDefiningFunction,
    grid: &BoundaryGrid,
    job: &Job,
) -> Result<Vec<Vec<C64>>> {
    let n = m.n;
    let d = m.dim();
    let mut eng = KernelEngine::new(n, job.p, Variant::Boundary)?;
    let (ni, nj) = (eng.out_idx.len(), eng.in_idx.len());
    let r2 = job.phi.rank() * job.phi.rank();
    let w = job.width();
    let fac = job.factor(n);
    let mut phi = vec![C64::new(0.0, 0.0); job.phi.entries()];
    let mut kern = vec![C64::new(0.0, 0.0); eng.len()];
    let mut out = vec![vec![C64::new(0.0, 0.0); w]; job.targets.len()];
    let mut src: Option<SourceData> = None;
    for node in &grid.nodes {
        let xi = &node.x[..d];
        job.phi.eval(xi, &mut phi);
        if phi.iter().all(|v| *v == C64::new(0.0, 0.0)) {
            continue;
        }
        let bp = BasePoint::new(xi);
        match src.as_mut() {
            Some(s) => s.reset(&bp, m),
            None => src = Some(SourceData::new(&bp, m)),
        }
        let s = src.as_ref().unwrap();
        for (ti, t) in job.targets.iter().enumerate() {
            eng.eval(s, t, &mut kern);
            let v = &mut out[ti];
            for slot in 0..d {
                let f = fac * node.wm[slot];
                for ii in 0..ni {
                    for jj in 0..nj {
                        let k = kern[(slot * ni + ii) * nj + jj] * f;
                        for e in 0..r2 {
                            v[ii * r2 + e] += k * phi[jj * r2 + e];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// An operator value with its Monte Carlo error.
#[derive(Clone, Debug)]
pub struct OperatorEstimate {
    pub value: FormValue,
    /// Per-entry standard error of the interior part.
    pub se: Vec<f64>,
    /// Interior estimate from the nested quarter budget (boundary included).
    pub nested: FormValue,
    pub samples: u64,
    pub skipped: u64,
}

fn to_form(phi: &dyn TangentialForm, p: usize, v: &[C64]) -> FormValue {
    let mut f = FormValue::zero(phi.n() - 1, p, phi.rank());
    f.coeffs.copy_from_slice(v);
    f
}

/// Interior part of `op phi` at `x`.
pub fn apply_interior<E: Executor>(
    op: OperatorKind,
    phi: &dyn TangentialForm,
    rho: f64,
    x: &BasePoint,
    quad: &QuadratureSpec,
    m: &GraphDefiningFunction,
    exec: &E,
) -> Result<OperatorEstimate> {
    let job = Job::new(phi, op, core::slice::from_ref(x), rho, m)?;
    let w = job.width();
    let p = job.p;
    let est = interior_multi(
        m,
        rho,
        core::slice::from_ref(&job),
        quad,
        exec,
        w,
        |v, o| o.copy_from_slice(v),
    )?;
    Ok(OperatorEstimate {
        value: to_form(phi, p, &est.mean),
        se: est.se,
        nested: to_form(phi, p, &est.nested_mean),
        samples: est.samples,
        skipped: est.skipped,
    })
}

/// Boundary part of `op phi` at `x`.
pub fn apply_boundary(
    op: OperatorKind,
    phi: &dyn TangentialForm,
    rho: f64,
    x: &BasePoint,
    grid: &BoundaryGrid,
    m: &GraphDefiningFunction,
) -> Result<FormValue> {
    if (grid.rho - rho).abs() > 1e-15 * rho {
        return Err(Error::Config(
            "boundary grid built for a different rho".into(),
        ));
    }
    check_grid(grid, m)?;
    let job = Job::new(phi, op, core::slice::from_ref(x), rho, m)?;
    let v = boundary_job(m, grid, &job)?;
    Ok(to_form(phi, job.p, &v[0]))
}

/// `op phi` at `x`: interior plus boundary.
#[allow(clippy::too_many_arguments)]
pub fn apply_operator<E: Executor>(
    op: OperatorKind,
    phi: &dyn TangentialForm,
    rho: f64,
    x: &BasePoint,
    quad: &QuadratureSpec,
    grid: &BoundaryGrid,
    m: &GraphDefiningFunction,
    exec: &E,
) -> Result<OperatorEstimate> {
    let mut est = apply_interior(op, phi, rho, x, quad, m, exec)?;
    let b = apply_boundary(op, phi, rho, x, grid, m)?;
    est.value = est.value.add(&b);
    est.nested = est.nested.add(&b);
    Ok(est)
}

fn check_grid(grid: &BoundaryGrid, m: &GraphDefiningFunction) -> Result<()> {
    if grid.d != m.dim() || grid.d > MAX_D {
        return Err(Error::Config("boundary grid dimension mismatch".into()));
    }
    Ok(())
}
