//! The homotopy identity `phi = dbar_M P phi + Q dbar_M phi` checked at
//! targets, with `dbar_M P phi` from central differences of `P phi` over a
//! stencil that shares its random numbers with `Q dbar_M phi`.

use super::boundary::BoundaryGrid;
use super::cutoff::CutoffSpec;
use super::forms::CutoffForm;
use super::omega::{normalization, stated_normalization};
use super::operators::{boundary_job, interior_multi, Job, OperatorKind};
use super::sampler::QuadratureSpec;
use crate::crcalc::{
    dbar_from_gradient, dbar_ratios, multi_indices, DbarForm, FormValue, TangentialForm,
};
use crate::exec::Executor;
use crate::geometry::{BasePoint, GraphDefiningFunction};
use crate::math::sqrt;
use crate::{Error, Result, C64, MAX_N};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, Debug)]
pub struct TargetReport {
    pub x: BasePoint,
    pub phi: FormValue,
    pub dbar_p: FormValue,
    pub q: FormValue,
    /// `max |dbar P phi + Q dbar phi - phi|` over entries.
    pub residual: f64,
    /// Same at the nested quarter budget.
    pub nested_residual: f64,
    /// Largest standard error of `dbar P phi + Q dbar phi`.
    pub se: f64,
}

#[derive(Clone, Debug)]
pub struct HomotopyReport {
    pub n: usize,
    pub targets: Vec<TargetReport>,
    pub max_phi: f64,
    /// `max residual / max |phi|`.
    pub rel_residual: f64,
    pub nested_rel_residual: f64,
    pub rel_se: f64,
    pub samples: u64,
    pub skipped: u64,
    pub fd_step: f64,
}

/// Central-difference stencil `x +- h e_k`, in the order `(k,+), (k,-)`.
pub fn stencil(x: &BasePoint, h: f64) -> Vec<BasePoint> {
    let d = x.dim();
    let mut v = Vec::with_capacity(2 * d);
    for k in 0..d {
        v.push(x.shifted(k, h));
        v.push(x.shifted(k, -h));
    }
    v
}

/// Checks the identity at `targets`. `fd_step` is the stencil half-width.
#[allow(clippy::too_many_arguments)]
pub fn homotopy_residual<E: Executor>(
    phi: &dyn TangentialForm,
    rho: f64,
    targets: &[BasePoint],
    fd_step: f64,
    quad: &QuadratureSpec,
    grid: &BoundaryGrid,
    m: &GraphDefiningFunction,
    exec: &E,
) -> Result<HomotopyReport> {
    let n = m.n;
    let d = m.dim();
    let q = phi.degree();
    let r2 = phi.rank() * phi.rank();
    if targets.is_empty() {
        return Err(Error::Config("no targets".into()));
    }
    if !(fd_step > 0.0) {
        return Err(Error::Config(format!("bad stencil step {fd_step}")));
    }
    let dphi = DbarForm { inner: phi, m };
    let points: Vec<BasePoint> = targets.iter().flat_map(|x| stencil(x, fd_step)).collect();
    let p_job = Job::new(phi, OperatorKind::P, &points, rho, m)?;
    let q_job = Job::new(&dphi, OperatorKind::Q, targets, rho, m)?;
    let wp = p_job.width();
    let e = multi_indices(n - 1, q).len() * r2;
    let nt = targets.len();
    let mut ratios: Vec<[C64; MAX_N]> = Vec::with_capacity(nt);
    for x in targets {
        ratios.push(dbar_ratios(x, m)?);
    }
    let combine = |vals: &[C64], out: &mut [C64]| {
        let mut grad = vec![C64::new(0.0, 0.0); wp * d];
        let q_off = nt * 2 * d * wp;
        for t in 0..nt {
            for k in 0..d {
                let plus = &vals[(t * 2 * d + 2 * k) * wp..][..wp];
                let minus = &vals[(t * 2 * d + 2 * k + 1) * wp..][..wp];
                for c in 0..wp {
                    grad[c * d + k] = (plus[c] - minus[c]) / (2.0 * fd_step);
                }
            }
            let db = dbar_from_gradient(&grad, d, n, q - 1, phi.rank(), &ratios[t]);
            let qv = &vals[q_off + t * e..][..e];
            let o = &mut out[t * 3 * e..(t + 1) * 3 * e];
            for c in 0..e {
                o[c] = db.coeffs[c];
                o[e + c] = qv[c];
                o[2 * e + c] = db.coeffs[c] + qv[c];
            }
        }
    };
    let jobs = [p_job, q_job];
    let est = interior_multi(m, rho, &jobs, quad, exec, nt * 3 * e, combine)?;
    // deterministic boundary pieces, combined the same way
    let mut bvals = Vec::with_capacity(nt * (2 * d * wp + e));
    for job in &jobs {
        for v in boundary_job(m, grid, job)? {
            bvals.extend_from_slice(&v);
        }
    }
    let mut bout = vec![C64::new(0.0, 0.0); nt * 3 * e];
    combine(&bvals, &mut bout);
    let mut reports = Vec::with_capacity(nt);
    let mut max_phi: f64 = 0.0;
    let (mut max_res, mut max_nres, mut max_se): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (t, x) in targets.iter().enumerate() {
        let phi_x = phi.value(x);
        let mut dbar_p = FormValue::zero(n - 1, q, phi.rank());
        let mut qf = FormValue::zero(n - 1, q, phi.rank());
        let (mut res, mut nres, mut se): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for c in 0..e {
            let base = t * 3 * e;
            dbar_p.coeffs[c] = est.mean[base + c] + bout[base + c];
            qf.coeffs[c] = est.mean[base + e + c] + bout[base + e + c];
            let u = est.mean[base + 2 * e + c] + bout[base + 2 * e + c];
            let nu = est.nested_mean[base + 2 * e + c] + bout[base + 2 * e + c];
            res = res.max((u - phi_x.coeffs[c]).norm());
            nres = nres.max((nu - phi_x.coeffs[c]).norm());
            se = se.max(est.se[base + 2 * e + c]);
        }
        max_phi = max_phi.max(phi_x.sup());
        max_res = max_res.max(res);
        max_nres = max_nres.max(nres);
        max_se = max_se.max(se);
        reports.push(TargetReport {
            x: *x,
            phi: phi_x,
            dbar_p,
            q: qf,
            residual: res,
            nested_residual: nres,
            se,
        });
    }
    if max_phi == 0.0 {
        return Err(Error::Precondition("phi vanishes at every target".into()));
    }
    Ok(HomotopyReport {
        n,
        targets: reports,
        max_phi,
        rel_residual: max_res / max_phi,
        nested_rel_residual: max_nres / max_phi,
        rel_se: max_se / max_phi,
        samples: est.samples,
        skipped: est.skipped,
        fd_step,
    })
}

/// Fitted normalization from a homotopy run.
#[derive(Clone, Copy, Debug)]
pub struct Calibration {
    /// `c` minimizing `sum |c U~ - phi|^2`, `U~` the operators without
    /// their prefactor.
    pub fitted: C64,
    /// The literature value `-1/c0`.
    pub expected: C64,
    /// `fitted / expected`.
    pub correction: C64,
    /// Deviations of `correction` from 1.
    pub modulus_dev: f64,
    pub phase_dev: f64,
    /// `fitted` over the prefactor the operators use; 1 when they are
    /// normalized correctly.
    pub operator_correction: C64,
}

pub fn fit_constant(report: &HomotopyReport) -> Calibration {
    let used = normalization(report.n);
    let expected = stated_normalization(report.n);
    let mut num = C64::new(0.0, 0.0);
    let mut den = 0.0;
    for t in &report.targets {
        for c in 0..t.phi.coeffs.len() {
            let u = (t.dbar_p.coeffs[c] + t.q.coeffs[c]) / used;
            num += u.conj() * t.phi.coeffs[c];
            den += u.norm_sqr();
        }
    }
    let fitted = if den > 0.0 {
        num / den
    } else {
        C64::new(f64::NAN, f64::NAN)
    };
    let correction = fitted / expected;
    Calibration {
        fitted,
        expected,
        correction,
        modulus_dev: (correction.norm() - 1.0).abs(),
        phase_dev: correction.arg().abs(),
        operator_correction: fitted / used,
    }
}

/// Reference setup: `phi = chi zbar^1 dzbar^2` with `chi` equal to one on
/// `D_{3/7}` and supported in `D_{1/2}`.
pub fn reference_form(m: &GraphDefiningFunction) -> Result<CutoffForm> {
    if m.n < 3 {
        return Err(Error::Precondition("reference form needs n >= 3".into()));
    }
    let sigma = 0.5;
    let spec = CutoffSpec::new(0.5 / (1.0 - sigma / 4.0), sigma)?;
    Ok(CutoffForm {
        m: m.clone(),
        cutoff: Some(spec),
        alpha: Some(0),
        index: 0b10,
    })
}

/// Reference operator domain for [`reference_form`].
pub const REFERENCE_RHO: f64 = 0.55;

/// Ten reference targets for `n = 4`, all in `D_{0.4}` with `z^1 != 0`.
pub fn reference_targets() -> Vec<BasePoint> {
    [
        [0.25, 0.0, 0.1, 0.05, 0.0, 0.0, 0.05],
        [0.2, 0.1, 0.0, 0.0, 0.1, 0.0, -0.1],
        [0.3, -0.05, 0.0, 0.1, 0.0, 0.05, 0.0],
        [0.15, 0.15, -0.1, 0.0, 0.0, 0.1, 0.1],
        [-0.2, 0.1, 0.05, 0.0, -0.1, 0.05, 0.0],
        [0.1, -0.25, 0.0, -0.05, 0.05, 0.0, 0.08],
        [-0.15, -0.2, 0.1, 0.1, 0.0, -0.05, -0.05],
        [0.05, 0.3, -0.05, 0.05, 0.05, 0.0, 0.02],
        [-0.3, 0.0, 0.0, -0.1, 0.05, 0.05, -0.08],
        [0.2, -0.15, 0.1, -0.1, -0.05, 0.1, 0.12],
    ]
    .iter()
    .map(|x| BasePoint::new(x))
    .collect()
}

/// Reference stencil half-width `1e-2 rho sigma`.
pub fn reference_step() -> f64 {
    1e-2 * REFERENCE_RHO * 0.5
}

/// Fits the operator normalization on the quadric with `n = 4`, `q = 1`.
pub fn calibrate_constant<E: Executor>(
    rho: f64,
    quad: &QuadratureSpec,
    m: &GraphDefiningFunction,
    exec: &E,
) -> Result<(Calibration, HomotopyReport)> {
    if !m.rhat.is_quadric() || m.n != 4 {
        return Err(Error::Precondition(
            "calibration runs on the quadric with n = 4".into(),
        ));
    }
    let phi = reference_form(m)?;
    let grid = BoundaryGrid::new(m, rho, quad.boundary_res)?;
    let rep = homotopy_residual(
        &phi,
        rho,
        &reference_targets(),
        1e-2 * rho * 0.5,
        quad,
        &grid,
        m,
        exec,
    )?;
    Ok((fit_constant(&rep), rep))
}

/// Relative distance between two reports' fitted values (helper for
/// convergence checks).
pub fn relative_gap(a: &HomotopyReport, b: &HomotopyReport) -> f64 {
    let mut num: f64 = 0.0;
    for (x, y) in a.targets.iter().zip(&b.targets) {
        for c in 0..x.phi.coeffs.len() {
            let u = x.dbar_p.coeffs[c] + x.q.coeffs[c];
            let v = y.dbar_p.coeffs[c] + y.q.coeffs[c];
            num = num.max((u - v).norm());
        }
    }
    num / sqrt(a.max_phi * b.max_phi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_targets_lie_where_chi_is_one() {
        let m = GraphDefiningFunction::quadric(4);
        for x in reference_targets() {
            assert!(m.contains(x.as_slice(), 0.4), "{x:?}");
            assert!(x.as_slice()[0].abs() + x.as_slice()[1].abs() > 0.0);
        }
    }
}
