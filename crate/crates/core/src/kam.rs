//! Rapid iteration for `dbar_M A + A omega = 0`.
//!
//! Each step solves the linearized problem with `B_j = -P' omega_j`, sets
//! `A_j = I + B_j` and passes on the new connection
//!
//! ```text
//! omega_{j+1} = (Q'(omega_j ^ omega_j) + B_j omega_j) (I + B_j)^{-1}
//! ```
//!
//! so that `dbar A_j + A_j omega_j = omega_{j+1} A_j` holds up to the
//! homotopy residual. Domains shrink as `rho_{j+1} = (1 - sigma_j) rho_j`
//! with `sigma_j = 2^{-j-1}`.
//!
//! `B_j` is needed pointwise twice: at the nodes of a tensor grid (to
//! represent `omega_{j+1}` for the next step) and at a few check points
//! together with a finite-difference stencil, where the accumulated product
//! `A = A_J ... A_0` and its `dbar_M` are tracked exactly. The residual
//! `dbar_M A + A omega_0` reported at the end therefore uses no
//! interpolated values of the last factor.

use crate::crcalc::{
    dbar_from_gradient, dbar_m, dbar_ratios, multi_indices, wedge_forms, FormValue, TangentialForm,
};
use crate::exec::Executor;
use crate::geometry::{BasePoint, GraphDefiningFunction};
use crate::henkin::cutoff::CutoffSpec;
use crate::henkin::forms::CutoffForm;
use crate::henkin::homotopy::{reference_targets, stencil};
use crate::henkin::operators::{boundary_job, interior_multi, Job, OperatorKind};
use crate::henkin::{BoundaryGrid, QuadratureSpec};
use crate::linalg::{identity, inverse, matmul, max_abs};
use crate::math::floor;
use crate::rng::derive;
use crate::{Error, Result, C64};
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Shrinking schedule `sigma_j = 2^{-j-1}`, `rho_{j+1} = (1 - sigma_j) rho_j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    pub rho_start: f64,
}

impl Schedule {
    pub fn sigma(&self, j: usize) -> f64 {
        let mut s = 0.5;
        for _ in 0..j.min(1100) {
            s *= 0.5;
        }
        s
    }

    pub fn rho(&self, j: usize) -> f64 {
        let mut r = self.rho_start;
        for i in 0..j {
            r *= 1.0 - self.sigma(i);
        }
        r
    }

    /// `lim rho_j`, about `0.2888 rho_start`.
    pub fn rho_limit(&self) -> f64 {
        self.rho(60)
    }

    /// Smallness required of `||omega_j||_0`: `sigma_j^s / (2 r C0)`, `s = 2(n-1)`.
    pub fn gate(&self, j: usize, n: usize, rank: usize, c0: f64) -> f64 {
        let s = self.sigma(j);
        let mut p = 1.0;
        for _ in 0..2 * (n - 1) {
            p *= s;
        }
        p / (2.0 * rank as f64 * c0)
    }
}

/// Values of a matrix field on a tensor grid over `[-half, half]^d`,
/// multilinearly interpolated (the query is clamped to the box). Nodes
/// outside the computed region carry the value of the nearest computed node.
#[derive(Clone, Debug)]
pub struct NodeGrid {
    d: usize,
    per_axis: usize,
    half: f64,
    width: usize,
    values: Vec<C64>,
}

impl NodeGrid {
    fn nodes(d: usize, per_axis: usize, half: f64) -> Vec<[f64; crate::MAX_D]> {
        let total = per_axis.pow(d as u32);
        let step = 2.0 * half / (per_axis - 1) as f64;
        (0..total)
            .map(|mut i| {
                let mut x = [0.0; crate::MAX_D];
                for xk in x.iter_mut().take(d) {
                    *xk = -half + (i % per_axis) as f64 * step;
                    i /= per_axis;
                }
                x
            })
            .collect()
    }

    /// Evaluates the interpolant.
    pub fn eval(&self, x: &[f64], out: &mut [C64]) {
        out[..self.width].iter_mut().for_each(|v| *v = ZERO);
        let step = 2.0 * self.half / (self.per_axis - 1) as f64;
        let mut base = 0usize;
        let mut stride = [0usize; crate::MAX_D];
        let mut frac = [0.0; crate::MAX_D];
        let mut s = 1;
        for k in 0..self.d {
            let t = ((x[k] + self.half) / step).clamp(0.0, (self.per_axis - 1) as f64);
            let i0 = (floor(t) as usize).min(self.per_axis - 2);
            frac[k] = t - i0 as f64;
            base += i0 * s;
            stride[k] = s;
            s *= self.per_axis;
        }
        for corner in 0..1usize << self.d {
            let mut w = 1.0;
            let mut idx = base;
            for k in 0..self.d {
                if corner >> k & 1 == 1 {
                    w *= frac[k];
                    idx += stride[k];
                } else {
                    w *= 1.0 - frac[k];
                }
                if w == 0.0 {
                    break;
                }
            }
            if w != 0.0 {
                for (o, v) in out
                    .iter_mut()
                    .zip(&self.values[idx * self.width..(idx + 1) * self.width])
                {
                    *o += *v * w;
                }
            }
        }
    }
}

enum Repr {
    Zero,
    Exact(Arc<dyn TangentialForm + Send + Sync>),
    Dilated {
        base: Arc<ConnectionForm>,
        delta: f64,
    },
    Step {
        prev: Arc<ConnectionForm>,
        b: NodeGrid,
        w: Option<NodeGrid>,
    },
}

/// A matrix-valued tangential `(0,1)`-form `omega`.
pub struct ConnectionForm {
    n: usize,
    rank: usize,
    support: Option<f64>,
    repr: Repr,
}

impl ConnectionForm {
    pub fn zero(n: usize, rank: usize) -> Self {
        ConnectionForm {
            n,
            rank,
            support: Some(0.0),
            repr: Repr::Zero,
        }
    }

    /// Wraps a closed-form `(0,1)`-form.
    pub fn exact(form: Arc<dyn TangentialForm + Send + Sync>) -> Result<Self> {
        if form.degree() != 1 {
            return Err(Error::Config(format!(
                "a connection is a (0,1)-form, got degree {}",
                form.degree()
            )));
        }
        Ok(ConnectionForm {
            n: form.n(),
            rank: form.rank(),
            support: form.support_radius(),
            repr: Repr::Exact(form),
        })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.repr, Repr::Zero)
    }

    /// Entries per point: `(n-1) r^2`.
    pub fn width(&self) -> usize {
        (self.n - 1) * self.rank * self.rank
    }
}

impl TangentialForm for ConnectionForm {
    fn n(&self) -> usize {
        self.n
    }
    fn degree(&self) -> usize {
        1
    }
    fn rank(&self) -> usize {
        self.rank
    }
    fn support_radius(&self) -> Option<f64> {
        self.support
    }
    fn eval(&self, x: &[f64], out: &mut [C64]) {
        match &self.repr {
            Repr::Zero => out.iter_mut().for_each(|v| *v = ZERO),
            Repr::Exact(f) => f.eval(x, out),
            Repr::Dilated { base, delta } => {
                let y = dilation_map(x, *delta);
                base.eval(&y[..x.len()], out);
                out.iter_mut().for_each(|v| *v *= *delta);
            }
            Repr::Step { prev, b, w } => {
                let r = self.rank;
                let r2 = r * r;
                let mut om = vec![ZERO; self.width()];
                prev.eval(x, &mut om);
                let mut bv = vec![ZERO; r2];
                b.eval(x, &mut bv);
                let mut wv = vec![ZERO; self.width()];
                if let Some(w) = w {
                    w.eval(x, &mut wv);
                }
                next_connection(&om, &bv, &wv, r, out);
            }
        }
    }
}

/// `(W_a + B omega_a)(I + B)^{-1}` for every index `a`.
fn next_connection(omega: &[C64], b: &[C64], w: &[C64], r: usize, out: &mut [C64]) {
    let r2 = r * r;
    let mut ib = identity(r);
    ib.iter_mut().zip(b).for_each(|(a, v)| *a += *v);
    let inv = match inverse(&ib, r) {
        Some(v) => v,
        None => {
            out.iter_mut()
                .for_each(|v| *v = C64::new(f64::NAN, f64::NAN));
            return;
        }
    };
    let mut t = vec![ZERO; r2];
    for a in 0..omega.len() / r2 {
        matmul(b, &omega[a * r2..(a + 1) * r2], r, &mut t);
        t.iter_mut()
            .zip(&w[a * r2..(a + 1) * r2])
            .for_each(|(x, y)| *x += *y);
        matmul(&t, &inv, r, &mut out[a * r2..(a + 1) * r2]);
    }
}

/// `T_delta(z', x^n) = (delta z', delta^2 x^n)`.
pub fn dilation_map(x: &[f64], delta: f64) -> [f64; crate::MAX_D] {
    let d = x.len();
    let mut y = [0.0; crate::MAX_D];
    for k in 0..d - 1 {
        y[k] = delta * x[k];
    }
    y[d - 1] = delta * delta * x[d - 1];
    y
}

/// The pair `(M^delta, omega^delta)` with `M^delta = T_delta^{-1} M` and
/// `omega^delta = delta (omega o T_delta)`, the pull-back of `omega`.
pub fn dilate(
    omega: Arc<ConnectionForm>,
    delta: f64,
    m: &GraphDefiningFunction,
) -> Result<(ConnectionForm, GraphDefiningFunction)> {
    if !(delta > 0.0 && delta <= 1.0) {
        // T_delta only maps D_rho of M^delta into D_rho of M for delta <= 1
        return Err(Error::OutOfDomain(format!(
            "dilation factor {delta} outside (0, 1]"
        )));
    }
    let md = GraphDefiningFunction::with_gate(m.n, m.rhat.dilated(delta), m.rho0, m.c0_gate)?;
    let support = omega.support.map(|s| s / (delta * delta));
    let (n, rank) = (omega.n, omega.rank);
    Ok((
        ConnectionForm {
            n,
            rank,
            support,
            repr: Repr::Dilated { base: omega, delta },
        },
        md,
    ))
}

/// `sup |dbar_M omega - omega ^ omega|` over `points`.
pub fn integrability_residual(
    omega: &dyn TangentialForm,
    points: &[BasePoint],
    m: &GraphDefiningFunction,
) -> Result<f64> {
    if omega.degree() != 1 {
        return Err(Error::Config(
            "integrability is a condition on (0,1)-forms".into(),
        ));
    }
    let mut worst: f64 = 0.0;
    for x in points {
        let dw = dbar_m(omega, x, m)?;
        let w = omega.value(x);
        let ww = wedge_forms(&w, &w)?;
        worst = worst.max(dw.sub(&ww).sup());
    }
    Ok(worst)
}

/// Pointwise `D = (I + B)^{-1} - I`.
#[derive(Clone, Debug)]
pub struct NeumannReport {
    pub d: Vec<Vec<C64>>,
    pub b_norm: f64,
    pub d_norm: f64,
    /// `||D||_0 / ||B||_0` (0 when `B = 0`); at most 2 under the precondition.
    pub ratio: f64,
}

/// Inverts `I + B` at every sample. Requires `||B||_0 <= 1/(2r)` so that
/// the Neumann series converges.
pub fn neumann_inverse(b: &[Vec<C64>], r: usize) -> Result<NeumannReport> {
    let b_norm = b.iter().map(|v| max_abs(v)).fold(0.0, f64::max);
    if b_norm > 0.5 / r as f64 {
        return Err(Error::Precondition(format!(
            "||B||_0 = {b_norm:.3e} exceeds 1/(2r) = {:.3e}",
            0.5 / r as f64
        )));
    }
    let mut d = Vec::with_capacity(b.len());
    for v in b {
        if v.len() != r * r {
            return Err(Error::RankMismatch(v.len(), r * r));
        }
        let mut ib = identity(r);
        ib.iter_mut().zip(v).for_each(|(a, x)| *a += *x);
        let mut inv = inverse(&ib, r).ok_or_else(|| Error::Singular("I + B".into()))?;
        for i in 0..r {
            inv[i * r + i] -= C64::new(1.0, 0.0);
        }
        d.push(inv);
    }
    let d_norm = d.iter().map(|v| max_abs(v)).fold(0.0, f64::max);
    let ratio = if b_norm == 0.0 { 0.0 } else { d_norm / b_norm };
    Ok(NeumannReport {
        d,
        b_norm,
        d_norm,
        ratio,
    })
}

/// `u = amp chi zbar^1` with `chi` the reference cutoff; `omega_0 =
/// -dbar_M u` has the exact solution `A = e^u` (scalar, rank 1).
pub struct Manufactured {
    pub u: CutoffForm,
    pub amp: f64,
}

impl Manufactured {
    pub fn new(m: &GraphDefiningFunction, amp: f64) -> Result<Self> {
        let sigma = 0.5;
        let spec = CutoffSpec::new(0.5 / (1.0 - sigma / 4.0), sigma)?;
        Ok(Manufactured {
            u: CutoffForm {
                m: m.clone(),
                cutoff: Some(spec),
                alpha: Some(0),
                index: 0,
            },
            amp,
        })
    }

    pub fn potential(&self, x: &[f64]) -> C64 {
        let mut v = [ZERO];
        self.u.eval(x, &mut v);
        v[0] * self.amp
    }
}

impl TangentialForm for Manufactured {
    fn n(&self) -> usize {
        self.u.m.n
    }
    fn degree(&self) -> usize {
        1
    }
    fn eval(&self, x: &[f64], out: &mut [C64]) {
        let v = dbar_m(&self.u, &BasePoint::new(x), &self.u.m).expect("dbar of the potential");
        for (o, c) in out.iter_mut().zip(&v.coeffs) {
            *o = -*c * self.amp;
        }
    }
    fn support_radius(&self) -> Option<f64> {
        self.u.support_radius()
    }
}

/// `omega ^ omega` as a `(0,2)`-form.
struct Square<'a>(&'a ConnectionForm);

impl TangentialForm for Square<'_> {
    fn n(&self) -> usize {
        self.0.n
    }
    fn degree(&self) -> usize {
        2
    }
    fn rank(&self) -> usize {
        self.0.rank
    }
    fn eval(&self, x: &[f64], out: &mut [C64]) {
        let mut w = FormValue::zero(self.0.n - 1, 1, self.0.rank);
        self.0.eval(x, &mut w.coeffs);
        let ww = wedge_forms(&w, &w).expect("same rank");
        out.copy_from_slice(&ww.coeffs);
    }
    fn support_radius(&self) -> Option<f64> {
        self.0.support
    }
}

/// Reference check points for `n >= 4` scaled into `D_{rho_start / 4}`,
/// inside every domain of the schedule.
pub fn default_check_points(n: usize, rho_start: f64) -> Result<Vec<BasePoint>> {
    if n < 4 {
        return Err(Error::Config("default check points need n >= 4".into()));
    }
    let d = 2 * n - 1;
    let s = 0.25 * rho_start / 0.4;
    Ok(reference_targets()
        .iter()
        .map(|t| {
            let mut x = vec![0.0; d];
            for k in 0..6 {
                x[k] = s * t.as_slice()[k];
            }
            x[d - 1] = s * t.as_slice()[6];
            BasePoint::new(&x)
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct KamOptions {
    pub rho_start: f64,
    pub max_steps: usize,
    /// Stop once `||omega_{j+1}||_0 <= tol`.
    pub tol: f64,
    pub quad: QuadratureSpec,
    /// Grid nodes per axis for the representation of `omega_{j+1}`.
    pub per_axis: usize,
    /// Stencil half-width; `None` means `1e-2 rho_infinity`.
    pub fd_step: Option<f64>,
    /// Search `delta in {1, 1/2, .., 2^-20}` until the first gate holds.
    pub dilation: bool,
    pub c0: f64,
    pub check_points: Vec<BasePoint>,
    /// Random points of `D_{rho_j}` added to the check points when taking
    /// sampled sups.
    pub norm_samples: usize,
}

impl KamOptions {
    pub fn new(n: usize, rho_start: f64) -> Result<Self> {
        Ok(KamOptions {
            rho_start,
            max_steps: 3,
            tol: 1e-6,
            quad: QuadratureSpec {
                samples: 200_000,
                ..QuadratureSpec::default()
            },
            per_axis: 5,
            fd_step: None,
            dilation: false,
            c0: crate::geometry::DEFAULT_C0_GATE,
            check_points: default_check_points(n, rho_start)?,
            norm_samples: 20_000,
        })
    }
}

/// Pointwise data of one step at the check points.
#[derive(Clone, Debug)]
pub struct StepReport {
    pub j: usize,
    pub sigma: f64,
    pub rho: f64,
    pub omega_norm: f64,
    pub gate: f64,
    pub gate_met: bool,
    /// `||B_j||_0` over check points and grid nodes.
    pub b_norm: f64,
    pub next_norm: f64,
    /// `||(I+B)^{-1} - I||_0 / ||B||_0`.
    pub neumann_ratio: f64,
    pub grid_nodes: usize,
    pub samples: u64,
    pub skipped: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// `||omega_{J+1}||_0 <= tol`.
    Converged,
    /// `max_steps` reached.
    Budget,
    /// No dilation met the first gate.
    GateNeverMet,
    /// `||B_j||_0 > 1/(2r)`.
    NeumannFailed,
}

#[derive(Clone, Debug)]
pub struct CheckPoint {
    pub x: BasePoint,
    /// `A = A_J ... A_0` (row-major).
    pub a: Vec<C64>,
    /// `max |dbar_M A + A omega_0|`.
    pub residual: f64,
    /// `max |dbar_M A + A omega_0 - omega_{J+1} A|`.
    pub telescoping: f64,
}

#[derive(Clone, Debug)]
pub struct KamReport {
    pub n: usize,
    pub rank: usize,
    pub delta: f64,
    pub outcome: Outcome,
    pub steps: Vec<StepReport>,
    pub omega0_norm: f64,
    pub final_norm: f64,
    pub checks: Vec<CheckPoint>,
    pub residual: f64,
    /// `residual / ||omega_0||_0` (0 when `omega_0 = 0`).
    pub rel_residual: f64,
    pub note: String,
}

/// Check-point state carried through the iteration.
pub struct IterationState {
    pub j: usize,
    pub rho: f64,
    pub omega: Arc<ConnectionForm>,
    /// Product `A` and `dbar_M A` per check point.
    pub a: Vec<Vec<C64>>,
    pub da: Vec<Vec<C64>>,
}

/// Output of [`kam_step`] at the check points.
pub struct StepData {
    pub b: Vec<Vec<C64>>,
    pub db: Vec<Vec<C64>>,
    pub next: Vec<Vec<C64>>,
    pub next_form: Option<ConnectionForm>,
    pub b_grid_sup: f64,
    /// `max |omega_{j+1}|` over the grid nodes.
    pub next_grid_sup: f64,
    pub grid_nodes: usize,
    pub samples: u64,
    pub skipped: u64,
}

fn sup_of(vals: &[Vec<C64>]) -> f64 {
    vals.iter().map(|v| max_abs(v)).fold(0.0, f64::max)
}

/// Applies `P'` (and `Q'` to `omega ^ omega` when `r > 1`) on `D_rho` at
/// `targets` with common random numbers; returns `-P' omega` and
/// `Q'(omega ^ omega)` per target.
#[allow(clippy::type_complexity)]
fn linear_pieces<E: Executor>(
    omega: &ConnectionForm,
    rho: f64,
    p_targets: &[BasePoint],
    q_targets: &[BasePoint],
    quad: &QuadratureSpec,
    m: &GraphDefiningFunction,
    exec: &E,
) -> Result<(Vec<Vec<C64>>, Vec<Vec<C64>>, u64, u64)> {
    let r2 = omega.rank * omega.rank;
    let e = omega.width();
    let sq = Square(omega);
    let mut jobs = vec![Job::new(omega, OperatorKind::P, p_targets, rho, m)?];
    if omega.rank > 1 && !q_targets.is_empty() {
        jobs.push(Job::new(&sq, OperatorKind::Q, q_targets, rho, m)?);
    }
    let total = p_targets.len() * r2
        + if jobs.len() > 1 {
            q_targets.len() * e
        } else {
            0
        };
    let est = interior_multi(m, rho, &jobs, quad, exec, total, |v, o| {
        o.copy_from_slice(v)
    })?;
    let grid = BoundaryGrid::new(m, rho, quad.boundary_res)?;
    let mut sum = est.mean;
    let mut off = 0;
    for job in &jobs {
        for v in boundary_job(m, &grid, job)? {
            for (s, b) in sum[off..off + v.len()].iter_mut().zip(&v) {
                *s += *b;
            }
            off += v.len();
        }
    }
    let b = (0..p_targets.len())
        .map(|t| sum[t * r2..(t + 1) * r2].iter().map(|v| -*v).collect())
        .collect();
    let q_off = p_targets.len() * r2;
    let w = (0..q_targets.len())
        .map(|t| {
            if jobs.len() > 1 {
                sum[q_off + t * e..q_off + (t + 1) * e].to_vec()
            } else {
                vec![ZERO; e]
            }
        })
        .collect();
    Ok((b, w, est.samples, est.skipped))
}

/// One step on `D_{rho_j}`: `B_j`, `dbar_M B_j` and `omega_{j+1}` at the
/// check points, and (if `build_grid`) the grid form of `omega_{j+1}` on
/// `D_{rho_{j+1}}`.
#[allow(clippy::too_many_arguments)]
pub fn kam_step<E: Executor>(
    omega: &Arc<ConnectionForm>,
    j: usize,
    schedule: &Schedule,
    checks: &[BasePoint],
    fd_step: f64,
    opts: &KamOptions,
    build_grid: bool,
    m: &GraphDefiningFunction,
    exec: &E,
) -> Result<StepData> {
    let (n, d, r) = (m.n, m.dim(), omega.rank);
    let r2 = r * r;
    let rho = schedule.rho(j);
    let nc = checks.len();
    let mut p_targets: Vec<BasePoint> = checks.to_vec();
    for x in checks {
        p_targets.extend(stencil(x, fd_step));
    }
    let quad = QuadratureSpec {
        seed: derive(opts.quad.seed, 2 * j as u64),
        ..opts.quad
    };
    let (bv, wv, mut samples, mut skipped) =
        linear_pieces(omega, rho, &p_targets, checks, &quad, m, exec)?;
    let mut b = Vec::with_capacity(nc);
    let mut db = Vec::with_capacity(nc);
    let mut next = Vec::with_capacity(nc);
    let mut grad = vec![ZERO; r2 * d];
    for (t, x) in checks.iter().enumerate() {
        for k in 0..d {
            let plus = &bv[nc + t * 2 * d + 2 * k];
            let minus = &bv[nc + t * 2 * d + 2 * k + 1];
            for c in 0..r2 {
                grad[c * d + k] = (plus[c] - minus[c]) / (2.0 * fd_step);
            }
        }
        let ratios = dbar_ratios(x, m)?;
        db.push(dbar_from_gradient(&grad, d, n, 0, r, &ratios).coeffs);
        let om = omega.value(x);
        let mut nx = vec![ZERO; omega.width()];
        next_connection(&om.coeffs, &bv[t], &wv[t], r, &mut nx);
        next.push(nx);
        b.push(bv[t].clone());
    }
    let mut out = StepData {
        b,
        db,
        next,
        next_form: None,
        b_grid_sup: 0.0,
        next_grid_sup: 0.0,
        grid_nodes: 0,
        samples,
        skipped,
    };
    if build_grid {
        let rho_next = schedule.rho(j + 1);
        let half = m.outer_radius(rho_next);
        let all = NodeGrid::nodes(d, opts.per_axis, half);
        let inside: Vec<usize> = (0..all.len())
            .filter(|&i| m.contains(&all[i][..d], rho_next))
            .collect();
        if inside.is_empty() {
            return Err(Error::Config(format!(
                "no grid node inside D_{rho_next}; raise per_axis"
            )));
        }
        let pts: Vec<BasePoint> = inside
            .iter()
            .map(|&i| BasePoint::new(&all[i][..d]))
            .collect();
        let gquad = QuadratureSpec {
            seed: derive(opts.quad.seed, 2 * j as u64 + 1),
            ..opts.quad
        };
        let (gb, gw, s2, k2) = linear_pieces(omega, rho, &pts, &pts, &gquad, m, exec)?;
        samples += s2;
        skipped += k2;
        out.b_grid_sup = sup_of(&gb);
        let e = omega.width();
        let mut nx = vec![ZERO; e];
        for (t, x) in pts.iter().enumerate() {
            let om = omega.value(x);
            next_connection(&om.coeffs, &gb[t], &gw[t], r, &mut nx);
            out.next_grid_sup = out.next_grid_sup.max(max_abs(&nx));
        }
        let mut nearest = vec![0usize; all.len()];
        for (i, x) in all.iter().enumerate() {
            let mut best = (f64::INFINITY, 0);
            for (c, &node) in inside.iter().enumerate() {
                let dd: f64 = (0..d)
                    .map(|k| (x[k] - all[node][k]) * (x[k] - all[node][k]))
                    .sum();
                if dd < best.0 {
                    best = (dd, c);
                }
            }
            nearest[i] = best.1;
        }
        let fill = |src: &[Vec<C64>], width: usize| -> NodeGrid {
            let mut values = Vec::with_capacity(all.len() * width);
            for &c in &nearest {
                values.extend_from_slice(&src[c]);
            }
            NodeGrid {
                d,
                per_axis: opts.per_axis,
                half,
                width,
                values,
            }
        };
        let bg = fill(&gb, r2);
        let wg = if r > 1 { Some(fill(&gw, e)) } else { None };
        let support = if r > 1 { None } else { omega.support };
        out.grid_nodes = inside.len();
        out.next_form = Some(ConnectionForm {
            n,
            rank: r,
            support,
            repr: Repr::Step {
                prev: omega.clone(),
                b: bg,
                w: wg,
            },
        });
    }
    out.samples = samples;
    out.skipped = skipped;
    Ok(out)
}

fn sup_at(omega: &dyn TangentialForm, points: &[BasePoint]) -> f64 {
    points
        .iter()
        .map(|x| omega.value(x).sup())
        .fold(0.0, f64::max)
}

/// `count` uniform points of `D_rho` by rejection from its bounding box.
pub fn domain_samples(
    m: &GraphDefiningFunction,
    rho: f64,
    count: usize,
    seed: u64,
) -> Vec<BasePoint> {
    let d = m.dim();
    let half = m.outer_radius(rho);
    let mut rng = crate::rng::SampleRng::new(seed, derive(seed, 0x6b61_6d), 0, 0);
    let mut out = Vec::with_capacity(count);
    let mut x = [0.0; crate::MAX_D];
    let mut tries = 0usize;
    while out.len() < count && tries < 10_000 * count.max(1) {
        tries += 1;
        for v in x.iter_mut().take(d) {
            *v = (2.0 * rng.uniform() - 1.0) * half;
        }
        if m.contains(&x[..d], rho) {
            out.push(BasePoint::new(&x[..d]));
        }
    }
    out
}

/// Sampled `||omega||_0` on `D_rho`: the check points plus random points.
pub fn sampled_norm(
    omega: &dyn TangentialForm,
    rho: f64,
    opts: &KamOptions,
    m: &GraphDefiningFunction,
) -> f64 {
    let pts = domain_samples(m, rho, opts.norm_samples, opts.quad.seed);
    sup_at(omega, &opts.check_points).max(sup_at(omega, &pts))
}

/// Runs the iteration from `omega_0` on `M`. Norms are sampled sups: over
/// the check points and random points of `D_{rho_j}` for every `omega_j`
/// with a representation, and over the check points and grid nodes for the
/// last `omega_{J+1}` (known only pointwise).
pub fn solve<E: Executor>(
    omega0: Arc<ConnectionForm>,
    m: &GraphDefiningFunction,
    opts: &KamOptions,
    exec: &E,
) -> Result<KamReport> {
    let (n, r) = (m.n, omega0.rank);
    if omega0.n != n {
        return Err(Error::Config(
            "connection and hypersurface dimensions differ".into(),
        ));
    }
    if opts.per_axis < 2 || opts.check_points.is_empty() {
        return Err(Error::Config(
            "need per_axis >= 2 and at least one check point".into(),
        ));
    }
    let schedule = Schedule {
        rho_start: opts.rho_start,
    };
    let rho_inf = schedule.rho_limit();
    let fd_step = opts.fd_step.unwrap_or(1e-2 * rho_inf);
    let last = schedule.rho(opts.max_steps);
    for x in &opts.check_points {
        for y in core::iter::once(*x).chain(stencil(x, fd_step)) {
            if !m.contains(y.as_slice(), last) {
                return Err(Error::OutOfDomain(format!(
                    "check point {:?} leaves D_{last}",
                    y.as_slice()
                )));
            }
        }
    }
    let checks = &opts.check_points;
    let id = identity(r);
    let e = omega0.width();
    let mut report = KamReport {
        n,
        rank: r,
        delta: 1.0,
        outcome: Outcome::Converged,
        steps: Vec::new(),
        omega0_norm: 0.0,
        final_norm: 0.0,
        checks: Vec::new(),
        residual: 0.0,
        rel_residual: 0.0,
        note: String::new(),
    };
    let norm0 = if omega0.is_zero() {
        0.0
    } else {
        sampled_norm(omega0.as_ref(), opts.rho_start, opts, m)
    };
    if norm0 == 0.0 {
        report.checks = checks
            .iter()
            .map(|x| CheckPoint {
                x: *x,
                a: id.clone(),
                residual: 0.0,
                telescoping: 0.0,
            })
            .collect();
        return Ok(report);
    }
    let (mut omega, mdil) = if opts.dilation {
        let mut found = None;
        let mut delta = 1.0;
        for _ in 0..=20 {
            let (w, md) = dilate(omega0.clone(), delta, m)?;
            if sampled_norm(&w, opts.rho_start, opts, &md) <= schedule.gate(0, n, r, opts.c0) {
                found = Some((w, md));
                break;
            }
            delta *= 0.5;
        }
        match found {
            Some((w, md)) => {
                report.delta = delta;
                (Arc::new(w), md)
            }
            None => {
                report.outcome = Outcome::GateNeverMet;
                report.omega0_norm = norm0;
                report.final_norm = norm0;
                report.note = "no dilation down to 2^-20 met the first gate".into();
                return Ok(report);
            }
        }
    } else {
        (omega0.clone(), m.clone())
    };
    let m = &mdil;
    let base = omega.clone();
    let omega0_vals: Vec<FormValue> = checks.iter().map(|x| base.value(x)).collect();
    report.omega0_norm = sampled_norm(base.as_ref(), opts.rho_start, opts, m);
    let mut state = IterationState {
        j: 0,
        rho: opts.rho_start,
        omega: omega.clone(),
        a: vec![id.clone(); checks.len()],
        da: vec![vec![ZERO; e]; checks.len()],
    };
    let mut next_vals: Vec<Vec<C64>> = omega0_vals.iter().map(|v| v.coeffs.clone()).collect();
    report.outcome = Outcome::Budget;
    let mut norm = report.omega0_norm;
    for j in 0..opts.max_steps {
        let gate = schedule.gate(j, n, r, opts.c0);
        let build = j + 1 < opts.max_steps;
        let step = kam_step(&omega, j, &schedule, checks, fd_step, opts, build, m, exec)?;
        let b_norm = sup_of(&step.b).max(step.b_grid_sup);
        let neumann = if b_norm <= 0.5 / r as f64 {
            Some(neumann_inverse(&step.b, r)?)
        } else {
            None
        };
        let mut next_norm = sup_of(&step.next).max(step.next_grid_sup);
        if let Some(f) = &step.next_form {
            next_norm = next_norm.max(sampled_norm(f, schedule.rho(j + 1), opts, m));
        }
        report.steps.push(StepReport {
            j,
            sigma: schedule.sigma(j),
            rho: schedule.rho(j),
            omega_norm: norm,
            gate,
            gate_met: norm <= gate,
            b_norm,
            next_norm,
            neumann_ratio: neumann.as_ref().map_or(f64::NAN, |v| v.ratio),
            grid_nodes: step.grid_nodes,
            samples: step.samples,
            skipped: step.skipped,
        });
        if neumann.is_none() {
            report.outcome = Outcome::NeumannFailed;
            report.note = format!("step {j}: ||B||_0 = {b_norm:.3e} exceeds 1/(2r)");
            break;
        }
        // A <- (I + B_j) A,  dbar A <- dbar B_j A + (I + B_j) dbar A
        let mut t = vec![ZERO; r * r];
        for c in 0..checks.len() {
            let mut aj = id.clone();
            aj.iter_mut().zip(&step.b[c]).for_each(|(a, v)| *a += *v);
            let mut da = vec![ZERO; e];
            for k in 0..n - 1 {
                let blk = k * r * r..(k + 1) * r * r;
                matmul(&step.db[c][blk.clone()], &state.a[c], r, &mut t);
                da[blk.clone()].copy_from_slice(&t);
                matmul(&aj, &state.da[c][blk.clone()], r, &mut t);
                da[blk].iter_mut().zip(&t).for_each(|(a, v)| *a += *v);
            }
            matmul(&aj, &state.a[c], r, &mut t);
            state.a[c].copy_from_slice(&t);
            state.da[c] = da;
        }
        next_vals = step.next;
        norm = next_norm;
        state.j = j + 1;
        state.rho = schedule.rho(j + 1);
        if norm <= opts.tol {
            report.outcome = Outcome::Converged;
            break;
        }
        match step.next_form {
            Some(f) => {
                omega = Arc::new(f);
                state.omega = omega.clone();
            }
            None => break,
        }
    }
    report.final_norm = norm;
    let mut t = vec![ZERO; r * r];
    for (c, x) in checks.iter().enumerate() {
        let (mut res, mut tel): (f64, f64) = (0.0, 0.0);
        for k in 0..n - 1 {
            let blk = k * r * r..(k + 1) * r * r;
            matmul(&state.a[c], &omega0_vals[c].coeffs[blk.clone()], r, &mut t);
            let rk: Vec<C64> = state.da[c][blk.clone()]
                .iter()
                .zip(&t)
                .map(|(a, b)| *a + *b)
                .collect();
            res = res.max(max_abs(&rk));
            matmul(&next_vals[c][blk], &state.a[c], r, &mut t);
            tel = tel.max(
                rk.iter()
                    .zip(&t)
                    .fold(0.0, |s, (a, b)| s.max((*a - *b).norm())),
            );
        }
        report.residual = report.residual.max(res);
        report.checks.push(CheckPoint {
            x: *x,
            a: state.a[c].clone(),
            residual: res,
            telescoping: tel,
        });
    }
    report.rel_residual = report.residual / report.omega0_norm;
    Ok(report)
}

/// One KAM step for each amplitude of the manufactured connection; returns
/// `(||omega_0||_0, ||omega_1||_0)` and the log-log slope of the pairs.
pub fn amplitude_sweep<E: Executor>(
    amps: &[f64],
    m: &GraphDefiningFunction,
    opts: &KamOptions,
    exec: &E,
) -> Result<(Vec<(f64, f64)>, f64)> {
    if amps.len() < 2 {
        return Err(Error::Config("need at least two amplitudes".into()));
    }
    let mut pairs = Vec::with_capacity(amps.len());
    for &a in amps {
        let w = Arc::new(ConnectionForm::exact(Arc::new(Manufactured::new(m, a)?))?);
        let o = KamOptions {
            max_steps: 1,
            tol: 0.0,
            ..opts.clone()
        };
        let rep = solve(w, m, &o, exec)?;
        pairs.push((rep.omega0_norm, rep.final_norm));
    }
    let xs: Vec<f64> = pairs.iter().map(|p| crate::math::ln(p.0)).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| crate::math::ln(p.1)).collect();
    Ok((pairs, crate::math::ls_slope(&xs, &ys)))
}

/// Indices `(0,1)`-forms use, for callers building closed-form connections.
pub fn connection_indices(n: usize) -> Vec<u32> {
    multi_indices(n - 1, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crcalc::ClosureForm;
    use crate::exec::Sequential;
    use crate::geometry::Rhat;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    type Fx = fn(&[f64], &mut [C64]);

    #[test]
    fn schedule_values() {
        let s = Schedule { rho_start: 1.0 };
        assert_eq!(s.sigma(0), 0.5);
        assert_eq!(s.sigma(2), 0.125);
        assert!((s.rho(2) - 0.375).abs() < 1e-15);
        assert!((s.rho_limit() - 0.288_788_095).abs() < 1e-6);
        assert!((s.gate(0, 4, 1, 100.0) - 1.0 / 64.0 / 200.0).abs() < 1e-18);
    }

    #[test]
    fn grid_interpolation_is_exact_for_multilinear_fields() {
        let (d, per_axis, half) = (3, 4, 1.0);
        let f = |x: &[f64]| c(1.0 + x[0] * x[1] - 2.0 * x[2], x[0] * x[1] * x[2]);
        let values = NodeGrid::nodes(d, per_axis, half)
            .iter()
            .map(|x| f(&x[..d]))
            .collect();
        let g = NodeGrid {
            d,
            per_axis,
            half,
            width: 1,
            values,
        };
        let mut out = [ZERO];
        for x in [[0.1, -0.3, 0.7], [0.99, 0.5, -0.2], [-1.0, 1.0, 0.0]] {
            g.eval(&x, &mut out);
            assert!((out[0] - f(&x)).norm() < 1e-13, "{x:?}");
        }
        // clamped outside the box
        g.eval(&[2.0, 0.0, 0.0], &mut out);
        assert!((out[0] - f(&[1.0, 0.0, 0.0])).norm() < 1e-13);
    }

    #[test]
    fn neumann_examples() {
        let mut b = vec![ZERO; 4];
        b[1] = c(0.1, 0.0);
        let rep = neumann_inverse(&[b.clone()], 2).unwrap();
        for (dv, bv) in rep.d[0].iter().zip(&b) {
            assert!((*dv + *bv).norm() < 1e-15);
        }
        let rep = neumann_inverse(&[vec![ZERO; 4]], 2).unwrap();
        assert_eq!(rep.d_norm, 0.0);
        let mut rng = crate::rng::SampleRng::new(3, 0, 0, 0);
        let r = 3;
        let mut bs = Vec::new();
        for _ in 0..50 {
            let mut v: Vec<C64> = (0..r * r)
                .map(|_| c(rng.uniform() - 0.5, rng.uniform() - 0.5))
                .collect();
            let s = max_abs(&v);
            v.iter_mut().for_each(|x| *x *= 0.25 / r as f64 / s);
            bs.push(v);
        }
        let rep = neumann_inverse(&bs, r).unwrap();
        assert!(rep.ratio <= 2.0 * r as f64, "{}", rep.ratio);
        let big = vec![c(1.0, 0.0); 4];
        assert!(matches!(
            neumann_inverse(&[big], 2),
            Err(Error::Precondition(_))
        ));
    }

    fn quartic(n: usize) -> GraphDefiningFunction {
        GraphDefiningFunction::new(n, Rhat::quartic(0.01, 1.0), 1.0).unwrap()
    }

    #[test]
    fn dilation_pulls_back_dbar() {
        // dbar_{M^delta}(u o T_delta) = dilate(dbar_M u)
        for m in [
            quartic(3),
            GraphDefiningFunction::new(3, Rhat::trig(0.005), 1.0).unwrap(),
        ] {
            let u: Fx = |x, o| o[0] = c(x[0] * x[4] + x[2] * x[2], x[1] - x[3] * x[4]);
            let delta = 0.3;
            let du = dbar_m(
                &ClosureForm {
                    n: 3,
                    q: 0,
                    rank: 1,
                    f: u,
                    g: None::<Fx>,
                    support: None,
                },
                &BasePoint::origin(3),
                &m,
            )
            .unwrap();
            assert_eq!(du.coeffs.len(), 2);
            let mm = m.clone();
            let form = ClosureForm {
                n: 3,
                q: 1,
                rank: 1,
                f: move |x: &[f64], o: &mut [C64]| {
                    let v = dbar_m(
                        &ClosureForm {
                            n: 3,
                            q: 0,
                            rank: 1,
                            f: u,
                            g: None::<Fx>,
                            support: None,
                        },
                        &BasePoint::new(x),
                        &mm,
                    )
                    .unwrap();
                    o.copy_from_slice(&v.coeffs);
                },
                g: None::<Fx>,
                support: None,
            };
            let omega = Arc::new(ConnectionForm::exact(Arc::new(form)).unwrap());
            let (wd, md) = dilate(omega, delta, &m).unwrap();
            let ud = ClosureForm {
                n: 3,
                q: 0,
                rank: 1,
                f: move |x: &[f64], o: &mut [C64]| u(&dilation_map(x, delta)[..5], o),
                g: None::<Fx>,
                support: None,
            };
            let ud_sqrt = ClosureForm {
                n: 3,
                q: 0,
                rank: 1,
                f: move |x: &[f64], o: &mut [C64]| {
                    let mut y = dilation_map(x, delta);
                    y[..5]
                        .iter_mut()
                        .for_each(|v| *v = *v * crate::math::sqrt(delta) / delta);
                    u(&y[..5], o)
                },
                g: None::<Fx>,
                support: None,
            };
            let mut worst_sqrt: f64 = 0.0;
            for x in [[0.3, -0.2, 0.1, 0.4, -0.5], [0.0, 0.6, -0.3, 0.2, 0.3]] {
                let x = BasePoint::new(&x);
                let lhs = dbar_m(&ud, &x, &md).unwrap();
                let rhs = wd.value(&x);
                assert!(
                    lhs.sub(&rhs).sup() < 1e-7,
                    "{:?} vs {:?}",
                    lhs.coeffs,
                    rhs.coeffs
                );
                worst_sqrt = worst_sqrt.max(dbar_m(&ud_sqrt, &x, &md).unwrap().sub(&rhs).sup());
            }
            assert!(worst_sqrt > 1e-3);
        }
    }

    #[test]
    fn dilation_rejects_expansion() {
        let m = quartic(3);
        let w = Arc::new(ConnectionForm::zero(3, 1));
        assert!(matches!(
            dilate(w.clone(), 2.0, &m),
            Err(Error::OutOfDomain(_))
        ));
        assert!(dilate(w, 0.0, &m).is_err());
    }

    #[test]
    fn integrability_of_examples() {
        let m = quartic(4);
        let pts = default_check_points(4, 0.55).unwrap();
        let man = Manufactured::new(&m, 0.1).unwrap();
        assert!(integrability_residual(&man, &pts, &m).unwrap() < 1e-6);
        // E_12 x^1 dzbar^2: dbar is nonzero, omega ^ omega = 0
        let bad = ClosureForm {
            n: 4,
            q: 1,
            rank: 2,
            f: |x: &[f64], o: &mut [C64]| {
                o.iter_mut().for_each(|v| *v = ZERO);
                o[4 + 1] = c(x[0], 0.0);
            },
            g: None::<Fx>,
            support: None,
        };
        assert!(integrability_residual(&bad, &pts, &m).unwrap() > 0.1);
    }

    #[test]
    fn manufactured_connection_is_constant_near_the_origin() {
        let m = GraphDefiningFunction::quadric(4);
        let man = Manufactured::new(&m, 0.05).unwrap();
        for x in default_check_points(4, 0.55).unwrap() {
            let v = man.value(&x);
            assert!((v.coeffs[0] + 0.05).norm() < 1e-12 && v.coeffs[1].norm() < 1e-12);
            assert!((man.potential(x.as_slice()) - x.z(0).conj() * 0.05).norm() < 1e-14);
        }
    }

    fn small_opts(samples: usize) -> KamOptions {
        let mut o = KamOptions::new(4, 0.55).unwrap();
        o.quad = QuadratureSpec {
            samples,
            strata: 4,
            seed: 11,
            boundary_res: 2,
        };
        o.check_points.truncate(2);
        o
    }

    #[test]
    fn zero_connection_needs_no_step() {
        let m = GraphDefiningFunction::quadric(4);
        let rep = solve(
            Arc::new(ConnectionForm::zero(4, 2)),
            &m,
            &small_opts(100),
            &Sequential,
        )
        .unwrap();
        assert!(rep.steps.is_empty());
        assert_eq!(rep.outcome, Outcome::Converged);
        assert_eq!(rep.checks[0].a, identity(2));
    }

    #[test]
    fn step_is_quadratic_in_the_amplitude_and_deterministic() {
        let m = GraphDefiningFunction::quadric(4);
        let o = small_opts(2000);
        let (pairs, slope) = amplitude_sweep(&[0.1, 0.05], &m, &o, &Sequential).unwrap();
        assert!(pairs[0].0 > 0.1 && (pairs[0].0 / pairs[1].0 - 2.0).abs() < 1e-12);
        assert!(slope > 1.8, "{slope} {pairs:?}");
        let (again, _) = amplitude_sweep(&[0.1, 0.05], &m, &o, &Sequential).unwrap();
        assert_eq!(pairs, again);
    }

    #[test]
    fn frame_change_by_a_constant_conjugates_the_step() {
        let m = GraphDefiningFunction::quadric(4);
        let g = [c(1.0, 0.2), c(0.3, 0.0), c(-0.1, 0.4), c(0.9, 0.0)];
        let gi = inverse(&g, 2).unwrap();
        let gic = gi.clone();
        let base = |x: &[f64], o: &mut [C64]| {
            let chi = if x.iter().map(|t| t * t).sum::<f64>() < 0.25 {
                1.0
            } else {
                0.0
            };
            for a in 0..3 {
                o[4 * a] = c(0.02 * x[0], 0.0) * chi;
                o[4 * a + 1] = c(0.01, 0.01 * x[a]) * chi;
                o[4 * a + 2] = c(-0.015 * x[6], 0.0) * chi;
                o[4 * a + 3] = c(0.0, 0.02 * x[1]) * chi;
            }
        };
        let conj = move |x: &[f64], o: &mut [C64]| {
            let mut w = [ZERO; 12];
            base(x, &mut w);
            let mut t = [ZERO; 4];
            for a in 0..3 {
                matmul(&g, &w[4 * a..4 * a + 4], 2, &mut t);
                matmul(&t, &gic, 2, &mut o[4 * a..4 * a + 4]);
            }
        };
        let w0 = Arc::new(
            ConnectionForm::exact(Arc::new(ClosureForm {
                n: 4,
                q: 1,
                rank: 2,
                f: base,
                g: None::<Fx>,
                support: None,
            }))
            .unwrap(),
        );
        let w1 = Arc::new(
            ConnectionForm::exact(Arc::new(ClosureForm {
                n: 4,
                q: 1,
                rank: 2,
                f: conj,
                g: None::<Fx>,
                support: None,
            }))
            .unwrap(),
        );
        let o = small_opts(1000);
        let s = Schedule { rho_start: 0.55 };
        let a = kam_step(
            &w0,
            0,
            &s,
            &o.check_points,
            1e-3,
            &o,
            false,
            &m,
            &Sequential,
        )
        .unwrap();
        let b = kam_step(
            &w1,
            0,
            &s,
            &o.check_points,
            1e-3,
            &o,
            false,
            &m,
            &Sequential,
        )
        .unwrap();
        let mut t = [ZERO; 4];
        let mut u = [ZERO; 4];
        for cpt in 0..o.check_points.len() {
            for k in 0..3 {
                matmul(&g, &a.next[cpt][4 * k..4 * k + 4], 2, &mut t);
                matmul(&t, &gi, 2, &mut u);
                let dev = u
                    .iter()
                    .zip(&b.next[cpt][4 * k..4 * k + 4])
                    .fold(0.0f64, |s, (p, q)| s.max((*p - *q).norm()));
                assert!(dev < 1e-12, "{dev}");
            }
        }
        assert!(sup_of(&a.next) > 0.0);
    }

    #[test]
    fn check_points_must_stay_inside() {
        let m = GraphDefiningFunction::quadric(4);
        let mut o = small_opts(100);
        o.check_points = vec![BasePoint::new(&[0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])];
        let w =
            Arc::new(ConnectionForm::exact(Arc::new(Manufactured::new(&m, 0.1).unwrap())).unwrap());
        assert!(matches!(
            solve(w, &m, &o, &Sequential),
            Err(Error::OutOfDomain(_))
        ));
    }
}
