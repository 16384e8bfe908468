//! Tensor quadrature on `partial D_rho`: Gauss-Legendre in the polar angles
//! and the trapezoid rule in the azimuth. Nodes, surface minors and weights
//! depend only on `(M, rho, res)` and are shared by all targets.

use crate::geometry::GraphDefiningFunction;
use crate::quadrature::gauss_legendre;
use crate::{Error, Result, MAX_D};
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[derive(Clone, Copy, Debug)]
pub struct BoundaryNode {
    pub x: [f64; MAX_D],
    /// Oriented minors times the quadrature weight.
    pub wm: [f64; MAX_D],
}

#[derive(Clone, Debug)]
pub struct BoundaryGrid {
    pub rho: f64,
    pub res: usize,
    pub d: usize,
    pub nodes: Vec<BoundaryNode>,
}

impl BoundaryGrid {
    pub fn new(m: &GraphDefiningFunction, rho: f64, res: usize) -> Result<Self> {
        let d = m.dim();
        if res < 2 {
            return Err(Error::Config(format!("boundary resolution {res} < 2")));
        }
        if !(rho > 0.0 && rho <= m.rho0) {
            return Err(Error::OutOfDomain(format!("rho = {rho} outside (0, rho0]")));
        }
        let (gx, gw) = gauss_legendre(res);
        let polar: Vec<(f64, f64)> = gx
            .iter()
            .zip(&gw)
            .map(|(x, w)| (0.5 * PI * (x + 1.0), 0.5 * PI * w))
            .collect();
        let naz = 2 * res;
        let daz = 2.0 * PI / naz as f64;
        let np = d - 2;
        let total = res.pow(np as u32) * naz;
        let mut nodes = Vec::with_capacity(total);
        let mut digits = [0usize; MAX_D];
        for flat in 0..total {
            let mut rem = flat;
            for dg in digits.iter_mut().take(np + 1) {
                *dg = 0;
            }
            for dg in digits.iter_mut().take(np) {
                *dg = rem % res;
                rem /= res;
            }
            let az = rem;
            let mut angles = [0.0; MAX_D];
            let mut w = daz;
            for i in 0..np {
                angles[i] = polar[digits[i]].0;
                w *= polar[digits[i]].1;
            }
            angles[np] = (az as f64 + 0.5) * daz;
            let bp = m.boundary_parametrize(rho, &angles[..d - 1])?;
            let minors = bp.surface_minors();
            let mut node = BoundaryNode {
                x: [0.0; MAX_D],
                wm: [0.0; MAX_D],
            };
            node.x[..d].copy_from_slice(bp.x.as_slice());
            for k in 0..d {
                node.wm[k] = w * minors[k];
            }
            nodes.push(node);
        }
        Ok(BoundaryGrid { rho, res, d, nodes })
    }

    /// `int_{partial D} f dS`-style check: integrates the pullback of the
    /// `(d-1)`-form `sum_k c_k(x) dxi_{[d] minus k}`.
    pub fn integrate_form<F: Fn(&[f64], &mut [f64])>(&self, f: F) -> f64 {
        let mut c = [0.0; MAX_D];
        let mut acc = 0.0;
        for node in &self.nodes {
            f(&node.x[..self.d], &mut c[..self.d]);
            acc += (0..self.d).map(|k| c[k] * node.wm[k]).sum::<f64>();
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rhat;

    /// Divergence theorem: for `omega = sum_k (-1)^k x_k dxi_{[d] minus k}`,
    /// `d omega = d dV`, so the boundary integral is `d vol(D_rho)`.
    #[test]
    fn stokes_on_ball() {
        let m = GraphDefiningFunction::quadric(2);
        let g = BoundaryGrid::new(&m, 0.7, 8).unwrap();
        let v = g.integrate_form(|x, c| {
            for k in 0..3 {
                c[k] = if k % 2 == 0 { x[k] } else { -x[k] };
            }
        });
        let exact = 3.0 * 4.0 / 3.0 * PI * 0.7f64.powi(3);
        assert!((v - exact).abs() < 1e-10 * exact, "{v} vs {exact}");
    }

    #[test]
    fn stokes_on_perturbed_domain_converges() {
        let m = GraphDefiningFunction::new(2, Rhat::quartic(0.01, 1.0), 1.0).unwrap();
        let form = |x: &[f64], c: &mut [f64]| {
            for k in 0..3 {
                c[k] = if k % 2 == 0 { x[k] } else { -x[k] };
            }
        };
        let a = BoundaryGrid::new(&m, 0.8, 8).unwrap().integrate_form(form);
        let b = BoundaryGrid::new(&m, 0.8, 16).unwrap().integrate_form(form);
        assert!((a - b).abs() < 1e-6 * b.abs(), "{a} vs {b}");
    }
}
