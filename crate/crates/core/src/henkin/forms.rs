//! Explicit test forms with exact derivatives.

use super::cutoff::{cutoff_jet, CutoffSpec};
use crate::crcalc::{index_of, multi_indices, TangentialForm};
use crate::geometry::GraphDefiningFunction;
use crate::{C64, MAX_D};

/// `chi(x) zbar^alpha dzbar^J` (or `chi(x) dzbar^J` when `alpha` is `None`).
#[derive(Clone, Debug)]
pub struct CutoffForm {
    pub m: GraphDefiningFunction,
    pub cutoff: Option<CutoffSpec>,
    pub alpha: Option<usize>,
    /// Index mask over `dzbar^1..dzbar^{n-1}`.
    pub index: u32,
}

impl CutoffForm {
    fn slot(&self) -> usize {
        let idx = multi_indices(self.m.n - 1, self.index.count_ones() as usize);
        index_of(&idx, self.index).expect("valid index")
    }

    fn poly(&self, x: &[f64]) -> (C64, [C64; MAX_D]) {
        let mut g = [C64::new(0.0, 0.0); MAX_D];
        match self.alpha {
            None => (C64::new(1.0, 0.0), g),
            Some(a) => {
                g[2 * a] = C64::new(1.0, 0.0);
                g[2 * a + 1] = C64::new(0.0, -1.0);
                (C64::new(x[2 * a], -x[2 * a + 1]), g)
            }
        }
    }
}

impl TangentialForm for CutoffForm {
    fn n(&self) -> usize {
        self.m.n
    }
    fn degree(&self) -> usize {
        self.index.count_ones() as usize
    }
    fn eval(&self, x: &[f64], out: &mut [C64]) {
        out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        let chi = match &self.cutoff {
            Some(c) => super::cutoff::cutoff(c, x, &self.m),
            None => 1.0,
        };
        if chi != 0.0 {
            out[self.slot()] = self.poly(x).0 * chi;
        }
    }
    fn eval_gradient(&self, x: &[f64], out: &mut [C64]) -> bool {
        let d = x.len();
        out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        let (chi, dchi) = match &self.cutoff {
            Some(c) => {
                let (v, g, _) = cutoff_jet(c, x, &self.m);
                (v, g)
            }
            None => (1.0, [0.0; MAX_D]),
        };
        let (pv, pg) = self.poly(x);
        let s = self.slot();
        for k in 0..d {
            out[s * d + k] = pg[k] * chi + pv * dchi[k];
        }
        true
    }
    fn support_radius(&self) -> Option<f64> {
        self.cutoff.as_ref().map(|c| self.m.outer_radius(c.outer()))
    }
}
