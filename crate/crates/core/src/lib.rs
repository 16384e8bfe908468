//! Numerical laboratory for the local homotopy formula of the tangential
//! Cauchy-Riemann operator on strongly pseudoconvex graph hypersurfaces
//!
//! ```text
//! M : r(z) = -y^n + |z'|^2 + rhat(x) = 0,   x = (z', x^n) in R^{2n-1}
//! ```
//!
//! The crate is `no_std` (with `alloc`). Anything that needs threads, files
//! or a command line lives in the companion `henkin-lab` crate; parallel
//! work is expressed through the [`exec::Executor`] trait so that callers
//! can plug in a thread pool while results stay bit-identical.
//!
//! Module map:
//!
//! * [`geometry`]: the hypersurface, its Wirtinger derivatives, the domains
//!   `D_rho` and their boundary parametrization.
//! * [`exterior`]: sparse complex exterior algebra used to evaluate kernels.
//! * [`crcalc`]: tangential `(0,q)`-forms, `dbar_M`, wedge products and the
//!   tangential projection.
//! * [`henkin`]: kernels, the approximate Heisenberg transformation, the
//!   operators `P'`, `Q'` and the homotopy residual.
//! * [`normlab`]: empirical Holder norms and interpolation inequalities.
//! * [`bounds`]: integral bounds with quadrature oracles and sampling
//!   reports for the geometric lemmas.
//! * [`kam`]: rapid iteration for `dbar_M A = -A omega`.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bounds;
pub mod crcalc;
pub mod error;
pub mod exec;
pub mod exterior;
pub mod geometry;
pub mod henkin;
pub mod kam;
pub mod linalg;
pub mod math;
pub mod normlab;
pub mod quadrature;
pub mod rng;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Largest complex dimension supported by the fixed-size point types.
pub const MAX_N: usize = 6;
/// Largest real dimension `2n - 1` of the base domain.
pub const MAX_D: usize = 2 * MAX_N - 1;
