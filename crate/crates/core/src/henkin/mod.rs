//! Henkin-type solution operators on the strongly pseudoconvex hypersurface
//! and the homotopy identity they satisfy.

pub mod boundary;
pub mod cutoff;
pub mod dense;
pub mod forms;
pub mod homotopy;
pub mod kernel;
pub mod omega;
pub mod operators;
pub mod regularity;
pub mod sampler;
pub mod transform;

pub use boundary::BoundaryGrid;
pub use cutoff::{cutoff, CutoffSpec};
pub use homotopy::{
    calibrate_constant, fit_constant, homotopy_residual, Calibration, HomotopyReport,
};
pub use kernel::{kernel_point_data, KernelPointData};
pub use omega::{c0, normalization, omega_value, stated_normalization, KernelEngine, Variant};
pub use operators::{
    apply_boundary, apply_interior, apply_operator, OperatorEstimate, OperatorKind,
};
pub use regularity::{holder_proxy, HolderProxyReport};
pub use sampler::{Estimate, QuadratureSpec};
pub use transform::{heisenberg_forward, heisenberg_inverse};
