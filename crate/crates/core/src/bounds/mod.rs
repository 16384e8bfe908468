//! Integral bounds near the model singularity and sampling checks of the
//! geometric estimates behind the kernels.

pub mod outl;
pub mod reports;

pub use outl::{outl_bound, outl_oracle, OutlBound, OutlCase, OutlQuadrature, Regime, Region};
pub use reports::{quasi_distance_report, transform_report, QuasiDistanceReport, TransformReport};
