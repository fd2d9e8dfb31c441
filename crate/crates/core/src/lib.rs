//! Numerical verification kit for the prescribed Q-curvature equation on
//! closed four-manifolds.

pub mod bubble;
pub mod cnc;
pub mod curvature;
pub mod field;
pub mod geodesic;
pub mod harness;
pub mod pohozaev;
pub mod potential;
pub mod jet;
pub mod quadrature;
pub mod stats;

pub use field::{AnalyticMetric, AnalyticScalar, BoxDomain, DerivativeSource, FieldError, MetricField, Point, SampledMetric, SampledScalar, ScalarField};
pub use jet::Jet;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
