//! Sharp and fuzzy regression-discontinuity estimation with one and two
//! running variables.
//!
//! Beyond the classic dimensionality-reduction estimators (centering,
//! conditional/univariate, multi-cutoff), the crate estimates treatment
//! effects *along* the boundary induced by a bivariate assignment rule,
//! three ways:
//!
//! - a flexible percentile-grid sweep of univariate local linear RD fits
//!   with per-point bandwidths ([`boundary::flexible_boundary_curve`]),
//! - a 16-parameter full-interaction surface whose plane discontinuities
//!   give effects affine in boundary position ([`boundary::papay_fit`]),
//! - bivariate local linear fits of treated/control surfaces at boundary
//!   points with a fixed bandwidth pair ([`boundary::zajonc_point`]).
//!
//! A seeded synthetic data generator with closed-form treatment functions
//! ([`dgp`]) serves as the ground-truth oracle for all of it.

pub mod bandwidth;
pub mod boundary;
pub mod classic;
pub mod data;
pub mod dgp;
pub mod discontinuity;
pub mod error;
pub mod estimate;
pub mod kernel;
pub mod local;
pub mod wls;

pub use bandwidth::{select_bandwidth, BandwidthPair, BandwidthRule};
pub use data::{eligibility, validate_and_normalize, AssignmentRule, CutoffSpec, Dataset, Direction};
pub use discontinuity::{fuzzy_discontinuity, sharp_discontinuity};
pub use error::{Error, Result, Side};
pub use estimate::{BoundaryCurve, BoundaryGrid, BoundaryId, EstimateKind, RdEstimate};
pub use kernel::{kernel_weight, KernelKind};
pub use local::{local_linear_side, LocalFit, PolyOrder};
