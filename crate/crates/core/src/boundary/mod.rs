//! Boundary-effect estimators: the flexible percentile-grid sweep, the
//! 16-parameter interaction surface, and the bivariate nonparametric fits.

mod flexible;
mod grid;
mod papay;
mod zajonc;

pub use flexible::{flexible_boundary_curve, mean_flexible_bandwidth};
pub use grid::{build_boundary_grid, window_select, MIN_MARGIN_OBS, MIN_WINDOW_OBS};
pub use papay::{papay_effect, papay_fit, PapayFit};
pub use zajonc::{
    zajonc_bandwidth, zajonc_curve, zajonc_point, TrimRule, ZajoncConfig, ZajoncRule,
    SELECTION_FRACTION,
};
