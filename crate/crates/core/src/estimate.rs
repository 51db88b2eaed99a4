//! Result containers shared by every estimator.

use serde::{Deserialize, Serialize};

use crate::bandwidth::BandwidthRule;

/// Critical value used for all 95% intervals.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateKind {
    Sharp,
    Fuzzy,
}

/// One discontinuity estimate: conventional and bias-corrected points,
/// robust interval, bandwidths, and effective sample sizes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RdEstimate {
    pub kind: EstimateKind,
    pub tau_conventional: f64,
    pub se_conventional: f64,
    pub tau_bias_corrected: f64,
    pub se_robust: f64,
    /// 95% robust CI, centered on the bias-corrected point.
    pub ci_lower: f64,
    pub ci_upper: f64,
    /// Main bandwidth.
    pub h: f64,
    /// Pilot bandwidth used for the curvature fits.
    pub b: f64,
    /// Positive-weight observations within h, left of the cutoff.
    pub n_left: usize,
    /// Positive-weight observations within h, right of the cutoff.
    pub n_right: usize,
    /// Take-up discontinuity (conventional); fuzzy estimates only.
    pub first_stage: Option<f64>,
    pub bandwidth_rule: BandwidthRule,
    pub bandwidth_fell_back: bool,
}

impl RdEstimate {
    pub(crate) fn finish_ci(mut self) -> Self {
        self.ci_lower = self.tau_bias_corrected - Z_95 * self.se_robust;
        self.ci_upper = self.tau_bias_corrected + Z_95 * self.se_robust;
        self
    }

    /// True when the 95% robust CI contains `value`.
    pub fn ci_covers(&self, value: f64) -> bool {
        self.ci_lower <= value && value <= self.ci_upper
    }
}

/// The two treatment boundaries of the L-shaped assignment rule:
/// B1 = {x1 = 0, x2 >= 0}, B2 = {x1 >= 0, x2 = 0}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundaryId {
    B1,
    B2,
}

impl std::fmt::Display for BoundaryId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryId::B1 => write!(f, "B1"),
            BoundaryId::B2 => write!(f, "B2"),
        }
    }
}

/// A retained evaluation point: percentile of the non-fixed running
/// variable and its value there.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridPoint {
    pub percentile: u8,
    pub location: f64,
}

/// Why a percentile was dropped from a grid or sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkippedPoint {
    pub percentile: u8,
    pub reason: String,
}

/// Percentile-indexed evaluation points along one treatment boundary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryGrid {
    pub boundary: BoundaryId,
    /// Strictly increasing locations after duplicate collapse.
    pub points: Vec<GridPoint>,
    /// Moving-window share of the non-fixed margin, in (0, 0.5].
    pub fraction: f64,
    /// Percentiles collapsed at build time (duplicate locations).
    pub collapsed: Vec<SkippedPoint>,
}

/// One estimated point along a boundary curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvePoint {
    pub percentile: u8,
    pub location: f64,
    pub estimate: RdEstimate,
}

/// Per-point estimates along a treatment boundary, in percentile order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryCurve {
    pub grid: BoundaryGrid,
    pub points: Vec<CurvePoint>,
    /// Skipped percentiles: grid duplicates plus per-point failures.
    pub skipped: Vec<SkippedPoint>,
}

impl BoundaryCurve {
    /// Precision-weighted mean of the bias-corrected estimates
    /// (weights 1/se²; plain mean when any se is zero, as in noiseless
    /// fixtures).
    pub fn weighted_mean_tau(&self) -> Option<f64> {
        if self.points.is_empty() {
            return None;
        }
        let any_zero = self.points.iter().any(|p| p.estimate.se_robust <= 0.0);
        if any_zero {
            let sum: f64 = self.points.iter().map(|p| p.estimate.tau_bias_corrected).sum();
            return Some(sum / self.points.len() as f64);
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for p in &self.points {
            let w = 1.0 / (p.estimate.se_robust * p.estimate.se_robust);
            num += w * p.estimate.tau_bias_corrected;
            den += w;
        }
        Some(num / den)
    }

    /// Mean of the per-point main bandwidths.
    pub fn mean_bandwidth(&self) -> Option<f64> {
        if self.points.is_empty() {
            return None;
        }
        Some(self.points.iter().map(|p| p.estimate.h).sum::<f64>() / self.points.len() as f64)
    }
}
