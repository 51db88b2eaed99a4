//! Bivariate nonparametric boundary estimation: local linear fits of the
//! treated and control surfaces at a boundary point, with one fixed
//! bandwidth per running variable aggregated (min or mean) from per-point
//! plug-ins on an evenly spaced grid. Inference is conventional robust;
//! no bias correction is applied.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::select_bandwidth;
use crate::data::{gather, Dataset};
use crate::discontinuity::ratio_variance;
use crate::error::{Error, Result, Side};
use crate::estimate::{
    BoundaryCurve, BoundaryId, CurvePoint, EstimateKind, RdEstimate, SkippedPoint,
};
use crate::kernel::{kernel_weight, KernelKind};
use crate::wls::{wls_solve, wls_solve_pair, WlsFit};
use crate::BandwidthRule;

use super::grid::{build_boundary_grid, disc_col, margin_indices, nonfixed_col, SortedMargin};

/// Margin fraction used for the per-point plug-ins feeding the aggregated
/// bandwidth.
pub const SELECTION_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZajoncRule {
    Min,
    Mean,
    Manual,
}

/// Fixed bandwidth pair (one per running variable) plus the rule that
/// produced it.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ZajoncConfig {
    pub rule: ZajoncRule,
    /// Bandwidth applied to x1 distances.
    pub h1: f64,
    /// Bandwidth applied to x2 distances.
    pub h2: f64,
    pub grid_spacing: usize,
}

impl ZajoncConfig {
    pub fn manual(h1: f64, h2: f64) -> Result<Self> {
        if h1.is_nan() || h1 <= 0.0 || h1.is_infinite() {
            return Err(Error::NonPositiveBandwidth(h1));
        }
        if h2.is_nan() || h2 <= 0.0 || h2.is_infinite() {
            return Err(Error::NonPositiveBandwidth(h2));
        }
        Ok(ZajoncConfig {
            rule: ZajoncRule::Manual,
            h1,
            h2,
            grid_spacing: 0,
        })
    }
}

/// Aggregate per-point plug-in bandwidths over an evenly spaced grid along
/// the boundary into one fixed pair.
///
/// The discontinuity coordinate's bandwidth comes from the engine selector
/// on the moving window at each grid point; the along-boundary
/// coordinate's bandwidth reuses the same one-sided machinery centered at
/// the grid point on the full margin. Diagonal bandwidth matrix only.
pub fn zajonc_bandwidth(
    ds: &Dataset,
    boundary: BoundaryId,
    rule: ZajoncRule,
    grid_spacing: usize,
    kernel: KernelKind,
) -> Result<ZajoncConfig> {
    ds.require_normalized()?;
    if grid_spacing < 5 {
        return Err(Error::GridSpacingTooSmall(grid_spacing));
    }
    let margin = margin_indices(ds, boundary);
    if margin.len() < super::grid::MIN_MARGIN_OBS {
        return Err(Error::InsufficientMargin {
            found: margin.len(),
            needed: super::grid::MIN_MARGIN_OBS,
        });
    }
    let along = nonfixed_col(ds, boundary);
    let disc = disc_col(ds, boundary);
    let mut sorted: Vec<f64> = margin.iter().map(|&i| along[i]).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = sorted[((sorted.len() as f64 * 0.01).ceil() as usize).clamp(1, sorted.len()) - 1];
    let hi = sorted[((sorted.len() as f64 * 0.99).ceil() as usize).clamp(1, sorted.len()) - 1];

    let margin_along = gather(along, &margin);
    let margin_y = gather(ds.y(), &margin);
    let sorted = SortedMargin::build(ds, boundary);
    let k = sorted.window_size(SELECTION_FRACTION)?;

    let mut h_disc = Vec::new();
    let mut h_along = Vec::new();
    let mut last_error = String::new();
    for j in 0..grid_spacing {
        let loc = lo + (hi - lo) * j as f64 / (grid_spacing - 1) as f64;
        let idx = sorted.window(loc, k);
        let disc_bw =
            select_bandwidth(&gather(disc, &idx), &gather(ds.y(), &idx), 0.0, kernel);
        let along_bw = select_bandwidth(&margin_along, &margin_y, loc, kernel);
        match (disc_bw, along_bw) {
            (Ok(d), Ok(a)) => {
                h_disc.push(d.h);
                h_along.push(a.h);
            }
            (Err(e), _) | (_, Err(e)) => last_error = e.to_string(),
        }
    }
    if h_disc.is_empty() {
        return Err(Error::AllPointsFailed(grid_spacing, last_error));
    }

    let aggregate = |vals: &[f64]| -> f64 {
        match rule {
            ZajoncRule::Min => vals.iter().cloned().fold(f64::INFINITY, f64::min),
            ZajoncRule::Mean | ZajoncRule::Manual => {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        }
    };
    let hd = aggregate(&h_disc);
    let ha = aggregate(&h_along);
    let (h1, h2) = match boundary {
        BoundaryId::B1 => (hd, ha),
        BoundaryId::B2 => (ha, hd),
    };
    Ok(ZajoncConfig {
        rule,
        h1,
        h2,
        grid_spacing,
    })
}

struct SideRows {
    design: DMatrix<f64>,
    w: DVector<f64>,
    rows: Vec<usize>,
}

fn side_rows(
    ds: &Dataset,
    point: (f64, f64),
    cfg: &ZajoncConfig,
    kernel: KernelKind,
    treated: bool,
) -> Result<SideRows> {
    let z = ds.z().ok_or(Error::NotNormalized)?;
    let want = if treated { 1.0 } else { 0.0 };
    let mut rows = Vec::new();
    let mut weights = Vec::new();
    for (i, &zi) in z.iter().enumerate() {
        if zi != want {
            continue;
        }
        let w = kernel_weight((ds.x1()[i] - point.0) / cfg.h1, kernel)
            * kernel_weight((ds.x2()[i] - point.1) / cfg.h2, kernel);
        if w > 0.0 {
            rows.push(i);
            weights.push(w);
        }
    }
    // Treated side reported as Right, control side as Left.
    let side = if treated { Side::Right } else { Side::Left };
    if rows.len() < 4 {
        return Err(Error::InsufficientData {
            side,
            found: rows.len(),
            needed: 4,
        });
    }
    let design = DMatrix::from_fn(rows.len(), 3, |r, c| {
        let i = rows[r];
        match c {
            0 => 1.0,
            1 => (ds.x1()[i] - point.0) / cfg.h1,
            _ => (ds.x2()[i] - point.1) / cfg.h2,
        }
    });
    Ok(SideRows {
        design,
        w: DVector::from_vec(weights),
        rows,
    })
}

fn boundary_point(boundary: BoundaryId, location: f64) -> (f64, f64) {
    match boundary {
        BoundaryId::B1 => (0.0, location),
        BoundaryId::B2 => (location, 0.0),
    }
}

fn disc_bandwidth(boundary: BoundaryId, cfg: &ZajoncConfig) -> f64 {
    match boundary {
        BoundaryId::B1 => cfg.h1,
        BoundaryId::B2 => cfg.h2,
    }
}

/// Boundary treatment effect at one point: intercept difference of
/// bivariate local linear fits over the treated and control sets, product
/// kernel weights, conventional robust variance.
pub fn zajonc_point(
    ds: &Dataset,
    boundary: BoundaryId,
    location: f64,
    cfg: &ZajoncConfig,
    kernel: KernelKind,
    kind: EstimateKind,
) -> Result<RdEstimate> {
    ds.require_normalized()?;
    let point = boundary_point(boundary, location);
    let treated = side_rows(ds, point, cfg, kernel, true)?;
    let control = side_rows(ds, point, cfg, kernel, false)?;

    let rule = match cfg.rule {
        ZajoncRule::Manual => BandwidthRule::Manual,
        _ => BandwidthRule::MsePlugin,
    };
    let h = disc_bandwidth(boundary, cfg);

    let fit_y = |side: &SideRows| -> Result<WlsFit> {
        wls_solve(
            &side.design,
            &DVector::from_fn(side.rows.len(), |r, _| ds.y()[side.rows[r]]),
            &side.w,
        )
    };

    let estimate = match kind {
        EstimateKind::Sharp => {
            let ft = fit_y(&treated)?;
            let fc = fit_y(&control)?;
            let tau = ft.beta[0] - fc.beta[0];
            let se = (ft.cov[(0, 0)] + fc.cov[(0, 0)]).max(0.0).sqrt();
            RdEstimate {
                kind,
                tau_conventional: tau,
                se_conventional: se,
                tau_bias_corrected: tau,
                se_robust: se,
                ci_lower: 0.0,
                ci_upper: 0.0,
                h,
                b: h,
                n_left: fc.n_eff,
                n_right: ft.n_eff,
                first_stage: None,
                bandwidth_rule: rule,
                bandwidth_fell_back: false,
            }
        }
        EstimateKind::Fuzzy => {
            let solve_pair = |side: &SideRows| {
                wls_solve_pair(
                    &side.design,
                    &DVector::from_fn(side.rows.len(), |r, _| ds.y()[side.rows[r]]),
                    &DVector::from_fn(side.rows.len(), |r, _| ds.t()[side.rows[r]]),
                    &side.w,
                )
            };
            let pt = solve_pair(&treated)?;
            let pc = solve_pair(&control)?;
            let itt = pt.first.beta[0] - pc.first.beta[0];
            let fs = pt.second.beta[0] - pc.second.beta[0];
            if fs.abs() < 0.01 {
                return Err(Error::WeakFirstStage(fs));
            }
            let var_itt = pt.first.cov[(0, 0)] + pc.first.cov[(0, 0)];
            let var_fs = pt.second.cov[(0, 0)] + pc.second.cov[(0, 0)];
            let cov = pt.cross_cov[(0, 0)] + pc.cross_cov[(0, 0)];
            let tau = itt / fs;
            let se = ratio_variance(itt, fs, var_itt, var_fs, cov).sqrt();
            RdEstimate {
                kind,
                tau_conventional: tau,
                se_conventional: se,
                tau_bias_corrected: tau,
                se_robust: se,
                ci_lower: 0.0,
                ci_upper: 0.0,
                h,
                b: h,
                n_left: pc.first.n_eff,
                n_right: pt.first.n_eff,
                first_stage: Some(fs),
                bandwidth_rule: rule,
                bandwidth_fell_back: false,
            }
        }
    };
    Ok(estimate.finish_ci())
}

/// Tail-trimming policy for [`zajonc_curve`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrimRule {
    /// Keep every retained point.
    None,
    /// Drop points whose robust se exceeds `factor` times the median se.
    SeFactor { factor: f64 },
    /// Drop points in the top `percent` of the percentile range.
    TopPercent { percent: u8 },
}

impl Default for TrimRule {
    fn default() -> Self {
        TrimRule::SeFactor { factor: 5.0 }
    }
}

/// Sweep [`zajonc_point`] over the percentile grid of a boundary, with
/// configurable tail trimming. Per-point failures are recorded and the
/// sweep continues.
pub fn zajonc_curve(
    ds: &Dataset,
    boundary: BoundaryId,
    cfg: &ZajoncConfig,
    kernel: KernelKind,
    kind: EstimateKind,
    trim: TrimRule,
) -> Result<BoundaryCurve> {
    ds.require_normalized()?;
    let grid = build_boundary_grid(ds, boundary, 1, SELECTION_FRACTION)?;

    let results: Vec<(u8, f64, Result<RdEstimate>)> = grid
        .points
        .par_iter()
        .map(|pt| {
            (
                pt.percentile,
                pt.location,
                zajonc_point(ds, boundary, pt.location, cfg, kernel, kind),
            )
        })
        .collect();

    let mut points = Vec::new();
    let mut skipped: Vec<SkippedPoint> = grid.collapsed.clone();
    let mut last_error = String::new();
    for (percentile, location, res) in results {
        match res {
            Ok(estimate) => points.push(CurvePoint {
                percentile,
                location,
                estimate,
            }),
            Err(e) => {
                last_error = e.to_string();
                skipped.push(SkippedPoint {
                    percentile,
                    reason: e.to_string(),
                });
            }
        }
    }
    if points.is_empty() {
        return Err(Error::AllPointsFailed(grid.points.len(), last_error));
    }

    match trim {
        TrimRule::None => {}
        TrimRule::SeFactor { factor } => {
            let mut ses: Vec<f64> = points.iter().map(|p| p.estimate.se_robust).collect();
            ses.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = ses[ses.len() / 2];
            if median > 0.0 {
                let threshold = factor * median;
                let (kept, dropped): (Vec<_>, Vec<_>) = points
                    .into_iter()
                    .partition(|p| p.estimate.se_robust <= threshold);
                points = kept;
                for p in dropped {
                    skipped.push(SkippedPoint {
                        percentile: p.percentile,
                        reason: format!(
                            "trimmed: se {:.4} above {:.1}x median {:.4}",
                            p.estimate.se_robust, factor, median
                        ),
                    });
                }
            }
        }
        TrimRule::TopPercent { percent } => {
            let cut = 100u8.saturating_sub(percent);
            let (kept, dropped): (Vec<_>, Vec<_>) =
                points.into_iter().partition(|p| p.percentile <= cut);
            points = kept;
            for p in dropped {
                skipped.push(SkippedPoint {
                    percentile: p.percentile,
                    reason: format!("trimmed: top {percent} percent"),
                });
            }
        }
    }
    skipped.sort_by_key(|s| s.percentile);
    if points.is_empty() {
        return Err(Error::AllPointsFailed(grid.points.len(), "all points trimmed".into()));
    }

    Ok(BoundaryCurve {
        grid,
        points,
        skipped,
    })
}
