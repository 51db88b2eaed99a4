//! Percentile grids and moving windows along a treatment boundary.
//!
//! For boundary B1 (x1 = 0, x2 >= 0) the sweep moves along x2 within the
//! x2-eligible margin, keeping both sides of x1 in full; B2 swaps the
//! roles. Windows are contiguous rank windows in the sorted non-fixed
//! coordinate so every point estimate sees the same sample size.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimate::{BoundaryGrid, BoundaryId, GridPoint, SkippedPoint};

/// Minimum observations required on the non-fixed eligible margin.
pub const MIN_MARGIN_OBS: usize = 100;

/// Engine minimum for a moving window: enough for one-sided quadratic fits.
pub const MIN_WINDOW_OBS: usize = 8;

/// Rows eligible on the non-fixed margin, with both sides of the
/// discontinuity-inducing variable retained in full.
pub(crate) fn margin_indices(ds: &Dataset, boundary: BoundaryId) -> Vec<usize> {
    let col = nonfixed_col(ds, boundary);
    (0..ds.n()).filter(|&i| col[i] >= 0.0).collect()
}

/// The coordinate that moves along the boundary.
pub(crate) fn nonfixed_col(ds: &Dataset, boundary: BoundaryId) -> &[f64] {
    match boundary {
        BoundaryId::B1 => ds.x2(),
        BoundaryId::B2 => ds.x1(),
    }
}

/// The coordinate that induces the discontinuity at the boundary.
pub(crate) fn disc_col(ds: &Dataset, boundary: BoundaryId) -> &[f64] {
    match boundary {
        BoundaryId::B1 => ds.x1(),
        BoundaryId::B2 => ds.x2(),
    }
}

/// Nearest-rank percentile: smallest sorted value with at least p% of the
/// mass at or below it.
fn percentile_value(sorted: &[f64], p: u8) -> f64 {
    let m = sorted.len();
    let rank = ((m as f64 * p as f64 / 100.0).ceil() as usize).clamp(1, m);
    sorted[rank - 1]
}

/// Percentile-indexed evaluation points along a boundary. Duplicate
/// locations (from rounded or heavily repeated scores) are collapsed to
/// their first percentile, with the rest recorded.
pub fn build_boundary_grid(
    ds: &Dataset,
    boundary: BoundaryId,
    increment_pct: u8,
    fraction: f64,
) -> Result<BoundaryGrid> {
    ds.require_normalized()?;
    if !(fraction > 0.0 && fraction <= 0.5) {
        return Err(Error::InvalidFraction(fraction));
    }
    if increment_pct == 0 || increment_pct >= 100 {
        return Err(Error::InvalidRule(format!(
            "percentile increment must lie in 1..=99, got {increment_pct}"
        )));
    }
    let margin = margin_indices(ds, boundary);
    if margin.len() < MIN_MARGIN_OBS {
        return Err(Error::InsufficientMargin {
            found: margin.len(),
            needed: MIN_MARGIN_OBS,
        });
    }
    let col = nonfixed_col(ds, boundary);
    let mut sorted: Vec<f64> = margin.iter().map(|&i| col[i]).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut points: Vec<GridPoint> = Vec::new();
    let mut collapsed = Vec::new();
    let mut p = increment_pct;
    while p < 100 {
        let location = percentile_value(&sorted, p);
        match points.last() {
            Some(prev) if prev.location == location => collapsed.push(SkippedPoint {
                percentile: p,
                reason: format!("duplicate location {location} (same window as p{})", prev.percentile),
            }),
            _ => points.push(GridPoint { percentile: p, location }),
        }
        p = p.saturating_add(increment_pct);
    }

    Ok(BoundaryGrid {
        boundary,
        points,
        fraction,
        collapsed,
    })
}

/// Margin rows presorted by the non-fixed coordinate, so a sweep sorts
/// once and selects many windows.
pub(crate) struct SortedMargin {
    rows: Vec<usize>,
    coords: Vec<f64>,
}

impl SortedMargin {
    pub(crate) fn build(ds: &Dataset, boundary: BoundaryId) -> Self {
        let col = nonfixed_col(ds, boundary);
        let mut rows = margin_indices(ds, boundary);
        // Stable order: by coordinate, then by row for reproducibility.
        rows.sort_by(|&a, &b| col[a].partial_cmp(&col[b]).unwrap().then(a.cmp(&b)));
        let coords = rows.iter().map(|&i| col[i]).collect();
        SortedMargin { rows, coords }
    }

    pub(crate) fn len(&self) -> usize {
        self.rows.len()
    }

    pub(crate) fn window_size(&self, fraction: f64) -> Result<usize> {
        if !(fraction > 0.0 && fraction <= 0.5) {
            return Err(Error::InvalidFraction(fraction));
        }
        let k = (fraction * self.len() as f64).ceil() as usize;
        if k < MIN_WINDOW_OBS {
            return Err(Error::WindowTooSmall {
                size: k,
                needed: MIN_WINDOW_OBS,
            });
        }
        Ok(k)
    }

    /// Two-pointer nearest-k around `location`; distance ties go to the
    /// smaller coordinate. Contiguous in the sorted order.
    pub(crate) fn window(&self, location: f64, k: usize) -> Vec<usize> {
        let m = self.len();
        let first_ge = self.coords.partition_point(|&c| c < location);
        let mut lo = first_ge; // next candidate on the left is lo-1
        let mut hi = first_ge; // next candidate on the right is hi
        for _ in 0..k {
            if lo == 0 {
                hi += 1;
            } else if hi == m {
                lo -= 1;
            } else {
                let dl = location - self.coords[lo - 1];
                let dr = self.coords[hi] - location;
                if dl <= dr {
                    lo -= 1;
                } else {
                    hi += 1;
                }
            }
        }
        self.rows[lo..hi].to_vec()
    }
}

/// The ceil(fraction * m) margin observations nearest to `location` in the
/// non-fixed coordinate, ties toward the smaller coordinate. Returned as
/// row indices into the dataset; contiguous in the sorted coordinate.
pub fn window_select(
    ds: &Dataset,
    boundary: BoundaryId,
    location: f64,
    fraction: f64,
) -> Result<Vec<usize>> {
    ds.require_normalized()?;
    let margin = SortedMargin::build(ds, boundary);
    let k = margin.window_size(fraction)?;
    Ok(margin.window(location, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{validate_and_normalize, AssignmentRule, Dataset};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// Normalized dataset whose x2-eligible margin holds the given values.
    fn ds_with_x2_margin(values: &[f64]) -> Dataset {
        let n = values.len();
        let x1: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let raw = Dataset::from_columns(
            vec![0.0; n],
            x1,
            values.to_vec(),
            vec![0.0; n],
            None,
        )
        .unwrap();
        validate_and_normalize(&raw, &AssignmentRule::identity()).unwrap()
    }

    #[test]
    fn uniform_margin_yields_unit_percentile_grid() {
        let values: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        let ds = ds_with_x2_margin(&values);
        let grid = build_boundary_grid(&ds, BoundaryId::B1, 1, 0.1).unwrap();
        assert_eq!(grid.points.len(), 99);
        for (i, pt) in grid.points.iter().enumerate() {
            assert_eq!(pt.percentile as usize, i + 1);
            assert_eq!(pt.location, (i + 1) as f64);
        }
        assert!(grid.collapsed.is_empty());
    }

    #[test]
    fn repeated_scores_collapse_with_reasons() {
        // Heavy rounding: only 10 distinct values over 500 observations.
        let values: Vec<f64> = (0..500).map(|i| (i % 10) as f64).collect();
        let ds = ds_with_x2_margin(&values);
        let grid = build_boundary_grid(&ds, BoundaryId::B1, 1, 0.1).unwrap();
        assert!(grid.points.len() < 99);
        assert!(!grid.collapsed.is_empty());
        assert_eq!(grid.points.len() + grid.collapsed.len(), 99);
        // Strictly increasing after dedup.
        for w in grid.points.windows(2) {
            assert!(w[0].location < w[1].location);
        }
    }

    #[test]
    fn grid_locations_match_rank_counting_oracle() {
        // Skewed sample; oracle checks the nearest-rank property directly.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let values: Vec<f64> = (0..5_000)
            .map(|_| {
                let u: f64 = rng.gen();
                u * u * 100.0
            })
            .collect();
        let ds = ds_with_x2_margin(&values);
        let grid = build_boundary_grid(&ds, BoundaryId::B1, 1, 0.1).unwrap();
        let m = values.len() as f64;
        for pt in &grid.points {
            let at_or_below = values.iter().filter(|&&v| v <= pt.location).count() as f64;
            let strictly_below = values.iter().filter(|&&v| v < pt.location).count() as f64;
            let need = m * pt.percentile as f64 / 100.0;
            assert!(at_or_below >= need, "p{}", pt.percentile);
            assert!(strictly_below < need.ceil(), "p{}", pt.percentile);
        }
        // Density tracking: quartiles of the skewed draw bunch low.
        let p25 = grid.points.iter().find(|p| p.percentile == 25).unwrap();
        let p75 = grid.points.iter().find(|p| p.percentile == 75).unwrap();
        assert!(p25.location < 0.25 * p75.location + 1.0);
    }

    #[test]
    fn window_size_is_exact_fraction() {
        let values: Vec<f64> = (0..1000).map(|v| v as f64 / 10.0).collect();
        let ds = ds_with_x2_margin(&values);
        let win = window_select(&ds, BoundaryId::B1, 50.0, 0.10).unwrap();
        assert_eq!(win.len(), 100);
    }

    #[test]
    fn half_fraction_at_median_is_central_half() {
        let values: Vec<f64> = (0..1000).map(|v| v as f64).collect();
        let ds = ds_with_x2_margin(&values);
        let win = window_select(&ds, BoundaryId::B1, 499.5, 0.5).unwrap();
        assert_eq!(win.len(), 500);
        let col = ds.x2();
        let mut coords: Vec<f64> = win.iter().map(|&i| col[i]).collect();
        coords.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(coords[0], 250.0);
        assert_eq!(coords[499], 749.0);
    }

    #[test]
    fn fraction_one_is_rejected() {
        let values: Vec<f64> = (0..200).map(|v| v as f64).collect();
        let ds = ds_with_x2_margin(&values);
        assert!(matches!(
            window_select(&ds, BoundaryId::B1, 10.0, 1.0),
            Err(Error::InvalidFraction(_))
        ));
        assert!(matches!(
            build_boundary_grid(&ds, BoundaryId::B1, 1, 0.0),
            Err(Error::InvalidFraction(_))
        ));
    }

    #[test]
    fn adjacent_windows_overlap() {
        let values: Vec<f64> = (0..1000).map(|v| v as f64).collect();
        let ds = ds_with_x2_margin(&values);
        let a = window_select(&ds, BoundaryId::B1, 400.0, 0.10).unwrap();
        let b = window_select(&ds, BoundaryId::B1, 410.0, 0.10).unwrap();
        let shared = a.iter().filter(|i| b.contains(i)).count();
        assert!(shared > 0, "moving windows should share observations");
    }

    #[test]
    fn distance_ties_break_toward_smaller_coordinate() {
        // 110 values symmetric around 50; k = 11 is odd, so after five full
        // equidistant pairs the last pick faces a tie and must go left.
        let mut values = Vec::new();
        for d in 1..=55 {
            values.push(50.0 - d as f64);
            values.push(50.0 + d as f64);
        }
        let ds = ds_with_x2_margin(&values);
        let win = window_select(&ds, BoundaryId::B1, 50.0, 0.1).unwrap();
        assert_eq!(win.len(), 11);
        let col = ds.x2();
        let coords: Vec<f64> = win.iter().map(|&i| col[i]).collect();
        assert!(coords.contains(&44.0), "tie should pick the smaller coordinate");
        assert!(!coords.contains(&56.0));
    }

    #[test]
    fn tiny_window_is_rejected() {
        let values: Vec<f64> = (0..50).map(|v| v as f64).collect();
        let ds = ds_with_x2_margin(&values);
        match window_select(&ds, BoundaryId::B1, 25.0, 0.1) {
            Err(Error::WindowTooSmall { size, needed }) => {
                assert_eq!(size, 5);
                assert_eq!(needed, MIN_WINDOW_OBS);
            }
            other => panic!("expected window-too-small, got {other:?}"),
        }
    }

    #[test]
    fn small_margin_is_rejected() {
        let values: Vec<f64> = (0..40).map(|v| v as f64).collect();
        let ds = ds_with_x2_margin(&values);
        assert!(matches!(
            build_boundary_grid(&ds, BoundaryId::B1, 1, 0.1),
            Err(Error::InsufficientMargin { .. })
        ));
    }
}
