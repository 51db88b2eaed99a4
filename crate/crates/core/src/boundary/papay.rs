//! The 16-parameter full-interaction surface estimator: four planes in
//! three dimensions, one per treatment quadrant, with discontinuities read
//! off at the boundary edges.
//!
//! Basis order (fixed): the running-variable block {1, x1, x2, x1*x2}
//! repeated for each treatment block {1, T1, T2, T1*T2}, where
//! T1 = 1{x1 >= 0} and T2 = 1{x2 >= 0}:
//!
//! ```text
//! col  0..4   1, x1, x2, x1*x2
//! col  4..8   T1 * (1, x1, x2, x1*x2)
//! col  8..12  T2 * (1, x1, x2, x1*x2)
//! col 12..16  T1*T2 * (1, x1, x2, x1*x2)
//! ```

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimate::BoundaryId;
use crate::kernel::{kernel_weight, KernelKind};
use crate::wls::wls_solve;

/// Fitted interaction surface with robust covariance.
#[derive(Debug, Clone)]
pub struct PapayFit {
    /// 16 coefficients in the documented basis order, raw x-units.
    pub coefficients: Vec<f64>,
    /// (h1, h2) kernel bandwidths of the rectangular window.
    pub bandwidths: (f64, f64),
    /// 16x16 HC1 sandwich covariance.
    pub covariance: DMatrix<f64>,
    /// Positive-weight observations in the window.
    pub n_eff: usize,
}

fn quadrant_name(t1: bool, t2: bool) -> &'static str {
    match (t1, t2) {
        (false, false) => "T1=0,T2=0",
        (false, true) => "T1=0,T2=1",
        (true, false) => "T1=1,T2=0",
        (true, true) => "T1=1,T2=1",
    }
}

/// Weighted least squares on the 16-term interaction basis over the
/// rectangular window |x1| <= h1, |x2| <= h2 with product kernel weights.
pub fn papay_fit(ds: &Dataset, h1: f64, h2: f64, kernel: KernelKind) -> Result<PapayFit> {
    ds.require_normalized()?;
    if h1.is_nan() || h1 <= 0.0 || h1.is_infinite() {
        return Err(Error::NonPositiveBandwidth(h1));
    }
    if h2.is_nan() || h2 <= 0.0 || h2.is_infinite() {
        return Err(Error::NonPositiveBandwidth(h2));
    }

    let mut rows = Vec::new();
    let mut weights = Vec::new();
    let mut quadrants = [0usize; 4];
    for i in 0..ds.n() {
        let w = kernel_weight(ds.x1()[i] / h1, kernel) * kernel_weight(ds.x2()[i] / h2, kernel);
        if w > 0.0 {
            let t1 = ds.x1()[i] >= 0.0;
            let t2 = ds.x2()[i] >= 0.0;
            quadrants[(t1 as usize) * 2 + t2 as usize] += 1;
            rows.push(i);
            weights.push(w);
        }
    }
    for (qi, &count) in quadrants.iter().enumerate() {
        if count == 0 {
            let t1 = qi / 2 == 1;
            let t2 = qi % 2 == 1;
            return Err(Error::EmptyQuadrant(quadrant_name(t1, t2)));
        }
    }
    if rows.len() < 20 {
        return Err(Error::InsufficientData {
            side: crate::error::Side::Right,
            found: rows.len(),
            needed: 20,
        });
    }

    // Scaled design: u1 = x1/h1, u2 = x2/h2 for conditioning; coefficients
    // are mapped back to x-units below.
    let design = DMatrix::from_fn(rows.len(), 16, |r, c| {
        let i = rows[r];
        let u1 = ds.x1()[i] / h1;
        let u2 = ds.x2()[i] / h2;
        let t1 = (ds.x1()[i] >= 0.0) as u8 as f64;
        let t2 = (ds.x2()[i] >= 0.0) as u8 as f64;
        let g = match c % 4 {
            0 => 1.0,
            1 => u1,
            2 => u2,
            _ => u1 * u2,
        };
        let d = match c / 4 {
            0 => 1.0,
            1 => t1,
            2 => t2,
            _ => t1 * t2,
        };
        g * d
    });
    let y = DVector::from_fn(rows.len(), |r, _| ds.y()[rows[r]]);
    let w = DVector::from_vec(weights);
    let fit = wls_solve(&design, &y, &w)?;

    // Column scale back to x-units: divide by h1^a * h2^b per column.
    let col_scale: Vec<f64> = (0..16)
        .map(|c| match c % 4 {
            0 => 1.0,
            1 => 1.0 / h1,
            2 => 1.0 / h2,
            _ => 1.0 / (h1 * h2),
        })
        .collect();
    let coefficients: Vec<f64> = (0..16).map(|c| fit.beta[c] * col_scale[c]).collect();
    let covariance =
        DMatrix::from_fn(16, 16, |j, k| fit.cov[(j, k)] * col_scale[j] * col_scale[k]);

    Ok(PapayFit {
        coefficients,
        bandwidths: (h1, h2),
        covariance,
        n_eff: fit.n_eff,
    })
}

/// Contrast vector for the jump across `boundary` at distance `location`
/// from the corner.
fn effect_contrast(boundary: BoundaryId, location: f64) -> [(usize, f64); 4] {
    match boundary {
        // At (0, l), T2 = 1 on both sides and T1 flips: the jump collects
        // the T1 block at x1 = 0 plus the T1*T2 block.
        BoundaryId::B1 => [(4, 1.0), (6, location), (12, 1.0), (14, location)],
        // At (l, 0), T1 = 1 on both sides and T2 flips.
        BoundaryId::B2 => [(8, 1.0), (9, location), (12, 1.0), (13, location)],
    }
}

/// Jump across the boundary at a given location, with the contrast-based
/// conventional standard error. Affine in `location` by construction.
pub fn papay_effect(fit: &PapayFit, boundary: BoundaryId, location: f64) -> (f64, f64) {
    let contrast = effect_contrast(boundary, location);
    let tau: f64 = contrast.iter().map(|&(i, c)| c * fit.coefficients[i]).sum();
    let mut var = 0.0;
    for &(i, ci) in &contrast {
        for &(j, cj) in &contrast {
            var += ci * cj * fit.covariance[(i, j)];
        }
    }
    (tau, var.max(0.0).sqrt())
}
