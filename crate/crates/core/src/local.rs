//! One-sided local polynomial fits at a cutoff.
//!
//! The intercept of a kernel-weighted polynomial regression fit on one side
//! of a point estimates the one-sided limit of the conditional mean there:
//!
//! ```text
//! argmin_b Σ 1(side) (y_i - b0 - b1 (x_i - c) - ...)² K((x_i - c)/h)
//! ```
//!
//! Fits are computed on the scaled regressor u = (x - c)/h for conditioning
//! and coefficients are mapped back to x-units. The discontinuity
//! estimators need, per side, the linear fit at the main bandwidth, the
//! quadratic fit at the pilot bandwidth, and the sampling covariance
//! between the two (intercept vs. curvature), which [`side_estimate`]
//! returns from one pass over the side's observations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result, Side};
use crate::kernel::{kernel_weight, KernelKind};
use crate::wls::{hc1_scale, solve_core, wls_solve, Solved};

/// Polynomial order of a local fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolyOrder {
    Linear,
    Quadratic,
}

impl PolyOrder {
    pub fn degree(self) -> usize {
        match self {
            PolyOrder::Linear => 1,
            PolyOrder::Quadratic => 2,
        }
    }
}

/// Result of a one-sided local polynomial fit.
#[derive(Debug, Clone)]
pub struct LocalFit {
    /// Estimated one-sided limit of the conditional mean at the center.
    pub intercept: f64,
    /// First derivative of the fit at the center (x-units).
    pub slope: f64,
    /// Second derivative of the fit at the center; quadratic fits only.
    pub curvature: Option<f64>,
    /// Robust (HC1 sandwich) standard error of the intercept.
    pub se_intercept: f64,
    /// Robust standard error of the curvature; quadratic fits only.
    pub se_curvature: Option<f64>,
    /// Observations with strictly positive kernel weight.
    pub n_eff: usize,
    pub side: Side,
}

/// A one-sided kernel window: scaled design, weights, and source rows
/// (ascending).
struct SideWindow {
    design: DMatrix<f64>,
    w: DVector<f64>,
    rows: Vec<usize>,
    h: f64,
    order: PolyOrder,
}

fn side_window(
    x: &[f64],
    center: f64,
    h: f64,
    side: Side,
    kind: KernelKind,
    order: PolyOrder,
) -> Result<SideWindow> {
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::NonPositiveBandwidth(h));
    }
    let mut rows = Vec::new();
    let mut weights = Vec::new();
    for (i, &xi) in x.iter().enumerate() {
        let on_side = match side {
            Side::Right => xi >= center,
            Side::Left => xi < center,
        };
        if !on_side {
            continue;
        }
        let w = kernel_weight((xi - center) / h, kind);
        if w > 0.0 {
            rows.push(i);
            weights.push(w);
        }
    }
    let needed = order.degree() + 2;
    if rows.len() < needed {
        return Err(Error::InsufficientData {
            side,
            found: rows.len(),
            needed,
        });
    }
    let p = order.degree() + 1;
    let design = DMatrix::from_fn(rows.len(), p, |r, c| {
        let u = (x[rows[r]] - center) / h;
        u.powi(c as i32)
    });
    Ok(SideWindow {
        design,
        w: DVector::from_vec(weights),
        rows,
        h,
        order,
    })
}

struct WindowFit {
    solved: Solved,
    resid: DVector<f64>,
}

fn fit_window(win: &SideWindow, values: &[f64]) -> Result<WindowFit> {
    let y = DVector::from_fn(win.rows.len(), |r, _| values[win.rows[r]]);
    let solved = solve_core(&win.design, &y, &win.w)?;
    let resid = &y - &win.design * &solved.beta;
    Ok(WindowFit { solved, resid })
}

fn own_covariance(win: &SideWindow, fit: &WindowFit) -> DMatrix<f64> {
    let p = win.design.ncols();
    let mut meat = DMatrix::zeros(p, p);
    for i in 0..win.rows.len() {
        let s = win.w[i] * win.w[i] * fit.resid[i] * fit.resid[i];
        for j in 0..p {
            let xj = win.design[(i, j)] * s;
            for k in 0..p {
                meat[(j, k)] += xj * win.design[(i, k)];
            }
        }
    }
    &fit.solved.a_inv * meat * &fit.solved.a_inv * hc1_scale(fit.solved.n_eff, p)
}

/// Sandwich cross-covariance between two window fits over the same side
/// (possibly different bandwidths and responses). Rows are matched by
/// source index.
fn cross_covariance(
    win_a: &SideWindow,
    fit_a: &WindowFit,
    win_b: &SideWindow,
    fit_b: &WindowFit,
) -> DMatrix<f64> {
    let (pa, pb) = (win_a.design.ncols(), win_b.design.ncols());
    let mut meat = DMatrix::zeros(pa, pb);
    let mut ib = 0usize;
    for ia in 0..win_a.rows.len() {
        let row = win_a.rows[ia];
        while ib < win_b.rows.len() && win_b.rows[ib] < row {
            ib += 1;
        }
        if ib >= win_b.rows.len() {
            break;
        }
        if win_b.rows[ib] != row {
            continue;
        }
        let s = win_a.w[ia] * win_b.w[ib] * fit_a.resid[ia] * fit_b.resid[ib];
        for j in 0..pa {
            let xj = win_a.design[(ia, j)] * s;
            for k in 0..pb {
                meat[(j, k)] += xj * win_b.design[(ib, k)];
            }
        }
    }
    let scale = (hc1_scale(fit_a.solved.n_eff, pa) * hc1_scale(fit_b.solved.n_eff, pb)).sqrt();
    &fit_a.solved.a_inv * meat * &fit_b.solved.a_inv * scale
}

fn to_local_fit(win: &SideWindow, fit: &WindowFit, cov: &DMatrix<f64>, side: Side) -> LocalFit {
    let h = win.h;
    let (curvature, se_curvature) = match win.order {
        PolyOrder::Linear => (None, None),
        PolyOrder::Quadratic => (
            Some(2.0 * fit.solved.beta[2] / (h * h)),
            Some(2.0 * cov[(2, 2)].max(0.0).sqrt() / (h * h)),
        ),
    };
    LocalFit {
        intercept: fit.solved.beta[0],
        slope: fit.solved.beta[1] / h,
        curvature,
        se_intercept: cov[(0, 0)].max(0.0).sqrt(),
        se_curvature,
        n_eff: fit.solved.n_eff,
        side,
    }
}

/// Kernel-weighted polynomial fit using only observations on `side` of
/// `center`. The right side includes the center itself (x >= center).
pub fn local_linear_side(
    x: &[f64],
    y: &[f64],
    center: f64,
    h: f64,
    side: Side,
    kind: KernelKind,
    order: PolyOrder,
) -> Result<LocalFit> {
    let win = side_window(x, center, h, side, kind, order)?;
    let ys = DVector::from_fn(win.rows.len(), |r, _| y[win.rows[r]]);
    let fit = wls_solve(&win.design, &ys, &win.w)?;
    let (curvature, se_curvature) = match order {
        PolyOrder::Linear => (None, None),
        PolyOrder::Quadratic => (
            Some(2.0 * fit.beta[2] / (h * h)),
            Some(2.0 * fit.cov[(2, 2)].max(0.0).sqrt() / (h * h)),
        ),
    };
    Ok(LocalFit {
        intercept: fit.beta[0],
        slope: fit.beta[1] / h,
        curvature,
        se_intercept: fit.cov[(0, 0)].max(0.0).sqrt(),
        se_curvature,
        n_eff: fit.n_eff,
        side,
    })
}

/// One side of a bias-corrected estimate: the linear fit at h, the
/// quadratic fit at the pilot b, and the covariance between the h-fit
/// intercept and the b-fit curvature (shared observations, shared noise).
pub(crate) struct SideEstimate {
    pub point: LocalFit,
    pub pilot: LocalFit,
    pub cov_mu_curv: f64,
}

pub(crate) fn side_estimate(
    x: &[f64],
    y: &[f64],
    center: f64,
    h: f64,
    b: f64,
    side: Side,
    kind: KernelKind,
) -> Result<SideEstimate> {
    let win_h = side_window(x, center, h, side, kind, PolyOrder::Linear)?;
    let win_b = side_window(x, center, b, side, kind, PolyOrder::Quadratic)?;
    let fit_h = fit_window(&win_h, y)?;
    let fit_b = fit_window(&win_b, y)?;
    let cov_h = own_covariance(&win_h, &fit_h);
    let cov_b = own_covariance(&win_b, &fit_b);
    let cross = cross_covariance(&win_h, &fit_h, &win_b, &fit_b);
    Ok(SideEstimate {
        point: to_local_fit(&win_h, &fit_h, &cov_h, side),
        pilot: to_local_fit(&win_b, &fit_b, &cov_b, side),
        cov_mu_curv: 2.0 * cross[(0, 2)] / (b * b),
    })
}

/// Two responses (outcome and take-up) on one side with shared windows:
/// everything in [`SideEstimate`] for each response, plus the
/// cross-response covariances of the intercepts at h and of the
/// curvatures at b.
pub(crate) struct SidePairEstimate {
    pub y: SideEstimate,
    pub t: SideEstimate,
    pub cov_mu_yt: f64,
    pub cov_curv_yt: f64,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn side_pair_estimate(
    x: &[f64],
    y: &[f64],
    t: &[f64],
    center: f64,
    h: f64,
    b: f64,
    side: Side,
    kind: KernelKind,
) -> Result<SidePairEstimate> {
    let win_h = side_window(x, center, h, side, kind, PolyOrder::Linear)?;
    let win_b = side_window(x, center, b, side, kind, PolyOrder::Quadratic)?;
    let fit_hy = fit_window(&win_h, y)?;
    let fit_ht = fit_window(&win_h, t)?;
    let fit_by = fit_window(&win_b, y)?;
    let fit_bt = fit_window(&win_b, t)?;

    let build = |fh: &WindowFit, fb: &WindowFit| -> SideEstimate {
        let cov_h = own_covariance(&win_h, fh);
        let cov_b = own_covariance(&win_b, fb);
        let cross = cross_covariance(&win_h, fh, &win_b, fb);
        SideEstimate {
            point: to_local_fit(&win_h, fh, &cov_h, side),
            pilot: to_local_fit(&win_b, fb, &cov_b, side),
            cov_mu_curv: 2.0 * cross[(0, 2)] / (b * b),
        }
    };
    let est_y = build(&fit_hy, &fit_by);
    let est_t = build(&fit_ht, &fit_bt);
    let cross_mu = cross_covariance(&win_h, &fit_hy, &win_h, &fit_ht);
    let cross_curv = cross_covariance(&win_b, &fit_by, &win_b, &fit_bt);
    Ok(SidePairEstimate {
        y: est_y,
        t: est_t,
        cov_mu_yt: cross_mu[(0, 0)],
        cov_curv_yt: 4.0 * cross_curv[(2, 2)] / (b * b * b * b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn noiseless_linear_recovered_exactly() {
        let center = 1.5;
        let x = grid(40, 1.5, 4.0);
        let y: Vec<f64> = x.iter().map(|&v| 2.0 + 3.0 * (v - center)).collect();
        for h in [0.7, 1.3, 10.0] {
            let fit = local_linear_side(
                &x,
                &y,
                center,
                h,
                Side::Right,
                KernelKind::Uniform,
                PolyOrder::Linear,
            )
            .unwrap();
            assert!((fit.intercept - 2.0).abs() < 1e-12, "h={h}");
            assert!((fit.slope - 3.0).abs() < 1e-12, "h={h}");
        }
    }

    /// Closed-form simple-regression oracle: with a uniform kernel and
    /// manual h, the local fit is plain least squares on the in-window
    /// subsample.
    #[test]
    fn uniform_kernel_equals_windowed_ols() {
        let x = grid(101, -3.0, 3.0);
        // Deterministic wiggly response, no noise model needed.
        let y: Vec<f64> = x.iter().map(|&v| 0.4 + 0.8 * v + (3.0 * v).sin()).collect();
        let h = 1.2;
        let center = 0.0;

        for side in [Side::Left, Side::Right] {
            let fit = local_linear_side(
                &x,
                &y,
                center,
                h,
                side,
                KernelKind::Uniform,
                PolyOrder::Linear,
            )
            .unwrap();

            // Oracle: textbook slope/intercept formulas on the subsample.
            let window: Vec<(f64, f64)> = x
                .iter()
                .zip(&y)
                .filter(|(&xv, _)| {
                    let on_side = match side {
                        Side::Right => xv >= center,
                        Side::Left => xv < center,
                    };
                    on_side && ((xv - center) / h).abs() <= 1.0
                })
                .map(|(&xv, &yv)| (xv - center, yv))
                .collect();
            let n = window.len() as f64;
            let mean_x = window.iter().map(|(a, _)| a).sum::<f64>() / n;
            let mean_y = window.iter().map(|(_, b)| b).sum::<f64>() / n;
            let sxx: f64 = window.iter().map(|(a, _)| (a - mean_x).powi(2)).sum();
            let sxy: f64 = window
                .iter()
                .map(|(a, b)| (a - mean_x) * (b - mean_y))
                .sum();
            let slope = sxy / sxx;
            let intercept = mean_y - slope * mean_x;

            assert!(
                (fit.intercept - intercept).abs() <= 1e-12 * intercept.abs().max(1.0),
                "{side:?} intercept {} vs {}",
                fit.intercept,
                intercept
            );
            assert!(
                (fit.slope - slope).abs() <= 1e-12 * slope.abs().max(1.0),
                "{side:?} slope {} vs {}",
                fit.slope,
                slope
            );
        }
    }

    #[test]
    fn empty_window_is_insufficient_data() {
        let x = grid(50, -5.0, -1.0);
        let y = vec![1.0; 50];
        let err = local_linear_side(
            &x,
            &y,
            0.0,
            0.5,
            Side::Right,
            KernelKind::Triangular,
            PolyOrder::Linear,
        )
        .unwrap_err();
        match err {
            Error::InsufficientData { side, found, .. } => {
                assert_eq!(side, Side::Right);
                assert_eq!(found, 0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn center_point_belongs_to_right_side() {
        let x = vec![-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0];
        let y = vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let right = local_linear_side(
            &x,
            &y,
            0.0,
            2.0,
            Side::Right,
            KernelKind::Uniform,
            PolyOrder::Linear,
        )
        .unwrap();
        assert_eq!(right.n_eff, 4);
        assert!((right.intercept - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_curvature_exact_on_parabola() {
        let x = grid(60, 0.0, 2.0);
        let y: Vec<f64> = x.iter().map(|&v| 1.0 + 0.5 * v - 0.7 * v * v).collect();
        let fit = local_linear_side(
            &x,
            &y,
            0.0,
            1.5,
            Side::Right,
            KernelKind::Triangular,
            PolyOrder::Quadratic,
        )
        .unwrap();
        assert!((fit.intercept - 1.0).abs() < 1e-10);
        assert!((fit.slope - 0.5).abs() < 1e-10);
        assert!((fit.curvature.unwrap() + 1.4).abs() < 1e-9);
        assert!(fit.se_intercept < 1e-9);
    }

    #[test]
    fn side_estimate_matches_separate_fits() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let x: Vec<f64> = (0..600).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&v| 1.0 + v + 0.5 * v * v + noise.sample(&mut rng))
            .collect();
        let (h, b) = (0.8, 1.2);
        let joint = side_estimate(&x, &y, 0.0, h, b, Side::Right, KernelKind::Triangular)
            .unwrap();
        let lone_h = local_linear_side(
            &x, &y, 0.0, h, Side::Right, KernelKind::Triangular, PolyOrder::Linear,
        )
        .unwrap();
        let lone_b = local_linear_side(
            &x, &y, 0.0, b, Side::Right, KernelKind::Triangular, PolyOrder::Quadratic,
        )
        .unwrap();
        assert_eq!(joint.point.intercept, lone_h.intercept);
        assert_eq!(joint.point.se_intercept, lone_h.se_intercept);
        assert_eq!(joint.pilot.curvature, lone_b.curvature);
        assert_eq!(joint.pilot.se_curvature, lone_b.se_curvature);
        // Intercept and curvature share noise: covariance bounded by the
        // Cauchy-Schwarz product of the marginal ses.
        let bound = joint.point.se_intercept * joint.pilot.se_curvature.unwrap();
        assert!(joint.cov_mu_curv.abs() <= bound * (1.0 + 1e-9));
    }

    /// Monte Carlo calibration of the intercept-curvature covariance
    /// against its empirical counterpart.
    #[test]
    fn cross_covariance_is_calibrated() {
        let (h, b) = (1.0, 1.5);
        let mut mus = Vec::new();
        let mut curvs = Vec::new();
        let mut reported = Vec::new();
        for rep in 0..600u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(10_000 + rep);
            let noise = Normal::new(0.0, 0.5).unwrap();
            let x: Vec<f64> = (0..400).map(|_| rng.gen_range(0.0..2.0)).collect();
            let y: Vec<f64> = x
                .iter()
                .map(|&v| 1.0 + 0.5 * v + 0.8 * v * v + noise.sample(&mut rng))
                .collect();
            let est = side_estimate(&x, &y, 0.0, h, b, Side::Right, KernelKind::Triangular)
                .unwrap();
            mus.push(est.point.intercept);
            curvs.push(est.pilot.curvature.unwrap());
            reported.push(est.cov_mu_curv);
        }
        let n = mus.len() as f64;
        let mm = mus.iter().sum::<f64>() / n;
        let mc = curvs.iter().sum::<f64>() / n;
        let emp_cov = mus
            .iter()
            .zip(&curvs)
            .map(|(a, b)| (a - mm) * (b - mc))
            .sum::<f64>()
            / (n - 1.0);
        let mean_reported = reported.iter().sum::<f64>() / n;
        // Same sign and same order of magnitude.
        assert!(
            (emp_cov - mean_reported).abs() < 0.5 * emp_cov.abs().max(mean_reported.abs()),
            "empirical {emp_cov:.6} vs reported {mean_reported:.6}"
        );
    }
}
