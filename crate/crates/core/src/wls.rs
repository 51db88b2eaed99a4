//! Weighted least squares with heteroskedasticity-robust covariance.
//!
//! Every local fit in the crate reduces to
//!
//! ```text
//! minimize over beta:  Σ_i w_i (y_i - x_i' beta)²
//! ```
//!
//! solved through the normal equations `(X'WX) beta = X'Wy` (Cholesky on the
//! p×p cross-product, p ≤ 16 everywhere in this crate). The reported
//! covariance is the HC1 sandwich
//!
//! ```text
//! V = (X'WX)^-1 [ Σ_i w_i² e_i² x_i x_i' ] (X'WX)^-1 · n/(n-p)
//! ```
//!
//! with `n` the number of positive-weight rows.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// A solved weighted least-squares problem.
#[derive(Debug, Clone)]
pub struct WlsFit {
    /// Coefficient estimates, one per design column.
    pub beta: DVector<f64>,
    /// HC1 sandwich covariance of `beta`.
    pub cov: DMatrix<f64>,
    /// Number of observations with strictly positive weight.
    pub n_eff: usize,
    /// Unweighted residual sum of squares over positive-weight rows.
    pub rss: f64,
}

/// Two responses fit on a shared design and weights, with the sandwich
/// cross-covariance between the coefficient vectors. Used by fuzzy
/// estimators where numerator and denominator share kernel weights.
#[derive(Debug, Clone)]
pub struct WlsPairFit {
    pub first: WlsFit,
    pub second: WlsFit,
    /// Cov(beta_first, beta_second), HC1-scaled.
    pub cross_cov: DMatrix<f64>,
}

fn cross_product(design: &DMatrix<f64>, w: &DVector<f64>) -> (DMatrix<f64>, usize) {
    let (n, p) = design.shape();
    let mut a = DMatrix::zeros(p, p);
    let mut n_eff = 0;
    for i in 0..n {
        let wi = w[i];
        if wi <= 0.0 {
            continue;
        }
        n_eff += 1;
        for j in 0..p {
            let xj = design[(i, j)] * wi;
            for k in j..p {
                a[(j, k)] += xj * design[(i, k)];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            a[(j, k)] = a[(k, j)];
        }
    }
    (a, n_eff)
}

fn condition_number(a: &DMatrix<f64>) -> f64 {
    let svd = a.clone().svd(false, false);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn solve_normal_equations(
    design: &DMatrix<f64>,
    w: &DVector<f64>,
) -> Result<(Cholesky<f64, nalgebra::Dyn>, DMatrix<f64>, usize)> {
    let p = design.ncols();
    let (a, n_eff) = cross_product(design, w);
    if n_eff < p {
        return Err(Error::SingularFit {
            condition: f64::INFINITY,
        });
    }
    match Cholesky::new(a.clone()) {
        Some(chol) => Ok((chol, a, n_eff)),
        None => Err(Error::SingularFit {
            condition: condition_number(&a),
        }),
    }
}

fn weighted_rhs(design: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    let (n, p) = design.shape();
    let mut b = DVector::zeros(p);
    for i in 0..n {
        let wi = w[i];
        if wi <= 0.0 {
            continue;
        }
        let wy = wi * y[i];
        for j in 0..p {
            b[j] += wy * design[(i, j)];
        }
    }
    b
}

/// Meat of the sandwich: Σ w_i² e_i e'_i x_i x_i' where e, e' are the two
/// residual vectors (equal for a single-response fit).
fn sandwich_meat(
    design: &DMatrix<f64>,
    w: &DVector<f64>,
    resid_a: &DVector<f64>,
    resid_b: &DVector<f64>,
) -> DMatrix<f64> {
    let (n, p) = design.shape();
    let mut m = DMatrix::zeros(p, p);
    for i in 0..n {
        let wi = w[i];
        if wi <= 0.0 {
            continue;
        }
        let s = wi * wi * resid_a[i] * resid_b[i];
        for j in 0..p {
            let xj = design[(i, j)] * s;
            for k in 0..p {
                m[(j, k)] += xj * design[(i, k)];
            }
        }
    }
    m
}

fn residuals(design: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> DVector<f64> {
    y - design * beta
}

pub(crate) fn hc1_scale(n_eff: usize, p: usize) -> f64 {
    if n_eff > p {
        n_eff as f64 / (n_eff - p) as f64
    } else {
        1.0
    }
}

/// Coefficients plus the inverted cross-product, for callers that build
/// their own sandwich terms.
pub(crate) struct Solved {
    pub beta: DVector<f64>,
    pub a_inv: DMatrix<f64>,
    pub n_eff: usize,
}

pub(crate) fn solve_core(
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<Solved> {
    let (chol, _, n_eff) = solve_normal_equations(design, w)?;
    let beta = chol.solve(&weighted_rhs(design, y, w));
    Ok(Solved {
        beta,
        a_inv: chol.inverse(),
        n_eff,
    })
}

/// Solve a weighted least-squares problem and attach the HC1 sandwich
/// covariance. Rows with nonpositive weight are ignored.
///
/// Errors with [`Error::SingularFit`] (carrying a condition-number
/// diagnostic) when the weighted design is rank deficient.
pub fn wls_solve(design: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>) -> Result<WlsFit> {
    let p = design.ncols();
    let (chol, a, n_eff) = solve_normal_equations(design, w)?;
    let _ = a;
    let beta = chol.solve(&weighted_rhs(design, y, w));
    let resid = residuals(design, y, &beta);
    let a_inv = chol.inverse();
    let meat = sandwich_meat(design, w, &resid, &resid);
    let cov = &a_inv * meat * &a_inv * hc1_scale(n_eff, p);
    let mut rss = 0.0;
    for i in 0..design.nrows() {
        if w[i] > 0.0 {
            rss += resid[i] * resid[i];
        }
    }
    Ok(WlsFit {
        beta,
        cov,
        n_eff,
        rss,
    })
}

/// Solve two responses on one design/weight set, including the HC1
/// cross-covariance between the two coefficient vectors.
pub fn wls_solve_pair(
    design: &DMatrix<f64>,
    y_first: &DVector<f64>,
    y_second: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<WlsPairFit> {
    let p = design.ncols();
    let (chol, _, n_eff) = solve_normal_equations(design, w)?;
    let a_inv = chol.inverse();
    let scale = hc1_scale(n_eff, p);

    let solve_one = |y: &DVector<f64>| -> WlsFit {
        let beta = chol.solve(&weighted_rhs(design, y, w));
        let resid = residuals(design, y, &beta);
        let meat = sandwich_meat(design, w, &resid, &resid);
        let cov = &a_inv * meat * &a_inv * scale;
        let mut rss = 0.0;
        for i in 0..design.nrows() {
            if w[i] > 0.0 {
                rss += resid[i] * resid[i];
            }
        }
        WlsFit {
            beta,
            cov,
            n_eff,
            rss,
        }
    };

    let first = solve_one(y_first);
    let second = solve_one(y_second);
    let resid_a = residuals(design, y_first, &first.beta);
    let resid_b = residuals(design, y_second, &second.beta);
    let cross_meat = sandwich_meat(design, w, &resid_a, &resid_b);
    let cross_cov = &a_inv * cross_meat * &a_inv * scale;

    Ok(WlsPairFit {
        first,
        second,
        cross_cov,
    })
}
