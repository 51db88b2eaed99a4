//! Kernel weight functions and the boundary local-linear constants derived
//! from their one-sided moments.
//!
//! All three kernels are symmetric, nonnegative, and supported on [-1, 1].
//! The bandwidth selector and the bias correction need two constants per
//! kernel, both computed from the one-sided moments
//! `mu_j = ∫_0^1 u^j K(u) du` and `nu_j = ∫_0^1 u^j K(u)^2 du`:
//!
//! ```text
//! C_b = e0' S^-1 (mu2, mu3)'        leading bias constant of the intercept
//! C_v = e0' S^-1 Sn S^-1 e0         asymptotic variance constant
//! C_K = (C_v / C_b^2)^(1/5)         plug-in bandwidth constant
//! ```
//!
//! with `S = [[mu0, mu1], [mu1, mu2]]` and `Sn = [[nu0, nu1], [nu1, nu2]]`.
//! For the triangular kernel this yields C_K = 480^(1/5) ≈ 3.4375, the
//! familiar plug-in constant.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    #[default]
    Triangular,
    Uniform,
    Epanechnikov,
}

/// Kernel weight at scaled distance `u`. Zero outside [-1, 1].
pub fn kernel_weight(u: f64, kind: KernelKind) -> f64 {
    let a = u.abs();
    if a > 1.0 {
        return 0.0;
    }
    match kind {
        KernelKind::Triangular => 1.0 - a,
        KernelKind::Uniform => 0.5,
        KernelKind::Epanechnikov => 0.75 * (1.0 - u * u),
    }
}

impl KernelKind {
    /// One-sided moments (mu0..mu3, nu0..nu2), exact rationals.
    fn one_sided_moments(self) -> ([f64; 4], [f64; 3]) {
        match self {
            KernelKind::Triangular => (
                [1.0 / 2.0, 1.0 / 6.0, 1.0 / 12.0, 1.0 / 20.0],
                [1.0 / 3.0, 1.0 / 12.0, 1.0 / 30.0],
            ),
            KernelKind::Uniform => (
                [1.0 / 2.0, 1.0 / 4.0, 1.0 / 6.0, 1.0 / 8.0],
                [1.0 / 4.0, 1.0 / 8.0, 1.0 / 12.0],
            ),
            KernelKind::Epanechnikov => (
                [1.0 / 2.0, 3.0 / 16.0, 1.0 / 10.0, 1.0 / 16.0],
                [3.0 / 10.0, 3.0 / 32.0, 3.0 / 70.0],
            ),
        }
    }

    /// Leading bias constant of the one-sided local-linear intercept:
    /// bias ≈ (h²/2) · C_b · m''(0±). Identical on both sides by symmetry.
    pub(crate) fn boundary_bias_constant(self) -> f64 {
        let ([m0, m1, m2, m3], _) = self.one_sided_moments();
        let det = m0 * m2 - m1 * m1;
        // e0' S^-1 = (m2, -m1) / det
        (m2 * m2 - m1 * m3) / det
    }

    /// Asymptotic variance constant of the one-sided intercept:
    /// var ≈ C_v · σ² / (f(0) · n · h).
    pub(crate) fn boundary_variance_constant(self) -> f64 {
        let ([m0, m1, m2, _], [n0, n1, n2]) = self.one_sided_moments();
        let det = m0 * m2 - m1 * m1;
        let v0 = m2 / det;
        let v1 = -m1 / det;
        v0 * (n0 * v0 + n1 * v1) + v1 * (n1 * v0 + n2 * v1)
    }

    /// MSE plug-in constant C_K = (C_v / C_b²)^(1/5).
    pub(crate) fn plugin_constant(self) -> f64 {
        let cb = self.boundary_bias_constant();
        let cv = self.boundary_variance_constant();
        (cv / (cb * cb)).powf(0.2)
    }
}

impl std::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelKind::Triangular => write!(f, "triangular"),
            KernelKind::Uniform => write!(f, "uniform"),
            KernelKind::Epanechnikov => write!(f, "epanechnikov"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const KINDS: [KernelKind; 3] = [
        KernelKind::Triangular,
        KernelKind::Uniform,
        KernelKind::Epanechnikov,
    ];

    #[test]
    fn pointwise_values() {
        assert_eq!(kernel_weight(0.0, KernelKind::Triangular), 1.0);
        assert_eq!(kernel_weight(0.5, KernelKind::Triangular), 0.5);
        assert_eq!(kernel_weight(0.0, KernelKind::Uniform), 0.5);
        assert_eq!(kernel_weight(0.0, KernelKind::Epanechnikov), 0.75);
        for kind in KINDS {
            assert_eq!(kernel_weight(1.5, kind), 0.0);
            assert_eq!(kernel_weight(-1.5, kind), 0.0);
        }
    }

    #[test]
    fn nonnegative_symmetric_compact_on_grid() {
        for kind in KINDS {
            for i in -40..=40 {
                let u = i as f64 * 0.05;
                let w = kernel_weight(u, kind);
                assert!(w >= 0.0, "{kind} negative at {u}");
                assert_eq!(w, kernel_weight(-u, kind), "{kind} asymmetric at {u}");
                if u.abs() > 1.0 {
                    assert_eq!(w, 0.0, "{kind} nonzero outside support at {u}");
                }
            }
        }
    }

    #[test]
    fn plugin_constants_match_literature() {
        // Triangular: (C_v/C_b²) = (24/5)/(1/100) = 480, C_K = 480^(1/5) ≈ 3.4375.
        assert_relative_eq!(
            KernelKind::Triangular.plugin_constant(),
            480f64.powf(0.2),
            epsilon = 1e-12
        );
        assert!((KernelKind::Triangular.plugin_constant() - 3.4375).abs() < 1e-3);
        // Uniform: C_v = 4, C_b = -1/6, C_K = 144^(1/5) ≈ 2.702.
        assert_relative_eq!(
            KernelKind::Uniform.plugin_constant(),
            144f64.powf(0.2),
            epsilon = 1e-12
        );
        assert!((KernelKind::Uniform.plugin_constant() - 2.702).abs() < 1e-3);
        // Epanechnikov: ≈ 3.1998.
        assert!((KernelKind::Epanechnikov.plugin_constant() - 3.1998).abs() < 1e-3);
    }

    #[test]
    fn bias_constants() {
        assert_relative_eq!(
            KernelKind::Triangular.boundary_bias_constant(),
            -0.1,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            KernelKind::Uniform.boundary_bias_constant(),
            -1.0 / 6.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            KernelKind::Epanechnikov.boundary_bias_constant(),
            -11.0 / 95.0,
            epsilon = 1e-14
        );
    }
}
