//! Dimensionality-reduction estimators: centering, conditional/univariate,
//! and multi-cutoff RD. Thin orchestrations over the engine.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bandwidth::{select_bandwidth, BandwidthPair};
use crate::data::{gather, Dataset};
use crate::discontinuity::{fuzzy_discontinuity, sharp_discontinuity};
use crate::error::{Error, Result};
use crate::estimate::{EstimateKind, RdEstimate};
use crate::kernel::KernelKind;

/// Which running variable an estimator works along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunningVar {
    X1,
    X2,
}

impl std::fmt::Display for RunningVar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunningVar::X1 => write!(f, "x1"),
            RunningVar::X2 => write!(f, "x2"),
        }
    }
}

/// Minimum centered score: the single running variable of the centering
/// approach.
pub fn centering_score(x1c: f64, x2c: f64) -> f64 {
    x1c.min(x2c)
}

fn estimate_at_zero(
    x: &[f64],
    y: &[f64],
    t: &[f64],
    kind: EstimateKind,
    kernel: KernelKind,
    bw: Option<BandwidthPair>,
) -> Result<RdEstimate> {
    let bw = match bw {
        Some(bw) => bw,
        None => select_bandwidth(x, y, 0.0, kernel)?,
    };
    match kind {
        EstimateKind::Sharp => sharp_discontinuity(x, y, 0.0, bw, kernel),
        EstimateKind::Fuzzy => fuzzy_discontinuity(x, y, t, 0.0, bw, kernel),
    }
}

/// RD on the collapsed score min(x1, x2) at zero.
pub fn centering_rd(
    ds: &Dataset,
    kind: EstimateKind,
    kernel: KernelKind,
    bw: Option<BandwidthPair>,
) -> Result<RdEstimate> {
    ds.require_normalized()?;
    let score: Vec<f64> = ds
        .x1()
        .iter()
        .zip(ds.x2())
        .map(|(&a, &b)| centering_score(a, b))
        .collect();
    estimate_at_zero(&score, ds.y(), ds.t(), kind, kernel, bw)
}

/// Univariate RD along one running variable, conditional on eligibility on
/// the other margin.
pub fn conditional_rd(
    ds: &Dataset,
    along: RunningVar,
    kind: EstimateKind,
    kernel: KernelKind,
    bw: Option<BandwidthPair>,
) -> Result<RdEstimate> {
    ds.require_normalized()?;
    let (score_col, other_col, name) = match along {
        RunningVar::X1 => (ds.x1(), ds.x2(), "x1"),
        RunningVar::X2 => (ds.x2(), ds.x1(), "x2"),
    };
    let idx: Vec<usize> = (0..ds.n()).filter(|&i| other_col[i] >= 0.0).collect();
    if idx.is_empty() {
        return Err(Error::EmptyConditionalSubsample(name));
    }
    let x = gather(score_col, &idx);
    let y = gather(ds.y(), &idx);
    let t = gather(ds.t(), &idx);
    estimate_at_zero(&x, &y, &t, kind, kernel, bw)
}

/// Per-group, pooled, and weighted estimates for a multi-cutoff second
/// margin (labels already centered group-by-group at validation).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiCutoffResult {
    pub per_group: BTreeMap<String, RdEstimate>,
    /// RD on the stacked group-centered scores: identical numbers to
    /// [`conditional_rd`] along x2.
    pub pooled: RdEstimate,
    /// Bias-corrected group estimates averaged with in-bandwidth-share
    /// weights.
    pub weighted_tau: f64,
    pub weighted_se: f64,
    /// Groups excluded from the average, with reasons.
    pub skipped: Vec<(String, String)>,
    /// Weighting scheme tag for output metadata.
    pub weighting: String,
}

/// Multi-cutoff RD along x2 conditional on x1-eligibility.
pub fn multicutoff_rd(
    ds: &Dataset,
    kind: EstimateKind,
    kernel: KernelKind,
) -> Result<MultiCutoffResult> {
    ds.require_normalized()?;
    let labels = ds.group_labels().ok_or(Error::MissingGroupColumn)?.to_vec();

    let eligible: Vec<usize> = (0..ds.n()).filter(|&i| ds.x1()[i] >= 0.0).collect();
    if eligible.is_empty() {
        return Err(Error::EmptyConditionalSubsample("x1"));
    }

    let mut per_group = BTreeMap::new();
    let mut skipped = Vec::new();
    for label in &labels {
        let idx: Vec<usize> = eligible
            .iter()
            .copied()
            .filter(|&i| ds.group_of(i) == Some(label.as_str()))
            .collect();
        let x = gather(ds.x2(), &idx);
        let y = gather(ds.y(), &idx);
        let t = gather(ds.t(), &idx);
        match estimate_at_zero(&x, &y, &t, kind, kernel, None) {
            Ok(est) => {
                per_group.insert(label.clone(), est);
            }
            Err(e) => skipped.push((label.clone(), e.to_string())),
        }
    }
    if per_group.is_empty() {
        let last = skipped
            .last()
            .map(|(_, r)| r.clone())
            .unwrap_or_else(|| "no groups".into());
        return Err(Error::AllPointsFailed(labels.len(), last));
    }

    let x = gather(ds.x2(), &eligible);
    let y = gather(ds.y(), &eligible);
    let t = gather(ds.t(), &eligible);
    let pooled = estimate_at_zero(&x, &y, &t, kind, kernel, None)?;

    // Precision-oriented weights: each group's share of in-bandwidth
    // observations.
    let total: usize = per_group.values().map(|e| e.n_left + e.n_right).sum();
    let mut weighted_tau = 0.0;
    let mut weighted_var = 0.0;
    for est in per_group.values() {
        let w = (est.n_left + est.n_right) as f64 / total as f64;
        weighted_tau += w * est.tau_bias_corrected;
        weighted_var += w * w * est.se_robust * est.se_robust;
    }

    Ok(MultiCutoffResult {
        per_group,
        pooled,
        weighted_tau,
        weighted_se: weighted_var.sqrt(),
        skipped,
        weighting: "in_bandwidth_share".to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{validate_and_normalize, AssignmentRule, CutoffSpec, Direction};
    use crate::dgp::{self, table1_config, BaselineSurface, MarginalDist, TauFn};
    use crate::estimate::EstimateKind;

    #[test]
    fn centering_score_is_min() {
        assert_eq!(centering_score(3.0, -2.0), -2.0);
        assert_eq!(centering_score(0.0, 0.0), 0.0);
        assert_eq!(crate::data::eligibility(0.0, 0.0), 1.0);
        assert_eq!(centering_score(-1.0, -4.0), -4.0);
    }

    fn normalized_from_dgp(cfg: &dgp::DgpConfig) -> Dataset {
        let raw = dgp::generate(cfg).unwrap();
        validate_and_normalize(&raw, &cfg.rule).unwrap()
    }

    #[test]
    fn constant_effect_recovered_by_centering_and_conditional() {
        let cfg = table1_config(50_000, TauFn::Constant { value: 0.3 }, 101);
        let ds = normalized_from_dgp(&cfg);
        let kinds = [
            centering_rd(&ds, EstimateKind::Sharp, KernelKind::Triangular, None).unwrap(),
            conditional_rd(&ds, RunningVar::X1, EstimateKind::Sharp, KernelKind::Triangular, None)
                .unwrap(),
            conditional_rd(&ds, RunningVar::X2, EstimateKind::Sharp, KernelKind::Triangular, None)
                .unwrap(),
        ];
        // Sharp estimates see the ITT jump: compliance * tau.
        let itt = 0.59 * 0.3;
        for est in &kinds {
            assert!(
                (est.tau_bias_corrected - itt).abs() < 0.03,
                "sharp {} vs {itt}",
                est.tau_bias_corrected
            );
        }
        let fuzzy =
            conditional_rd(&ds, RunningVar::X2, EstimateKind::Fuzzy, KernelKind::Triangular, None)
                .unwrap();
        assert!((fuzzy.tau_bias_corrected - 0.3).abs() < 0.03);
    }

    #[test]
    fn null_effect_within_two_se() {
        let cfg = table1_config(30_000, TauFn::Constant { value: 0.0 }, 55);
        let ds = normalized_from_dgp(&cfg);
        let est =
            conditional_rd(&ds, RunningVar::X1, EstimateKind::Sharp, KernelKind::Triangular, None)
                .unwrap();
        assert!(est.tau_bias_corrected.abs() < 2.0 * est.se_robust);
    }

    #[test]
    fn centering_degenerates_to_conditional_when_other_margin_never_binds() {
        // x2 >= max(x1, 0) everywhere: min(x1, x2) = x1 and the conditional
        // subsample is the full sample, so the two calls see identical
        // numbers.
        let mut cfg = table1_config(20_000, TauFn::Constant { value: 0.25 }, 77);
        cfg.compliance = 1.0;
        let raw = dgp::generate(&cfg).unwrap();
        let ds0 = validate_and_normalize(&raw, &cfg.rule).unwrap();
        let x2_dom: Vec<f64> = ds0
            .x1()
            .iter()
            .map(|&v| v.abs() + 1.0)
            .collect();
        let rebuilt = Dataset::from_columns(
            ds0.y().to_vec(),
            ds0.x1().to_vec(),
            x2_dom,
            ds0.t().to_vec(),
            None,
        )
        .unwrap();
        let ds = validate_and_normalize(&rebuilt, &AssignmentRule::identity()).unwrap();

        let cen = centering_rd(&ds, EstimateKind::Sharp, KernelKind::Triangular, None).unwrap();
        let con =
            conditional_rd(&ds, RunningVar::X1, EstimateKind::Sharp, KernelKind::Triangular, None)
                .unwrap();
        assert_eq!(cen.tau_conventional, con.tau_conventional);
        assert_eq!(cen.tau_bias_corrected, con.tau_bias_corrected);
        assert_eq!(cen.se_robust, con.se_robust);
        assert_eq!(cen.h, con.h);
    }

    #[test]
    fn fuzzy_times_first_stage_is_sharp_itt() {
        let cfg = table1_config(30_000, TauFn::Constant { value: 0.3 }, 31);
        let ds = normalized_from_dgp(&cfg);
        let bw = select_bandwidth(
            &ds.x2()
                .iter()
                .zip(ds.x1())
                .filter(|(_, &o)| o >= 0.0)
                .map(|(&v, _)| v)
                .collect::<Vec<_>>(),
            &ds.y()
                .iter()
                .zip(ds.x1())
                .filter(|(_, &o)| o >= 0.0)
                .map(|(&v, _)| v)
                .collect::<Vec<_>>(),
            0.0,
            KernelKind::Triangular,
        )
        .unwrap();
        let sharp = conditional_rd(
            &ds,
            RunningVar::X2,
            EstimateKind::Sharp,
            KernelKind::Triangular,
            Some(bw),
        )
        .unwrap();
        let fuzzy = conditional_rd(
            &ds,
            RunningVar::X2,
            EstimateKind::Fuzzy,
            KernelKind::Triangular,
            Some(bw),
        )
        .unwrap();
        let recon = fuzzy.tau_conventional * fuzzy.first_stage.unwrap();
        assert!(
            (recon - sharp.tau_conventional).abs() <= 1e-12 * sharp.tau_conventional.abs().max(1.0)
        );
    }

    fn three_group_config(n: usize, seed: u64) -> dgp::DgpConfig {
        let mut cutoffs = BTreeMap::new();
        cutoffs.insert("main".to_string(), 57.21);
        cutoffs.insert("urban".to_string(), 56.32);
        cutoffs.insert("rural".to_string(), 40.75);
        let mut shares = BTreeMap::new();
        shares.insert("main".to_string(), 0.5);
        shares.insert("urban".to_string(), 0.3);
        shares.insert("rural".to_string(), 0.2);
        let mut effects = BTreeMap::new();
        effects.insert("main".to_string(), 0.36);
        effects.insert("urban".to_string(), 0.20);
        effects.insert("rural".to_string(), 0.18);
        dgp::DgpConfig {
            n,
            dist1: MarginalDist { mean: 249.88, sd: 43.16 },
            dist2: MarginalDist { mean: 36.28, sd: 18.14 },
            rule: AssignmentRule::new(
                // Lower first cutoff so each group keeps a healthy eligible margin.
                250.0,
                Direction::Ge,
                CutoffSpec::PerGroup(cutoffs),
                Direction::Le,
            ),
            group_shares: Some(shares),
            baseline: BaselineSurface::linear(0.44, 0.002, 0.001),
            tau: TauFn::GroupConstant { values: effects },
            compliance: 1.0,
            noise_sd: 0.2,
            noise: dgp::NoiseKind::Homoskedastic,
            outcome: dgp::OutcomeKind::Continuous,
            round_scores: false,
            seed,
        }
    }

    #[test]
    fn multicutoff_pooled_equals_conditional_and_weighted_is_convex() {
        let cfg = three_group_config(60_000, 404);
        let ds = normalized_from_dgp(&cfg);
        let res = multicutoff_rd(&ds, EstimateKind::Sharp, KernelKind::Triangular).unwrap();
        let cond =
            conditional_rd(&ds, RunningVar::X2, EstimateKind::Sharp, KernelKind::Triangular, None)
                .unwrap();
        assert_eq!(res.pooled.tau_bias_corrected, cond.tau_bias_corrected);
        assert_eq!(res.pooled.se_robust, cond.se_robust);

        let taus: Vec<f64> = res.per_group.values().map(|e| e.tau_bias_corrected).collect();
        let lo = taus.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = taus.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(res.weighted_tau >= lo && res.weighted_tau <= hi);
        assert_eq!(res.per_group.len(), 3);
        assert!(res.skipped.is_empty());
    }

    #[test]
    fn three_group_effects_recovered() {
        let cfg = three_group_config(100_000, 505);
        let ds = normalized_from_dgp(&cfg);
        let res = multicutoff_rd(&ds, EstimateKind::Sharp, KernelKind::Triangular).unwrap();
        for (label, truth) in [("main", 0.36), ("urban", 0.20), ("rural", 0.18)] {
            let est = &res.per_group[label];
            assert!(
                (est.tau_bias_corrected - truth).abs() < 0.04,
                "{label}: {} vs {truth}",
                est.tau_bias_corrected
            );
        }
    }

    #[test]
    fn single_group_collapses_per_group_pooled_weighted() {
        let mut cutoffs = BTreeMap::new();
        cutoffs.insert("main".to_string(), 57.21);
        let mut shares = BTreeMap::new();
        shares.insert("main".to_string(), 1.0);
        let mut cfg = table1_config(20_000, TauFn::Constant { value: 0.3 }, 61);
        cfg.rule.cutoff2 = CutoffSpec::PerGroup(cutoffs);
        cfg.group_shares = Some(shares);
        let ds = normalized_from_dgp(&cfg);
        let res = multicutoff_rd(&ds, EstimateKind::Sharp, KernelKind::Triangular).unwrap();
        let only = res.per_group.values().next().unwrap();
        assert_eq!(only.tau_bias_corrected, res.pooled.tau_bias_corrected);
        assert_eq!(res.weighted_tau, only.tau_bias_corrected);
    }
}
