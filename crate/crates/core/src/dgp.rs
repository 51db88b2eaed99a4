//! Seeded synthetic data with closed-form treatment functions.
//!
//! Generated outcomes follow
//!
//! ```text
//! y = m(x1c, x2c) + t * tau(x1c, x2c) + eps
//! t ~ Bernoulli(compliance) when eligible, 0 otherwise
//! ```
//!
//! where `m` is a polynomial baseline (degree <= 3) and `tau` one of a few
//! closed-form treatment profiles, both defined on *normalized* coordinates
//! so [`true_tau`] can be read off at any boundary location. Generation is
//! a single pass over a ChaCha stream: the same seed gives a byte-identical
//! dataset.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{eligibility, AssignmentRule, CutoffSpec, Dataset, Direction};
use crate::error::{Error, Result};
use crate::estimate::BoundaryId;

/// Normal marginal for a raw running variable.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MarginalDist {
    pub mean: f64,
    pub sd: f64,
}

/// One polynomial term `coef * x1^p1 * x2^p2` of the baseline surface.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BaselineTerm {
    pub p1: u8,
    pub p2: u8,
    pub coef: f64,
}

/// Smooth baseline m(x1, x2), polynomial up to total degree 3, on
/// normalized coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineSurface {
    pub terms: Vec<BaselineTerm>,
}

impl BaselineSurface {
    pub fn constant(c: f64) -> Self {
        BaselineSurface {
            terms: vec![BaselineTerm { p1: 0, p2: 0, coef: c }],
        }
    }

    pub fn linear(c: f64, b1: f64, b2: f64) -> Self {
        BaselineSurface {
            terms: vec![
                BaselineTerm { p1: 0, p2: 0, coef: c },
                BaselineTerm { p1: 1, p2: 0, coef: b1 },
                BaselineTerm { p1: 0, p2: 1, coef: b2 },
            ],
        }
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef * x1.powi(t.p1 as i32) * x2.powi(t.p2 as i32))
            .sum()
    }

    fn validate(&self) -> Result<()> {
        for t in &self.terms {
            if t.p1 + t.p2 > 3 {
                return Err(Error::InvalidDgpConfig(format!(
                    "baseline term x1^{} x2^{} exceeds cubic degree",
                    t.p1, t.p2
                )));
            }
            if !t.coef.is_finite() {
                return Err(Error::InvalidDgpConfig("non-finite baseline coefficient".into()));
            }
        }
        Ok(())
    }
}

/// Closed-form treatment function on normalized coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TauFn {
    Constant { value: f64 },
    /// tau = intercept + slope * x2 (heterogeneity along B1).
    LinearInX2 { intercept: f64, slope: f64 },
    /// tau = intercept + slope * x1 (heterogeneity along B2).
    LinearInX1 { intercept: f64, slope: f64 },
    /// tau = level * clamp(1 - x1/top, 0, 1): full effect at the cutoff,
    /// zero at and beyond `top` in the x1 direction.
    VanishingAtTop { level: f64, top: f64 },
    /// Group-specific constant effects for multi-cutoff designs.
    GroupConstant { values: BTreeMap<String, f64> },
}

impl TauFn {
    /// Treatment effect at a point; `group` feeds the group-constant
    /// profile and falls back to the unweighted cross-group mean when no
    /// label applies.
    pub fn eval(&self, x1: f64, x2: f64, group: Option<&str>) -> f64 {
        match self {
            TauFn::Constant { value } => *value,
            TauFn::LinearInX2 { intercept, slope } => intercept + slope * x2,
            TauFn::LinearInX1 { intercept, slope } => intercept + slope * x1,
            TauFn::VanishingAtTop { level, top } => {
                level * (1.0 - x1 / top).clamp(0.0, 1.0)
            }
            TauFn::GroupConstant { values } => match group.and_then(|g| values.get(g)) {
                Some(v) => *v,
                None => values.values().sum::<f64>() / values.len() as f64,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Homoskedastic,
    /// sd scaled by (0.5 + |x1| / sd(dist1)); stress case for the robust
    /// variance estimators.
    ProportionalAbsX1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Continuous,
    Bernoulli,
}

/// Synthetic data recipe. The treatment function is the crate's ground
/// truth: every curve estimate is scored against [`true_tau`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DgpConfig {
    pub n: usize,
    pub dist1: MarginalDist,
    pub dist2: MarginalDist,
    pub rule: AssignmentRule,
    /// Sampling shares per group label; required with per-group cutoffs.
    #[serde(default)]
    pub group_shares: Option<BTreeMap<String, f64>>,
    pub baseline: BaselineSurface,
    pub tau: TauFn,
    /// Probability of take-up given eligibility.
    pub compliance: f64,
    pub noise_sd: f64,
    #[serde(default = "default_noise")]
    pub noise: NoiseKind,
    #[serde(default = "default_outcome")]
    pub outcome: OutcomeKind,
    /// Round raw scores to integers, producing repeated percentiles.
    #[serde(default)]
    pub round_scores: bool,
    pub seed: u64,
}

fn default_noise() -> NoiseKind {
    NoiseKind::Homoskedastic
}

fn default_outcome() -> OutcomeKind {
    OutcomeKind::Continuous
}

/// A config mimicking the published score moments: x1 ~ N(249.88, 43.16)
/// with cutoff 310 (upward), x2 ~ N(36.28, 18.14) with cutoff 57.21
/// (downward, wealth scale), take-up 0.59 among eligibles.
pub fn table1_config(n: usize, tau: TauFn, seed: u64) -> DgpConfig {
    DgpConfig {
        n,
        dist1: MarginalDist { mean: 249.88, sd: 43.16 },
        dist2: MarginalDist { mean: 36.28, sd: 18.14 },
        rule: AssignmentRule::new(
            310.0,
            Direction::Ge,
            CutoffSpec::Single(57.21),
            Direction::Le,
        ),
        group_shares: None,
        baseline: BaselineSurface {
            terms: vec![
                BaselineTerm { p1: 0, p2: 0, coef: 0.44 },
                BaselineTerm { p1: 1, p2: 0, coef: 0.002 },
                BaselineTerm { p1: 0, p2: 1, coef: 0.001 },
            ],
        },
        tau,
        compliance: 0.59,
        noise_sd: 0.2,
        noise: NoiseKind::Homoskedastic,
        outcome: OutcomeKind::Continuous,
        round_scores: false,
        seed,
    }
}

/// Benchmark recovery config: same score moments as [`table1_config`] but
/// cutoffs at the marginal means, full compliance, and light noise, so both
/// boundaries keep well-populated margins on each side. This is the
/// geometry for oracle-recovery checks; `table1_config` keeps the actual
/// program geometry (tail cutoff, partial take-up).
pub fn benchmark_config(n: usize, tau: TauFn, seed: u64) -> DgpConfig {
    DgpConfig {
        n,
        dist1: MarginalDist { mean: 249.88, sd: 43.16 },
        dist2: MarginalDist { mean: 36.28, sd: 18.14 },
        rule: AssignmentRule::new(
            250.0,
            Direction::Ge,
            CutoffSpec::Single(36.0),
            Direction::Le,
        ),
        group_shares: None,
        baseline: BaselineSurface {
            terms: vec![
                BaselineTerm { p1: 0, p2: 0, coef: 0.45 },
                BaselineTerm { p1: 1, p2: 0, coef: 0.002 },
                BaselineTerm { p1: 0, p2: 1, coef: 0.0015 },
                BaselineTerm { p1: 2, p2: 0, coef: 1.0e-5 },
                BaselineTerm { p1: 0, p2: 2, coef: -1.5e-5 },
            ],
        },
        tau,
        compliance: 1.0,
        noise_sd: 0.1,
        noise: NoiseKind::Homoskedastic,
        outcome: OutcomeKind::Continuous,
        round_scores: false,
        seed,
    }
}

fn group_cutoff(rule: &AssignmentRule, group: Option<&str>) -> Result<f64> {
    match &rule.cutoff2 {
        CutoffSpec::Single(c) => Ok(*c),
        CutoffSpec::PerGroup(map) => {
            let label = group.ok_or(Error::MissingGroupColumn)?;
            map.get(label)
                .copied()
                .ok_or_else(|| Error::UnresolvedGroup(label.to_string()))
        }
    }
}

struct GroupSampler {
    labels: Vec<String>,
    cumulative: Vec<f64>,
}

impl GroupSampler {
    fn new(shares: &BTreeMap<String, f64>) -> Result<Self> {
        let total: f64 = shares.values().sum();
        if shares.is_empty() || total <= 0.0 || shares.values().any(|&s| s < 0.0) {
            return Err(Error::InvalidDgpConfig("group shares must be positive".into()));
        }
        let mut labels = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for (label, share) in shares {
            acc += share / total;
            labels.push(label.clone());
            cumulative.push(acc);
        }
        Ok(GroupSampler { labels, cumulative })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> &str {
        let u: f64 = rng.gen();
        for (i, &c) in self.cumulative.iter().enumerate() {
            if u <= c {
                return &self.labels[i];
            }
        }
        self.labels.last().unwrap()
    }
}

fn validate(cfg: &DgpConfig) -> Result<()> {
    if cfg.n == 0 {
        return Err(Error::InvalidDgpConfig("n must be positive".into()));
    }
    if cfg.dist1.sd.is_nan() || cfg.dist1.sd <= 0.0 || cfg.dist2.sd.is_nan() || cfg.dist2.sd <= 0.0 {
        return Err(Error::InvalidDgpConfig("marginal sds must be positive".into()));
    }
    if !(0.0..=1.0).contains(&cfg.compliance) {
        return Err(Error::InvalidDgpConfig("compliance must lie in [0, 1]".into()));
    }
    if cfg.noise_sd < 0.0 {
        return Err(Error::InvalidDgpConfig("noise sd must be nonnegative".into()));
    }
    cfg.baseline.validate()?;
    if matches!(cfg.rule.cutoff2, CutoffSpec::PerGroup(_)) && cfg.group_shares.is_none() {
        return Err(Error::InvalidDgpConfig(
            "per-group cutoffs need group_shares".into(),
        ));
    }
    if matches!(cfg.tau, TauFn::GroupConstant { .. }) && cfg.group_shares.is_none() {
        return Err(Error::InvalidDgpConfig(
            "group-constant effects need group_shares".into(),
        ));
    }

    if cfg.outcome == OutcomeKind::Bernoulli {
        // Probe the mean surface on a sample of the support: both the
        // untreated and the treated arm must stay in [0, 1].
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
        let d1 = Normal::new(cfg.dist1.mean, cfg.dist1.sd).unwrap();
        let d2 = Normal::new(cfg.dist2.mean, cfg.dist2.sd).unwrap();
        let sampler = cfg
            .group_shares
            .as_ref()
            .map(GroupSampler::new)
            .transpose()?;
        let tol = 1e-9;
        for _ in 0..10_000 {
            let raw1 = d1.sample(&mut rng);
            let raw2 = d2.sample(&mut rng);
            let label = sampler.as_ref().map(|s| s.draw(&mut rng).to_string());
            let c2 = group_cutoff(&cfg.rule, label.as_deref())?;
            let x1 = oriented(raw1, cfg.rule.cutoff1, cfg.rule.direction1);
            let x2 = oriented(raw2, c2, cfg.rule.direction2);
            let m = cfg.baseline.eval(x1, x2);
            if !(-tol..=1.0 + tol).contains(&m) {
                return Err(Error::InvalidDgpConfig(format!(
                    "bernoulli mean {m:.4} outside [0,1] at ({x1:.2}, {x2:.2})"
                )));
            }
            if eligibility(x1, x2) == 1.0 {
                let treated = m + cfg.tau.eval(x1, x2, label.as_deref());
                if !(-tol..=1.0 + tol).contains(&treated) {
                    return Err(Error::InvalidDgpConfig(format!(
                        "treated bernoulli mean {treated:.4} outside [0,1] at ({x1:.2}, {x2:.2})"
                    )));
                }
            }
        }
    }
    Ok(())
}

fn oriented(raw: f64, cutoff: f64, direction: Direction) -> f64 {
    match direction {
        Direction::Ge => raw - cutoff,
        Direction::Le => cutoff - raw,
    }
}

/// Generate a raw-scale dataset. Deterministic given the seed; feed the
/// result through [`crate::validate_and_normalize`] with `cfg.rule` before
/// estimation.
pub fn generate(cfg: &DgpConfig) -> Result<Dataset> {
    validate(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d1 = Normal::new(cfg.dist1.mean, cfg.dist1.sd).unwrap();
    let d2 = Normal::new(cfg.dist2.mean, cfg.dist2.sd).unwrap();
    let noise = Normal::new(0.0, 1.0).unwrap();
    let sampler = cfg
        .group_shares
        .as_ref()
        .map(GroupSampler::new)
        .transpose()?;

    let mut y = Vec::with_capacity(cfg.n);
    let mut x1 = Vec::with_capacity(cfg.n);
    let mut x2 = Vec::with_capacity(cfg.n);
    let mut t = Vec::with_capacity(cfg.n);
    let mut groups: Option<Vec<String>> = sampler.as_ref().map(|_| Vec::with_capacity(cfg.n));

    for _ in 0..cfg.n {
        let mut raw1 = d1.sample(&mut rng);
        let mut raw2 = d2.sample(&mut rng);
        if cfg.round_scores {
            raw1 = raw1.round();
            raw2 = raw2.round();
        }
        let label = sampler.as_ref().map(|s| s.draw(&mut rng).to_string());
        let c2 = group_cutoff(&cfg.rule, label.as_deref())?;
        let x1c = oriented(raw1, cfg.rule.cutoff1, cfg.rule.direction1);
        let x2c = oriented(raw2, c2, cfg.rule.direction2);
        let z = eligibility(x1c, x2c);
        let ti = if z == 1.0 && rng.gen_bool(cfg.compliance) {
            1.0
        } else {
            0.0
        };
        let mean = cfg.baseline.eval(x1c, x2c) + ti * cfg.tau.eval(x1c, x2c, label.as_deref());
        let yi = match cfg.outcome {
            OutcomeKind::Continuous => {
                let sd = match cfg.noise {
                    NoiseKind::Homoskedastic => cfg.noise_sd,
                    NoiseKind::ProportionalAbsX1 => {
                        cfg.noise_sd * (0.5 + x1c.abs() / cfg.dist1.sd)
                    }
                };
                mean + sd * noise.sample(&mut rng)
            }
            OutcomeKind::Bernoulli => {
                let u: f64 = rng.gen();
                if u < mean {
                    1.0
                } else {
                    0.0
                }
            }
        };

        y.push(yi);
        x1.push(raw1);
        x2.push(raw2);
        t.push(ti);
        if let (Some(gs), Some(label)) = (groups.as_mut(), label) {
            gs.push(label);
        }
    }

    Dataset::from_columns(y, x1, x2, t, groups)
}

/// Closed-form treatment effect at a boundary point: B1 fixes x1 = 0 and
/// moves along x2 = location, B2 fixes x2 = 0 and moves along x1.
pub fn true_tau(cfg: &DgpConfig, boundary: BoundaryId, location: f64) -> f64 {
    match boundary {
        BoundaryId::B1 => cfg.tau.eval(0.0, location, None),
        BoundaryId::B2 => cfg.tau.eval(location, 0.0, None),
    }
}
