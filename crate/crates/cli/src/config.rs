//! Run configuration: TOML with an explicit schema version. Unknown keys
//! are errors, not warnings, so typos in estimator names or field names
//! cannot silently change a run.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use rdbound::boundary::{TrimRule, ZajoncRule};
use rdbound::classic::RunningVar;
use rdbound::data::{CutoffSpec, Direction};
use rdbound::dgp::DgpConfig;
use rdbound::{AssignmentRule, EstimateKind, KernelKind};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorSel {
    Centering,
    ConditionalX1,
    ConditionalX2,
    Multicutoff,
    Flexible,
    Papay,
    Zajonc,
}

impl EstimatorSel {
    pub fn parse(name: &str) -> Result<Self, CliError> {
        match name {
            "centering" => Ok(Self::Centering),
            "conditional-x1" => Ok(Self::ConditionalX1),
            "conditional-x2" => Ok(Self::ConditionalX2),
            "multicutoff" => Ok(Self::Multicutoff),
            "flexible" => Ok(Self::Flexible),
            "papay" => Ok(Self::Papay),
            "zajonc" => Ok(Self::Zajonc),
            other => Err(CliError::Config(format!("unknown estimator `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Centering => "centering",
            Self::ConditionalX1 => "conditional-x1",
            Self::ConditionalX2 => "conditional-x2",
            Self::Multicutoff => "multicutoff",
            Self::Flexible => "flexible",
            Self::Papay => "papay",
            Self::Zajonc => "zajonc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KindSel {
    Sharp,
    Fuzzy,
    #[default]
    Both,
}

impl KindSel {
    pub fn kinds(self) -> Vec<EstimateKind> {
        match self {
            KindSel::Sharp => vec![EstimateKind::Sharp],
            KindSel::Fuzzy => vec![EstimateKind::Fuzzy],
            KindSel::Both => vec![EstimateKind::Sharp, EstimateKind::Fuzzy],
        }
    }
}

/// Column-name mapping for CSV input; unspecified names use the defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMap {
    #[serde(default = "default_y")]
    pub y: String,
    #[serde(default = "default_x1")]
    pub x1: String,
    #[serde(default = "default_x2")]
    pub x2: String,
    #[serde(default = "default_t")]
    pub t: String,
    /// Group column; loaded when present in the header, required when the
    /// rule carries per-group cutoffs.
    #[serde(default = "default_group")]
    pub group: String,
}

fn default_y() -> String {
    "y".into()
}
fn default_x1() -> String {
    "x1".into()
}
fn default_x2() -> String {
    "x2".into()
}
fn default_t() -> String {
    "t".into()
}
fn default_group() -> String {
    "group".into()
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            y: default_y(),
            x1: default_x1(),
            x2: default_x2(),
            t: default_t(),
            group: default_group(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputBlock {
    pub path: PathBuf,
    #[serde(default)]
    pub columns: ColumnMap,
}

/// Assignment-rule block for CSV inputs (simulated runs carry the rule
/// inside the generator block).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleBlock {
    pub cutoff1: f64,
    pub direction1: Direction,
    #[serde(default)]
    pub cutoff2: Option<f64>,
    #[serde(default)]
    pub cutoff2_by_group: Option<BTreeMap<String, f64>>,
    pub direction2: Direction,
}

impl RuleBlock {
    pub fn to_rule(&self) -> Result<AssignmentRule, CliError> {
        let cutoff2 = match (&self.cutoff2, &self.cutoff2_by_group) {
            (Some(c), None) => CutoffSpec::Single(*c),
            (None, Some(map)) => CutoffSpec::PerGroup(map.clone()),
            _ => {
                return Err(CliError::Config(
                    "rule needs exactly one of cutoff2 / cutoff2_by_group".into(),
                ))
            }
        };
        Ok(AssignmentRule::new(
            self.cutoff1,
            self.direction1,
            cutoff2,
            self.direction2,
        ))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorBlock {
    pub run: Vec<EstimatorSel>,
    #[serde(default)]
    pub kind: KindSel,
    #[serde(default = "default_fraction")]
    pub fraction: f64,
    #[serde(default)]
    pub kernel: KernelKind,
    #[serde(default = "default_zajonc_rule")]
    pub zajonc_rule: ZajoncRule,
    #[serde(default = "default_zajonc_grid")]
    pub zajonc_grid: usize,
    /// Zajonc tail trimming; defaults to the se-based rule.
    #[serde(default)]
    pub trim: Option<TrimRule>,
    /// Manual main bandwidth for the classic estimators.
    #[serde(default)]
    pub h: Option<f64>,
    /// Manual pilot bandwidth (needs h).
    #[serde(default)]
    pub b: Option<f64>,
    /// Manual window bandwidths for the interaction surface.
    #[serde(default)]
    pub papay_h1: Option<f64>,
    #[serde(default)]
    pub papay_h2: Option<f64>,
    /// Manual per-variable bandwidths for the bivariate estimator
    /// (zajonc_rule = "manual").
    #[serde(default)]
    pub zajonc_h1: Option<f64>,
    #[serde(default)]
    pub zajonc_h2: Option<f64>,
}

fn default_fraction() -> f64 {
    0.10
}
fn default_zajonc_rule() -> ZajoncRule {
    ZajoncRule::Mean
}
fn default_zajonc_grid() -> usize {
    20
}

impl Default for EstimatorBlock {
    fn default() -> Self {
        EstimatorBlock {
            run: vec![],
            kind: KindSel::default(),
            fraction: default_fraction(),
            kernel: KernelKind::default(),
            zajonc_rule: default_zajonc_rule(),
            zajonc_grid: default_zajonc_grid(),
            trim: None,
            h: None,
            b: None,
            papay_h1: None,
            papay_h2: None,
            zajonc_h1: None,
            zajonc_h2: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: PathBuf,
}

/// Top-level run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub input: Option<InputBlock>,
    #[serde(default)]
    pub dgp: Option<DgpConfig>,
    #[serde(default)]
    pub rule: Option<RuleBlock>,
    #[serde(default)]
    pub estimators: EstimatorBlock,
    #[serde(default)]
    pub output: Option<OutputBlock>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        match (&self.input, &self.dgp) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "config has both [input] and [dgp]; pick one".into(),
                ))
            }
            (None, None) => {
                return Err(CliError::Config("config needs [input] or [dgp]".into()))
            }
            (Some(_), None) if self.rule.is_none() => {
                return Err(CliError::Config("[input] runs need a [rule] block".into()))
            }
            _ => {}
        }
        if self.estimators.run.is_empty() {
            return Err(CliError::Config("select at least one estimator".into()));
        }
        if !(self.estimators.fraction > 0.0 && self.estimators.fraction <= 0.5) {
            return Err(CliError::Config(format!(
                "fraction must lie in (0, 0.5], got {}",
                self.estimators.fraction
            )));
        }
        if self.estimators.b.is_some() && self.estimators.h.is_none() {
            return Err(CliError::Config("manual b needs manual h".into()));
        }
        Ok(())
    }

    /// The assignment rule driving normalization: [rule] for CSV input,
    /// the generator's rule otherwise.
    pub fn rule(&self) -> Result<AssignmentRule, CliError> {
        if let Some(block) = &self.rule {
            block.to_rule()
        } else if let Some(dgp) = &self.dgp {
            Ok(dgp.rule.clone())
        } else {
            Err(CliError::Config("no rule available".into()))
        }
    }

    pub fn seed(&self) -> Option<u64> {
        self.dgp.as_ref().map(|d| d.seed)
    }
}

pub fn running_var_of(sel: EstimatorSel) -> Option<RunningVar> {
    match sel {
        EstimatorSel::ConditionalX1 => Some(RunningVar::X1),
        EstimatorSel::ConditionalX2 => Some(RunningVar::X2),
        _ => None,
    }
}
