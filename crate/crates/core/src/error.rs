//! Error type shared across the crate.

use thiserror::Error;

/// Side of a cutoff, used in error payloads and one-sided fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Left => write!(f, "left"),
            Side::Right => write!(f, "right"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset is empty after validation")]
    EmptyDataset,

    #[error("column `{column}` has length {found}, expected {expected}")]
    ColumnLength {
        column: &'static str,
        found: usize,
        expected: usize,
    },

    #[error("group label `{0}` does not resolve to a cutoff")]
    UnresolvedGroup(String),

    #[error("take-up must be 0 or 1, found {value} at row {row}")]
    NonBinaryTakeUp { value: f64, row: usize },

    #[error("group column required for per-group cutoffs")]
    MissingGroupColumn,

    #[error("dataset must be normalized before estimation")]
    NotNormalized,

    #[error("invalid assignment rule: {0}")]
    InvalidRule(String),

    #[error("bandwidth must be positive, got {0}")]
    NonPositiveBandwidth(f64),

    #[error("insufficient data on {side} side: {found} usable observations, need {needed}")]
    InsufficientData {
        side: Side,
        found: usize,
        needed: usize,
    },

    #[error("singular weighted design (condition number {condition:.3e})")]
    SingularFit { condition: f64 },

    #[error("weak first stage: take-up discontinuity {0:.4} is below 0.01 in magnitude")]
    WeakFirstStage(f64),

    #[error("window fraction must lie in (0, 0.5], got {0}")]
    InvalidFraction(f64),

    #[error("moving window holds {size} observations, below the engine minimum {needed}")]
    WindowTooSmall { size: usize, needed: usize },

    #[error("only {found} eligible observations on the non-fixed margin, need at least {needed}")]
    InsufficientMargin { found: usize, needed: usize },

    #[error("empty quadrant {0} in the estimation window")]
    EmptyQuadrant(&'static str),

    #[error("boundary grid spacing must be at least 5, got {0}")]
    GridSpacingTooSmall(usize),

    #[error("all {0} grid points failed; last error: {1}")]
    AllPointsFailed(usize, String),

    #[error("conditional subsample along {0} is empty")]
    EmptyConditionalSubsample(&'static str),

    #[error("invalid generator config: {0}")]
    InvalidDgpConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
