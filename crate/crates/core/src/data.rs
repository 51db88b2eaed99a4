//! Columnar dataset, assignment-rule semantics, and load-time diagnostics.
//!
//! Estimators consume a *normalized* dataset: both running variables are
//! centered at their (group-specific) cutoffs and sign-flipped where
//! crossing downward grants eligibility, so that eligibility is always
//! `1{x1 >= 0 and x2 >= 0}`. Exact-cutoff ties are treated (the indicator
//! uses >=); tie counts are reported in the diagnostics because real score
//! data lands exactly on cutoffs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether crossing the cutoff upward (>=) or downward (<=) grants
/// eligibility on a margin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Ge,
    Le,
}

/// A single cutoff or a per-group cutoff map for the second margin.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CutoffSpec {
    Single(f64),
    PerGroup(BTreeMap<String, f64>),
}

impl CutoffSpec {
    fn is_finite(&self) -> bool {
        match self {
            CutoffSpec::Single(c) => c.is_finite(),
            CutoffSpec::PerGroup(m) => !m.is_empty() && m.values().all(|c| c.is_finite()),
        }
    }
}

/// Per-variable cutoffs and directions defining the assignment rule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssignmentRule {
    pub cutoff1: f64,
    pub direction1: Direction,
    pub cutoff2: CutoffSpec,
    pub direction2: Direction,
    /// When false, columns are left untransformed and only the eligibility
    /// column is computed from the oriented comparisons.
    pub normalize: bool,
}

impl AssignmentRule {
    pub fn new(cutoff1: f64, direction1: Direction, cutoff2: CutoffSpec, direction2: Direction) -> Self {
        AssignmentRule {
            cutoff1,
            direction1,
            cutoff2,
            direction2,
            normalize: true,
        }
    }

    /// Rule for data that is already centered and oriented.
    pub fn identity() -> Self {
        AssignmentRule::new(0.0, Direction::Ge, CutoffSpec::Single(0.0), Direction::Ge)
    }
}

fn orient(raw: f64, cutoff: f64, direction: Direction) -> f64 {
    match direction {
        Direction::Ge => raw - cutoff,
        Direction::Le => cutoff - raw,
    }
}

/// Eligibility on normalized coordinates: 1 iff both margins are met,
/// with ties at the cutoff treated.
pub fn eligibility(x1: f64, x2: f64) -> f64 {
    if x1 >= 0.0 && x2 >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Validation and normalization diagnostics carried by the dataset.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Rows in the raw input.
    pub n_input: usize,
    /// Rows dropped for a missing value in any required column.
    pub dropped_missing: usize,
    /// Observations exactly at the first cutoff after centering.
    pub ties_x1: usize,
    /// Observations exactly at the second cutoff after centering.
    pub ties_x2: usize,
    /// Count of t = 1 among ineligible rows. Nonzero values violate the
    /// one-sided non-compliance assumption; flagged, not fatal.
    pub two_sided_noncompliance: usize,
    /// Mean take-up among eligible rows, when any are eligible.
    pub compliance_share_eligible: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GroupColumn {
    /// Distinct labels, sorted.
    labels: Vec<String>,
    /// Per-row index into `labels`.
    codes: Vec<u32>,
}

/// Immutable columnar observations. Built raw, then passed through
/// [`validate_and_normalize`]; all estimators require the normalized form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    y: Vec<f64>,
    x1: Vec<f64>,
    x2: Vec<f64>,
    t: Vec<f64>,
    group: Option<GroupColumn>,
    z: Option<Vec<f64>>,
    normalized: bool,
    diagnostics: Diagnostics,
}

impl Dataset {
    /// Assemble a raw dataset from columns. Missing values are NaN. Only
    /// column lengths are checked here; content checks happen at
    /// validation.
    pub fn from_columns(
        y: Vec<f64>,
        x1: Vec<f64>,
        x2: Vec<f64>,
        t: Vec<f64>,
        group: Option<Vec<String>>,
    ) -> Result<Self> {
        let n = y.len();
        for (name, len) in [("x1", x1.len()), ("x2", x2.len()), ("t", t.len())] {
            if len != n {
                return Err(Error::ColumnLength {
                    column: name,
                    found: len,
                    expected: n,
                });
            }
        }
        let group = match group {
            None => None,
            Some(labels_raw) => {
                if labels_raw.len() != n {
                    return Err(Error::ColumnLength {
                        column: "group",
                        found: labels_raw.len(),
                        expected: n,
                    });
                }
                let mut labels: Vec<String> = labels_raw.to_vec();
                labels.sort();
                labels.dedup();
                let index: BTreeMap<&str, u32> = labels
                    .iter()
                    .enumerate()
                    .map(|(i, l)| (l.as_str(), i as u32))
                    .collect();
                let codes = labels_raw.iter().map(|l| index[l.as_str()]).collect();
                Some(GroupColumn { labels, codes })
            }
        };
        Ok(Dataset {
            y,
            x1,
            x2,
            t,
            group,
            z: None,
            normalized: false,
            diagnostics: Diagnostics::default(),
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x1(&self) -> &[f64] {
        &self.x1
    }

    pub fn x2(&self) -> &[f64] {
        &self.x2
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    /// Eligibility column; present after validation.
    pub fn z(&self) -> Option<&[f64]> {
        self.z.as_deref()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diagnostics
    }

    /// Distinct group labels (sorted), when a group column exists.
    pub fn group_labels(&self) -> Option<&[String]> {
        self.group.as_ref().map(|g| g.labels.as_slice())
    }

    pub fn group_of(&self, row: usize) -> Option<&str> {
        self.group
            .as_ref()
            .map(|g| g.labels[g.codes[row] as usize].as_str())
    }

    pub(crate) fn require_normalized(&self) -> Result<()> {
        if self.normalized {
            Ok(())
        } else {
            Err(Error::NotNormalized)
        }
    }
}

/// Take the rows of `col` named by `idx`.
pub(crate) fn gather(col: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| col[i]).collect()
}

/// Validate a raw dataset against an assignment rule, drop rows with
/// missing values (counted), center/orient the running variables so
/// eligibility is `1{x1 >= 0 and x2 >= 0}`, and attach the eligibility
/// column and diagnostics.
pub fn validate_and_normalize(raw: &Dataset, rule: &AssignmentRule) -> Result<Dataset> {
    if !rule.cutoff1.is_finite() || !rule.cutoff2.is_finite() {
        return Err(Error::InvalidRule(
            "cutoffs must be finite".to_string(),
        ));
    }
    if raw.n() == 0 {
        return Err(Error::EmptyDataset);
    }

    // Per-group cutoffs need a resolvable group for every row.
    let group_cutoff = |row: usize| -> Result<f64> {
        match &rule.cutoff2 {
            CutoffSpec::Single(c) => Ok(*c),
            CutoffSpec::PerGroup(map) => {
                let label = raw.group_of(row).ok_or(Error::MissingGroupColumn)?;
                map.get(label)
                    .copied()
                    .ok_or_else(|| Error::UnresolvedGroup(label.to_string()))
            }
        }
    };

    let n_input = raw.n();
    let mut kept = Vec::with_capacity(n_input);
    let mut dropped_missing = 0;
    for i in 0..n_input {
        let vals = [raw.y[i], raw.x1[i], raw.x2[i], raw.t[i]];
        if vals.iter().any(|v| !v.is_finite()) {
            dropped_missing += 1;
            continue;
        }
        if raw.t[i] != 0.0 && raw.t[i] != 1.0 {
            return Err(Error::NonBinaryTakeUp {
                value: raw.t[i],
                row: i,
            });
        }
        kept.push(i);
    }
    if kept.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut y = Vec::with_capacity(kept.len());
    let mut x1 = Vec::with_capacity(kept.len());
    let mut x2 = Vec::with_capacity(kept.len());
    let mut t = Vec::with_capacity(kept.len());
    let mut z = Vec::with_capacity(kept.len());
    let mut group_rows = Vec::with_capacity(kept.len());
    let mut ties_x1 = 0;
    let mut ties_x2 = 0;
    let mut two_sided = 0;
    let mut eligible = 0usize;
    let mut takeup_eligible = 0.0;

    for &i in &kept {
        let c2 = group_cutoff(i)?;
        let (v1, v2) = if rule.normalize {
            (
                orient(raw.x1[i], rule.cutoff1, rule.direction1),
                orient(raw.x2[i], c2, rule.direction2),
            )
        } else {
            (raw.x1[i], raw.x2[i])
        };
        // Eligibility always follows the oriented comparison, transformed
        // columns or not.
        let o1 = orient(raw.x1[i], rule.cutoff1, rule.direction1);
        let o2 = orient(raw.x2[i], c2, rule.direction2);
        let zi = eligibility(o1, o2);

        if o1 == 0.0 {
            ties_x1 += 1;
        }
        if o2 == 0.0 {
            ties_x2 += 1;
        }
        if raw.t[i] == 1.0 && zi == 0.0 {
            two_sided += 1;
        }
        if zi == 1.0 {
            eligible += 1;
            takeup_eligible += raw.t[i];
        }

        y.push(raw.y[i]);
        x1.push(v1);
        x2.push(v2);
        t.push(raw.t[i]);
        z.push(zi);
        if raw.group.is_some() {
            group_rows.push(raw.group_of(i).unwrap().to_string());
        }
    }

    let diagnostics = Diagnostics {
        n_input,
        dropped_missing,
        ties_x1,
        ties_x2,
        two_sided_noncompliance: two_sided,
        compliance_share_eligible: if eligible > 0 {
            Some(takeup_eligible / eligible as f64)
        } else {
            None
        },
    };

    let group = if raw.group.is_some() { Some(group_rows) } else { None };
    let mut out = Dataset::from_columns(y, x1, x2, t, group)?;
    out.z = Some(z);
    out.normalized = rule.normalize;
    out.diagnostics = diagnostics;
    Ok(out)
}
