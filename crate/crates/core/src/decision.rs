//! Score thresholding at a target false positive rate.
//!
//! The decision rule is fixed as `flag iff score >= cutoff`. Candidate
//! cutoffs are the distinct score values plus a sentinel just above the
//! maximum, so an exhaustive search over candidates is exact and cheap.
//! The fitted cutoff is the smallest one whose empirical FPR stays at or
//! under the target, which maximizes TPR subject to the FPR cap.

use crate::error::{Error, Result};
use crate::synthdata::Group;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdKind {
    Global,
    Groupwise,
}

impl std::fmt::Display for ThresholdKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ThresholdKind::Global => "global",
            ThresholdKind::Groupwise => "groupwise",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub kind: ThresholdKind,
    pub target_fpr: f64,
}

impl ThresholdPolicy {
    pub fn new(kind: ThresholdKind, target_fpr: f64) -> Result<ThresholdPolicy> {
        if !(target_fpr > 0.0 && target_fpr < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "target FPR {target_fpr} outside (0, 1)"
            )));
        }
        Ok(ThresholdPolicy { kind, target_fpr })
    }
}

/// A fitted cutoff with its fitting-set diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupCutoff {
    pub cutoff: f64,
    /// FPR achieved on the fitting set; always <= the target.
    pub achieved_fpr: f64,
    /// Number of fitting-set negatives behind `achieved_fpr`.
    pub negatives: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FittedCutoffs {
    Global(GroupCutoff),
    Groupwise(BTreeMap<Group, GroupCutoff>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedThresholds {
    pub target_fpr: f64,
    pub cutoffs: FittedCutoffs,
}

impl FittedThresholds {
    pub fn kind(&self) -> ThresholdKind {
        match self.cutoffs {
            FittedCutoffs::Global(_) => ThresholdKind::Global,
            FittedCutoffs::Groupwise(_) => ThresholdKind::Groupwise,
        }
    }

    pub fn global(&self) -> Option<&GroupCutoff> {
        match &self.cutoffs {
            FittedCutoffs::Global(c) => Some(c),
            FittedCutoffs::Groupwise(_) => None,
        }
    }

    pub fn for_group(&self, group: Group) -> Option<&GroupCutoff> {
        match &self.cutoffs {
            FittedCutoffs::Global(c) => Some(c),
            FittedCutoffs::Groupwise(m) => m.get(&group),
        }
    }
}

fn check_scores(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidParameter("non-finite score".to_string()));
    }
    Ok(())
}

/// Core fit: smallest cutoff with FPR <= target under the `>=` flag rule.
fn fit_cutoff(scores: &[f64], labels: &[bool], target_fpr: f64) -> Result<GroupCutoff> {
    check_scores(scores, labels)?;
    if !(target_fpr > 0.0 && target_fpr <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target FPR {target_fpr} outside (0, 1]"
        )));
    }
    let negatives = labels.iter().filter(|&&l| !l).count() as u64;
    if negatives == 0 {
        return Err(Error::NoNegativesForFPR);
    }

    let mut pairs: Vec<(f64, bool)> = scores.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite scores"));

    // Walk distinct values ascending; neg_ge(v) falls as v rises, so the
    // first candidate within the cap is the smallest valid cutoff.
    let mut neg_ge = negatives;
    let mut i = 0;
    while i < pairs.len() {
        let v = pairs[i].0;
        let fpr = neg_ge as f64 / negatives as f64;
        if fpr <= target_fpr {
            return Ok(GroupCutoff {
                cutoff: v,
                achieved_fpr: fpr,
                negatives,
            });
        }
        while i < pairs.len() && pairs[i].0 == v {
            if !pairs[i].1 {
                neg_ge -= 1;
            }
            i += 1;
        }
    }
    // Sentinel above the maximum: flags nothing, FPR 0.
    let max = pairs.last().expect("non-empty").0;
    Ok(GroupCutoff {
        cutoff: max.next_up(),
        achieved_fpr: 0.0,
        negatives,
    })
}

/// Fits a single cutoff so the pooled FPR meets the target.
pub fn fit_global_threshold(
    scores: &[f64],
    labels: &[bool],
    target_fpr: f64,
) -> Result<FittedThresholds> {
    let cutoff = fit_cutoff(scores, labels, target_fpr)?;
    Ok(FittedThresholds {
        target_fpr,
        cutoffs: FittedCutoffs::Global(cutoff),
    })
}

/// Fits an independent cutoff per group present in `groups`, equalizing
/// group FPRs up to the granularity of each group's negative count.
pub fn fit_groupwise_thresholds(
    scores: &[f64],
    labels: &[bool],
    groups: &[Group],
    target_fpr: f64,
) -> Result<FittedThresholds> {
    check_scores(scores, labels)?;
    if groups.len() != scores.len() {
        return Err(Error::LengthMismatch(format!(
            "{} groups vs {} scores",
            groups.len(),
            scores.len()
        )));
    }
    let mut fitted = BTreeMap::new();
    for group in [Group::A, Group::B] {
        let idx: Vec<usize> = (0..groups.len()).filter(|&i| groups[i] == group).collect();
        if idx.is_empty() {
            continue;
        }
        let g_scores: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let g_labels: Vec<bool> = idx.iter().map(|&i| labels[i]).collect();
        let cutoff = fit_cutoff(&g_scores, &g_labels, target_fpr).map_err(|e| match e {
            Error::NoNegativesForFPR => Error::NoNegativesForGroup(group.as_str()),
            other => other,
        })?;
        fitted.insert(group, cutoff);
    }
    if fitted.is_empty() {
        return Err(Error::MissingGroups);
    }
    Ok(FittedThresholds {
        target_fpr,
        cutoffs: FittedCutoffs::Groupwise(fitted),
    })
}

/// Applies fitted cutoffs: decision = score >= applicable cutoff.
pub fn apply_thresholds(
    scores: &[f64],
    groups: Option<&[Group]>,
    fitted: &FittedThresholds,
) -> Result<Vec<bool>> {
    match &fitted.cutoffs {
        FittedCutoffs::Global(c) => Ok(scores.iter().map(|&s| s >= c.cutoff).collect()),
        FittedCutoffs::Groupwise(map) => {
            let groups = groups.ok_or(Error::MissingGroups)?;
            if groups.len() != scores.len() {
                return Err(Error::LengthMismatch(format!(
                    "{} groups vs {} scores",
                    groups.len(),
                    scores.len()
                )));
            }
            scores
                .iter()
                .zip(groups)
                .map(|(&s, g)| {
                    map.get(g)
                        .map(|c| s >= c.cutoff)
                        .ok_or(Error::MissingGroups)
                })
                .collect()
        }
    }
}
