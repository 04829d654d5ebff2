//! Confusion-based performance and fairness metrics.
//!
//! Group error-rate ratios are reported in log2, with predictive equality
//! judged against the 0.8/1.25 band. Ratios with a zero or undefined rate
//! on either side are flagged undefined rather than dropped or infinite.
//! Every report records whether it was computed against true or observed
//! labels; the gap between the two views is the whole point of the
//! selective-label experiments.

use crate::decision;
use crate::error::{Error, Result};
use crate::synthdata::Group;
use serde::{Deserialize, Serialize};

/// Half-width of the predictive-equality band: log2(1.25).
pub fn predictive_equality_band() -> f64 {
    1.25f64.log2()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.fp + self.tn
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn tpr(&self) -> Option<f64> {
        ratio(self.tp, self.positives())
    }

    pub fn fpr(&self) -> Option<f64> {
        ratio(self.fp, self.negatives())
    }

    pub fn fnr(&self) -> Option<f64> {
        ratio(self.fn_, self.positives())
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupConfusion {
    pub group_a: Counts,
    pub group_b: Counts,
    pub global: Counts,
}

impl GroupConfusion {
    pub fn for_group(&self, group: Group) -> &Counts {
        match group {
            Group::A => &self.group_a,
            Group::B => &self.group_b,
        }
    }
}

/// Which label column a metric run was evaluated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    TrueLabels,
    ObservedLabels,
}

impl std::fmt::Display for LabelSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LabelSource::TrueLabels => "true_labels",
            LabelSource::ObservedLabels => "observed_labels",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub precision: Option<f64>,
}

impl GroupRates {
    fn from_counts(c: &Counts) -> GroupRates {
        GroupRates {
            tpr: c.tpr(),
            fpr: c.fpr(),
            fnr: c.fnr(),
            precision: c.precision(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub evaluated_against: LabelSource,
    pub confusion: GroupConfusion,
    pub global_tpr: Option<f64>,
    pub global_fpr: Option<f64>,
    pub group_a: GroupRates,
    pub group_b: GroupRates,
    /// log2 of the A-over-B rate ratios; None whenever either rate is
    /// zero or undefined.
    pub log2_fpr_ratio: Option<f64>,
    pub log2_fnr_ratio: Option<f64>,
    pub log2_precision_ratio: Option<f64>,
    pub predictive_equality_pass: bool,
}

/// Exact confusion counts, globally and per group.
pub fn confusion(decisions: &[bool], labels: &[bool], groups: &[Group]) -> Result<GroupConfusion> {
    if decisions.len() != labels.len() || decisions.len() != groups.len() {
        return Err(Error::LengthMismatch(format!(
            "{} decisions, {} labels, {} groups",
            decisions.len(),
            labels.len(),
            groups.len()
        )));
    }
    let mut conf = GroupConfusion {
        group_a: Counts::default(),
        group_b: Counts::default(),
        global: Counts::default(),
    };
    for i in 0..decisions.len() {
        let cell = match groups[i] {
            Group::A => &mut conf.group_a,
            Group::B => &mut conf.group_b,
        };
        match (decisions[i], labels[i]) {
            (true, true) => cell.tp += 1,
            (true, false) => cell.fp += 1,
            (false, false) => cell.tn += 1,
            (false, true) => cell.fn_ += 1,
        }
    }
    conf.global = Counts {
        tp: conf.group_a.tp + conf.group_b.tp,
        fp: conf.group_a.fp + conf.group_b.fp,
        tn: conf.group_a.tn + conf.group_b.tn,
        fn_: conf.group_a.fn_ + conf.group_b.fn_,
    };
    Ok(conf)
}

fn log2_ratio(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        // Evaluated on the >=1 side so that swapping the groups negates
        // the ratio bit-exactly.
        (Some(x), Some(y)) if x > 0.0 && y > 0.0 => Some(if x >= y {
            (x / y).log2()
        } else {
            -((y / x).log2())
        }),
        _ => None,
    }
}

/// Rates and log2 group ratios from counts.
pub fn compute_metrics(conf: &GroupConfusion, evaluated_against: LabelSource) -> MetricsReport {
    let a = GroupRates::from_counts(&conf.group_a);
    let b = GroupRates::from_counts(&conf.group_b);
    let log2_fpr_ratio = log2_ratio(a.fpr, b.fpr);
    MetricsReport {
        evaluated_against,
        confusion: *conf,
        global_tpr: conf.global.tpr(),
        global_fpr: conf.global.fpr(),
        group_a: a,
        group_b: b,
        log2_fpr_ratio,
        log2_fnr_ratio: log2_ratio(a.fnr, b.fnr),
        log2_precision_ratio: log2_ratio(a.precision, b.precision),
        predictive_equality_pass: log2_fpr_ratio
            .map(|r| r.abs() <= predictive_equality_band())
            .unwrap_or(false),
    }
}

/// TPR at the global threshold fitted (on the same scores and labels) to
/// the target FPR.
pub fn tpr_at_fpr(scores: &[f64], labels: &[bool], target_fpr: f64) -> Result<f64> {
    let fitted = decision::fit_global_threshold(scores, labels, target_fpr)?;
    let cutoff = fitted.global().expect("global fit").cutoff;
    let (mut tp, mut pos) = (0u64, 0u64);
    for (&s, &l) in scores.iter().zip(labels) {
        if l {
            pos += 1;
            if s >= cutoff {
                tp += 1;
            }
        }
    }
    if pos == 0 {
        return Err(Error::DegenerateLabels);
    }
    Ok(tp as f64 / pos as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn groups_abab(n: usize) -> Vec<Group> {
        (0..n)
            .map(|i| if i % 2 == 0 { Group::A } else { Group::B })
            .collect()
    }

    #[test]
    fn perfect_decisions_have_no_errors() {
        let labels = [true, false, true, false];
        let conf = confusion(&labels, &labels, &groups_abab(4)).unwrap();
        assert_eq!(conf.global.fp, 0);
        assert_eq!(conf.global.fn_, 0);
        assert_eq!(conf.group_a.fp + conf.group_b.fp, 0);
    }

    #[test]
    fn all_flag_decisions_max_fpr_zero_fnr() {
        let labels = [true, false, false, true, false, false];
        let decisions = [true; 6];
        let conf = confusion(&decisions, &labels, &groups_abab(6)).unwrap();
        let m = compute_metrics(&conf, LabelSource::TrueLabels);
        assert_eq!(m.global_fpr, Some(1.0));
        assert_eq!(m.confusion.global.fn_, 0);
        assert_eq!(m.global_tpr, Some(1.0));
    }

    #[test]
    fn random_case_matches_independent_tally() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        let n = 30;
        let decisions: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        let groups: Vec<Group> = (0..n)
            .map(|_| if rng.random_bool(0.5) { Group::A } else { Group::B })
            .collect();
        let conf = confusion(&decisions, &labels, &groups).unwrap();
        // Independent tally: filter-count every cell from scratch.
        let count = |g: Option<Group>, d: bool, l: bool| -> u64 {
            (0..n)
                .filter(|&i| {
                    g.map(|g| groups[i] == g).unwrap_or(true) && decisions[i] == d && labels[i] == l
                })
                .count() as u64
        };
        for (cell, g) in [(conf.group_a, Some(Group::A)), (conf.group_b, Some(Group::B)), (conf.global, None)] {
            assert_eq!(cell.tp, count(g, true, true));
            assert_eq!(cell.fp, count(g, true, false));
            assert_eq!(cell.tn, count(g, false, false));
            assert_eq!(cell.fn_, count(g, false, true));
        }
    }

    #[test]
    fn hand_tally_example() {
        let cell = Counts {
            tp: 3,
            fp: 1,
            tn: 6,
            fn_: 2,
        };
        let conf = GroupConfusion {
            group_a: cell,
            group_b: cell,
            global: Counts {
                tp: 6,
                fp: 2,
                tn: 12,
                fn_: 4,
            },
        };
        let m = compute_metrics(&conf, LabelSource::TrueLabels);
        assert_eq!(m.group_a.precision, Some(0.75));
        assert_eq!(m.group_a.tpr, Some(0.6));
        assert_eq!(m.group_a.fpr, Some(1.0 / 7.0));
        assert_eq!(m.log2_fpr_ratio, Some(0.0));
        assert_eq!(m.log2_fnr_ratio, Some(0.0));
        assert_eq!(m.log2_precision_ratio, Some(0.0));
        assert!(m.predictive_equality_pass);
    }

    #[test]
    fn log2_ratio_of_double_is_exactly_one() {
        let conf = GroupConfusion {
            group_a: Counts {
                tp: 0,
                fp: 10,
                tn: 90,
                fn_: 0,
            },
            group_b: Counts {
                tp: 0,
                fp: 5,
                tn: 95,
                fn_: 0,
            },
            global: Counts {
                tp: 0,
                fp: 15,
                tn: 185,
                fn_: 0,
            },
        };
        let m = compute_metrics(&conf, LabelSource::TrueLabels);
        assert_eq!(m.log2_fpr_ratio, Some(1.0));
        assert!(!m.predictive_equality_pass);
    }

    #[test]
    fn zero_denominator_flags_undefined() {
        let conf = GroupConfusion {
            group_a: Counts {
                tp: 1,
                fp: 0,
                tn: 5,
                fn_: 1,
            },
            group_b: Counts {
                tp: 1,
                fp: 0,
                tn: 0,
                fn_: 0,
            },
            global: Counts {
                tp: 2,
                fp: 0,
                tn: 5,
                fn_: 1,
            },
        };
        let m = compute_metrics(&conf, LabelSource::TrueLabels);
        assert_eq!(m.log2_fpr_ratio, None);
        assert!(!m.predictive_equality_pass);
    }

    #[test]
    fn tpr_at_fpr_trivials() {
        // Perfectly separating scores reach TPR 1 at any target.
        let scores = [0.1, 0.2, 0.8, 0.9];
        let labels = [false, false, true, true];
        assert_eq!(tpr_at_fpr(&scores, &labels, 0.05).unwrap(), 1.0);
        // Constant scores at a tight target: the tie rule pushes the
        // cutoff above the constant, nothing is flagged.
        let constant = [0.5; 40];
        let mut labels40 = vec![false; 38];
        labels40.extend([true, true]);
        assert_eq!(tpr_at_fpr(&constant, &labels40, 0.05).unwrap(), 0.0);
    }

    #[test]
    fn tpr_at_fpr_matches_brute_force_on_flipped_scores() {
        // score = 1 - label: every positive scores 0, every negative 1.
        let labels: Vec<bool> = (0..100).map(|i| i % 10 == 0).collect();
        let scores: Vec<f64> = labels.iter().map(|&l| if l { 0.0 } else { 1.0 }).collect();
        let got = tpr_at_fpr(&scores, &labels, 0.05).unwrap();
        let cutoff = crate::decision::oracle::best_cutoff(&scores, &labels, 0.05);
        let (_, expect) = crate::decision::oracle::fpr_tpr_at(&scores, &labels, cutoff);
        assert_eq!(got, expect);
    }

    proptest! {
        #[test]
        fn group_counts_sum_to_global(
            rows in proptest::collection::vec((any::<bool>(), any::<bool>(), any::<bool>()), 1..200)
        ) {
            let decisions: Vec<bool> = rows.iter().map(|r| r.0).collect();
            let labels: Vec<bool> = rows.iter().map(|r| r.1).collect();
            let groups: Vec<Group> = rows.iter().map(|r| if r.2 { Group::A } else { Group::B }).collect();
            let conf = confusion(&decisions, &labels, &groups).unwrap();
            prop_assert_eq!(conf.global.tp, conf.group_a.tp + conf.group_b.tp);
            prop_assert_eq!(conf.global.fp, conf.group_a.fp + conf.group_b.fp);
            prop_assert_eq!(conf.global.tn, conf.group_a.tn + conf.group_b.tn);
            prop_assert_eq!(conf.global.fn_, conf.group_a.fn_ + conf.group_b.fn_);
            // TPR + FNR = 1 and FPR + TNR = 1 whenever defined.
            for cell in [conf.group_a, conf.group_b, conf.global] {
                if let (Some(tpr), Some(fnr)) = (cell.tpr(), cell.fnr()) {
                    prop_assert!((tpr + fnr - 1.0).abs() < 1e-12);
                }
                if let Some(fpr) = cell.fpr() {
                    let tnr = cell.tn as f64 / cell.negatives() as f64;
                    prop_assert!((fpr + tnr - 1.0).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn swapping_groups_negates_ratios(
            a in (0u64..40, 0u64..40, 0u64..40, 0u64..40),
            b in (0u64..40, 0u64..40, 0u64..40, 0u64..40),
        ) {
            let ca = Counts { tp: a.0, fp: a.1, tn: a.2, fn_: a.3 };
            let cb = Counts { tp: b.0, fp: b.1, tn: b.2, fn_: b.3 };
            let global = Counts {
                tp: ca.tp + cb.tp,
                fp: ca.fp + cb.fp,
                tn: ca.tn + cb.tn,
                fn_: ca.fn_ + cb.fn_,
            };
            let fwd = compute_metrics(
                &GroupConfusion { group_a: ca, group_b: cb, global },
                LabelSource::TrueLabels,
            );
            let rev = compute_metrics(
                &GroupConfusion { group_a: cb, group_b: ca, global },
                LabelSource::TrueLabels,
            );
            for (x, y) in [
                (fwd.log2_fpr_ratio, rev.log2_fpr_ratio),
                (fwd.log2_fnr_ratio, rev.log2_fnr_ratio),
                (fwd.log2_precision_ratio, rev.log2_precision_ratio),
            ] {
                match (x, y) {
                    (Some(x), Some(y)) => prop_assert_eq!(x, -y),
                    (None, None) => {}
                    other => prop_assert!(false, "asymmetric definedness {:?}", other),
                }
            }
        }

        #[test]
        fn metrics_are_scale_free(
            a in (1u64..30, 1u64..30, 1u64..30, 1u64..30),
            k in 2u64..5,
        ) {
            let cell = Counts { tp: a.0, fp: a.1, tn: a.2, fn_: a.3 };
            let scaled = Counts { tp: a.0 * k, fp: a.1 * k, tn: a.2 * k, fn_: a.3 * k };
            let conf = |c: Counts| GroupConfusion { group_a: c, group_b: c, global: Counts {
                tp: c.tp * 2, fp: c.fp * 2, tn: c.tn * 2, fn_: c.fn_ * 2,
            }};
            let m1 = compute_metrics(&conf(cell), LabelSource::TrueLabels);
            let m2 = compute_metrics(&conf(scaled), LabelSource::TrueLabels);
            prop_assert_eq!(m1.global_tpr, m2.global_tpr);
            prop_assert_eq!(m1.global_fpr, m2.global_fpr);
            prop_assert_eq!(m1.log2_fpr_ratio, m2.log2_fpr_ratio);
            prop_assert_eq!(m1.log2_fnr_ratio, m2.log2_fnr_ratio);
        }
    }
}
