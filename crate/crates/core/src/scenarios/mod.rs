//! End-to-end feedback-loop experiments.
//!
//! Scenario 1 measures what adaptive evasion does to model selection: the
//! class-conditional features that made one group's fraud easy to catch in
//! training go dead in the test months, and the models picked on the
//! believed-ideal world are re-scored on the shifted one.
//!
//! Scenario 2 measures selective-label noise accumulation: a sliding
//! temporal window retrains models whose own flagged cases re-enter future
//! training data as (sometimes false) positives, so the perceived
//! validation FPR and the production FPR on true labels drift apart.

mod scenario1;
mod scenario2;

pub use scenario1::{run_scenario1, Scenario1Report, Scenario1Setup, TrialOutcome, World, WorldReport};
pub use scenario2::{
    run_scenario2, scenario2_base_dataset, IterationRecord, Scenario2Report, Scenario2Setup,
};

use crate::decision::{self, FittedThresholds};
use crate::error::Result;
use crate::learners::{self, Model};
use crate::synthdata::{Dataset, Group};
use serde::{Deserialize, Serialize};

/// Outcome of relabeling one slice with a model's decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelabelOutcome {
    /// Ids the model flagged; their observed label becomes 1 whether or
    /// not they were really fraud.
    pub relabeled_positive: Vec<u64>,
    /// Ids the model let through; their true label is eventually revealed.
    pub revealed: Vec<u64>,
    pub observed_prevalence_a: f64,
    pub observed_prevalence_b: f64,
}

/// One relabeling event in a scenario-2 run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub iteration: usize,
    pub month: u32,
    #[serde(flatten)]
    pub outcome: RelabelOutcome,
}

/// Record of every relabeling a scenario-2 run performed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeedbackLedger {
    pub entries: Vec<LedgerEntry>,
}

/// Applies the selective-label rule to a slice: predicted positives keep
/// an observed label of 1 (false positives become noisy ones), predicted
/// negatives get their true label revealed. True labels are never touched.
pub fn relabel_with_predictions(
    slice: &Dataset,
    model: &Model,
    fitted: &FittedThresholds,
) -> Result<(Dataset, RelabelOutcome)> {
    let scores = learners::predict_scores(model, slice)?;
    let groups = slice.groups();
    let decisions = decision::apply_thresholds(&scores, Some(&groups), fitted)?;

    let mut out = slice.clone();
    let mut relabeled_positive = Vec::new();
    let mut revealed = Vec::new();
    for (inst, flagged) in out.instances.iter_mut().zip(&decisions) {
        if *flagged {
            inst.observed_label = true;
            relabeled_positive.push(inst.id);
        } else {
            inst.observed_label = inst.true_label;
            revealed.push(inst.id);
        }
    }
    let outcome = RelabelOutcome {
        relabeled_positive,
        revealed,
        observed_prevalence_a: out.observed_prevalence_of(Group::A),
        observed_prevalence_b: out.observed_prevalence_of(Group::B),
    };
    Ok((out, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decision::{FittedCutoffs, GroupCutoff};
    use crate::learners::{Hyperparams, LogregParams, ModelConfig};
    use crate::synthdata::{self};
    use proptest::prelude::*;

    fn fixed_global(cutoff: f64) -> FittedThresholds {
        FittedThresholds {
            target_fpr: 0.05,
            cutoffs: FittedCutoffs::Global(GroupCutoff {
                cutoff,
                achieved_fpr: 0.0,
                negatives: 1,
            }),
        }
    }

    fn any_model(ds: &Dataset) -> Model {
        learners::train(
            ds,
            &ModelConfig {
                awareness: false,
                params: Hyperparams::Logreg(LogregParams {
                    learning_rate: 0.2,
                    l2: 1e-4,
                    max_iters: 50,
                }),
            },
        )
        .unwrap()
    }

    #[test]
    fn flag_nothing_reveals_everything() {
        let ds = synthdata::gen_base(300, 0.1, 3, 2, 1).unwrap();
        let ds = synthdata::attach_protected(&ds, 0.5, 2).unwrap();
        let model = any_model(&ds);
        // Cutoff above any sigmoid score: nothing flagged.
        let (out, outcome) = relabel_with_predictions(&ds, &model, &fixed_global(1.5)).unwrap();
        assert!(outcome.relabeled_positive.is_empty());
        assert_eq!(outcome.revealed.len(), ds.len());
        for (a, b) in out.instances.iter().zip(&ds.instances) {
            assert_eq!(a.observed_label, b.true_label);
            assert_eq!(a.true_label, b.true_label);
        }
    }

    #[test]
    fn flag_everything_relabels_everything_positive() {
        let ds = synthdata::gen_base(300, 0.1, 3, 2, 3).unwrap();
        let ds = synthdata::attach_protected(&ds, 0.5, 4).unwrap();
        let model = any_model(&ds);
        let (out, outcome) = relabel_with_predictions(&ds, &model, &fixed_global(0.0)).unwrap();
        assert_eq!(outcome.relabeled_positive.len(), ds.len());
        assert!(outcome.revealed.is_empty());
        assert!(out.instances.iter().all(|i| i.observed_label));
        // True labels untouched.
        for (a, b) in out.instances.iter().zip(&ds.instances) {
            assert_eq!(a.true_label, b.true_label);
        }
    }

    #[test]
    fn toy_slice_with_two_false_positives() {
        use crate::synthdata::{Group, Instance};
        // 10 rows, 2 true positives; the model flags the 2 positives plus
        // rows 4 and 5 (false positives).
        let mut instances = Vec::new();
        for i in 0..10u64 {
            let true_label = i < 2;
            let flagged = i < 2 || i == 4 || i == 5;
            instances.push(Instance {
                id: i,
                month: 0,
                group: if i % 2 == 0 { Group::A } else { Group::B },
                true_label,
                observed_label: true_label,
                features: vec![if flagged { 1.0 } else { 0.0 }, 0.0],
            });
        }
        let slice = Dataset {
            instances,
            d: 2,
            months: 1,
            base_prevalence: 0.2,
            provenance: vec![],
        };
        // A hand-built "model": logistic on f0 with a big weight flags
        // exactly the rows with f0 = 1 at cutoff 0.5.
        let model = Model {
            config: ModelConfig {
                awareness: false,
                params: Hyperparams::Logreg(LogregParams {
                    learning_rate: 0.1,
                    l2: 1e-6,
                    max_iters: 0,
                }),
            },
            layout: crate::learners::FeatureLayout {
                n_features: 2,
                includes_group: false,
            },
            params: crate::learners::ModelParams::Logreg {
                weights: vec![10.0, 0.0],
                intercept: -5.0,
            },
            meta: crate::learners::TrainingMeta {
                final_loss: 0.0,
                iterations: 0,
                loss_trace: vec![],
            },
        };
        let (out, outcome) = relabel_with_predictions(&slice, &model, &fixed_global(0.5)).unwrap();
        assert_eq!(outcome.relabeled_positive, vec![0, 1, 4, 5]);
        assert_eq!(outcome.revealed, vec![2, 3, 6, 7, 8, 9]);
        // Observed prevalence = true prevalence + 2 FPs / 10 rows.
        assert_eq!(out.observed_prevalence(), 0.2 + 0.2);
        // Observed positives are exactly TP u FP u FN.
        let observed: Vec<u64> = out
            .instances
            .iter()
            .filter(|i| i.observed_label)
            .map(|i| i.id)
            .collect();
        assert_eq!(observed, vec![0, 1, 4, 5]);
    }

    proptest! {
        #[test]
        fn relabel_preserves_true_labels_and_partitions(seed in 0u64..20) {
            let ds = synthdata::gen_base(200, 0.1, 3, 2, seed).unwrap();
            let ds = synthdata::attach_protected(&ds, 0.5, seed + 1).unwrap();
            let model = any_model(&ds);
            let scores = learners::predict_scores(&model, &ds).unwrap();
            let fitted = crate::decision::fit_global_threshold(
                &scores,
                &ds.observed_labels(),
                0.1,
            ).unwrap();
            let (out, outcome) = relabel_with_predictions(&ds, &model, &fitted).unwrap();
            let mut ids: Vec<u64> = outcome
                .relabeled_positive
                .iter()
                .chain(&outcome.revealed)
                .copied()
                .collect();
            ids.sort_unstable();
            let mut expect: Vec<u64> = ds.instances.iter().map(|i| i.id).collect();
            expect.sort_unstable();
            prop_assert_eq!(ids, expect);
            for (a, b) in out.instances.iter().zip(&ds.instances) {
                prop_assert_eq!(a.true_label, b.true_label);
            }
            // Selective-label inflation: observed positives = true positives + FPs.
            let true_pos = ds.instances.iter().filter(|i| i.true_label).count();
            let fps = outcome
                .relabeled_positive
                .iter()
                .filter(|&&id| !ds.instances[id as usize].true_label)
                .count();
            let observed_pos = out.instances.iter().filter(|i| i.observed_label).count();
            prop_assert_eq!(observed_pos, true_pos + fps);
        }
    }
}
