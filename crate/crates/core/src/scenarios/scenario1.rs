//! Adaptive-evasion experiment: three worlds built from one base
//! population, a shared trial sweep, and top-5 model selection on the
//! world the practitioner believes in.

use crate::decision;
use crate::error::{Error, Result};
use crate::fairmetrics::{self, LabelSource};
use crate::learners::{self, HyperparamSpace, ModelConfig};
use crate::stats::mix_seed;
use crate::synthdata::{
    self, ConditionalComponents, Dataset, DynamicShiftSpec, MonthRange,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const SALT_BASE: u64 = 0x5331_0001;
const SALT_GROUP: u64 = 0x5331_0002;
const SALT_CC: u64 = 0x5331_0003;
const SALT_SHIFT: u64 = 0x5331_0004;
const SALT_HP: u64 = 0x5331_0005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum World {
    PerformanceIdeal,
    Adaptation,
    UnbiasedBaseline,
}

impl std::fmt::Display for World {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            World::PerformanceIdeal => "performance_ideal",
            World::Adaptation => "adaptation",
            World::UnbiasedBaseline => "unbiased_baseline",
        })
    }
}

/// One trial's test-set metrics in one world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub config_id: usize,
    pub config: ModelConfig,
    /// Global TPR at the target-FPR threshold fitted on the test split.
    pub tpr: f64,
    pub log2_fpr_ratio: Option<f64>,
    pub metrics: crate::fairmetrics::MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldReport {
    pub outcomes: Vec<TrialOutcome>,
    /// Config ids of the five best trials by TPR in this world.
    pub top5: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario1Report {
    pub seed: u64,
    pub n_trials: usize,
    pub performance_ideal: WorldReport,
    pub adaptation: WorldReport,
    pub unbiased_baseline: WorldReport,
}

impl Scenario1Report {
    pub fn world(&self, world: World) -> &WorldReport {
        match world {
            World::PerformanceIdeal => &self.performance_ideal,
            World::Adaptation => &self.adaptation,
            World::UnbiasedBaseline => &self.unbiased_baseline,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario1Setup {
    pub n: usize,
    pub prevalence: f64,
    pub d: usize,
    pub months: u32,
    /// Months [0, train_months) train; the rest test.
    pub train_months: u32,
    pub components: ConditionalComponents,
    /// None disables the adaptation: that world then equals the ideal one.
    pub shift: Option<DynamicShiftSpec>,
    pub space: HyperparamSpace,
    pub n_trials: usize,
    pub target_fpr: f64,
}

impl Scenario1Setup {
    /// Paper-shaped defaults at desk scale: balanced groups, equal fraud
    /// rates, group-B separability that goes dead in the test months.
    pub fn default_desk_scale() -> Scenario1Setup {
        let components = synthdata::default_conditional_components();
        let months = 8;
        let train_months = 6;
        let shift = synthdata::default_uninformative_shift(
            synthdata::Group::B,
            MonthRange::new(train_months, months),
            &components,
        );
        Scenario1Setup {
            n: 50_000,
            prevalence: 0.01,
            d: 8,
            months,
            train_months,
            components,
            shift: Some(shift),
            space: HyperparamSpace::default_for(learners::Algorithm::Gbdt, false),
            n_trials: 50,
            target_fpr: 0.05,
        }
    }
}

fn eval_models(
    models: &[(usize, ModelConfig, learners::Model)],
    test: &Dataset,
    target_fpr: f64,
) -> Result<WorldReport> {
    let outcomes: Vec<TrialOutcome> = models
        .par_iter()
        .map(|(id, config, model)| -> Result<TrialOutcome> {
            let scores = learners::predict_scores(model, test)?;
            let labels = test.true_labels();
            let groups = test.groups();
            let fitted = decision::fit_global_threshold(&scores, &labels, target_fpr)?;
            let decisions = decision::apply_thresholds(&scores, Some(&groups), &fitted)?;
            let conf = fairmetrics::confusion(&decisions, &labels, &groups)?;
            let metrics = fairmetrics::compute_metrics(&conf, LabelSource::TrueLabels);
            Ok(TrialOutcome {
                config_id: *id,
                config: *config,
                tpr: metrics.global_tpr.ok_or(Error::DegenerateLabels)?,
                log2_fpr_ratio: metrics.log2_fpr_ratio,
                metrics,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let top5 = top5_ids(&outcomes);
    Ok(WorldReport { outcomes, top5 })
}

fn top5_ids(outcomes: &[TrialOutcome]) -> Vec<usize> {
    let mut order: Vec<&TrialOutcome> = outcomes.iter().collect();
    order.sort_by(|a, b| {
        b.tpr
            .partial_cmp(&a.tpr)
            .expect("finite tpr")
            .then(a.config_id.cmp(&b.config_id))
    });
    order.iter().take(5).map(|o| o.config_id).collect()
}

/// Builds the three worlds, trains the shared trial sweep, and evaluates
/// every trial on each world's test months.
///
/// The ideal and adaptation worlds share their training rows bit-for-bit
/// (the shift only rewrites adapted-group rows in the test window), so
/// each config is trained once and scored on both test sets — the same
/// trained models, as the comparison requires.
pub fn run_scenario1(setup: &Scenario1Setup, seed: u64) -> Result<Scenario1Report> {
    if setup.train_months == 0 || setup.train_months >= setup.months {
        return Err(Error::InvalidParameter(format!(
            "train_months {} must split the {}-month timeline",
            setup.train_months, setup.months
        )));
    }
    if let Some(shift) = &setup.shift {
        if shift.shift_months.start < setup.train_months && !shift.shift_months.is_empty() {
            return Err(Error::InvalidParameter(
                "shift window must not touch the training months".to_string(),
            ));
        }
    }

    let base = synthdata::gen_base(
        setup.n,
        setup.prevalence,
        setup.d,
        setup.months,
        mix_seed(seed, SALT_BASE),
    )?;
    // Balanced groups, equal fraud rates: no bias other than the
    // class-conditional features under test.
    let base = synthdata::attach_protected(&base, 0.5, mix_seed(seed, SALT_GROUP))?;

    let ideal =
        synthdata::inject_class_conditional_bias(&base, &setup.components, mix_seed(seed, SALT_CC))?;
    let adaptation = match &setup.shift {
        Some(shift) => synthdata::apply_dynamic_shift(&ideal, shift, mix_seed(seed, SALT_SHIFT))?,
        None => ideal.clone(),
    };

    let train_range = MonthRange::new(0, setup.train_months);
    let test_range = MonthRange::new(setup.train_months, setup.months);

    let configs = learners::sample_hyperparams(&setup.space, setup.n_trials, mix_seed(seed, SALT_HP))?;

    // Worlds with x1, x2: one training pass serves ideal and adaptation.
    let biased_train = ideal.slice_by_months(train_range);
    let biased_models: Vec<(usize, ModelConfig, learners::Model)> = configs
        .par_iter()
        .enumerate()
        .map(|(id, cfg)| Ok((id, *cfg, learners::train(&biased_train, cfg)?)))
        .collect::<Result<Vec<_>>>()?;
    let performance_ideal = eval_models(
        &biased_models,
        &ideal.slice_by_months(test_range),
        setup.target_fpr,
    )?;
    let adaptation_report = eval_models(
        &biased_models,
        &adaptation.slice_by_months(test_range),
        setup.target_fpr,
    )?;

    // Baseline world never sees x1, x2.
    let baseline_train = base.slice_by_months(train_range);
    let baseline_models: Vec<(usize, ModelConfig, learners::Model)> = configs
        .par_iter()
        .enumerate()
        .map(|(id, cfg)| Ok((id, *cfg, learners::train(&baseline_train, cfg)?)))
        .collect::<Result<Vec<_>>>()?;
    let unbiased_baseline = eval_models(
        &baseline_models,
        &base.slice_by_months(test_range),
        setup.target_fpr,
    )?;

    Ok(Scenario1Report {
        seed,
        n_trials: setup.n_trials,
        performance_ideal,
        adaptation: adaptation_report,
        unbiased_baseline,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_setup() -> Scenario1Setup {
        let mut setup = Scenario1Setup::default_desk_scale();
        setup.n = 6000;
        setup.prevalence = 0.05;
        setup.d = 4;
        setup.n_trials = 4;
        setup.space = HyperparamSpace::default_for(learners::Algorithm::Gbdt, false);
        if let learners::AlgoSpace::Gbdt(ref mut s) = setup.space.space {
            s.rounds = learners::UniformInt { lo: 10, hi: 30 };
        }
        setup
    }

    #[test]
    fn disabled_shift_collapses_adaptation_onto_ideal() {
        let mut setup = small_setup();
        setup.shift = None;
        let report = run_scenario1(&setup, 5).unwrap();
        assert_eq!(report.performance_ideal, report.adaptation);
        assert_eq!(report.performance_ideal.outcomes.len(), 4);
    }

    #[test]
    fn worlds_share_base_rows() {
        // Projection equality: same ids, base features, labels, groups in
        // all three worlds; only appended/shifted columns may differ.
        let setup = small_setup();
        let seed = 9;
        let base = synthdata::gen_base(
            setup.n,
            setup.prevalence,
            setup.d,
            setup.months,
            mix_seed(seed, SALT_BASE),
        )
        .unwrap();
        let base = synthdata::attach_protected(&base, 0.5, mix_seed(seed, SALT_GROUP)).unwrap();
        let ideal = synthdata::inject_class_conditional_bias(
            &base,
            &setup.components,
            mix_seed(seed, SALT_CC),
        )
        .unwrap();
        let adapted = synthdata::apply_dynamic_shift(
            &ideal,
            setup.shift.as_ref().unwrap(),
            mix_seed(seed, SALT_SHIFT),
        )
        .unwrap();
        for (b, (i, a)) in base
            .instances
            .iter()
            .zip(ideal.instances.iter().zip(&adapted.instances))
        {
            assert_eq!(b.id, i.id);
            assert_eq!(b.id, a.id);
            assert_eq!(b.group, i.group);
            assert_eq!(b.group, a.group);
            assert_eq!(b.true_label, i.true_label);
            assert_eq!(b.true_label, a.true_label);
            assert_eq!(b.month, i.month);
            assert_eq!(b.features[..], i.features[..setup.d]);
            assert_eq!(b.features[..], a.features[..setup.d]);
        }
    }

    #[test]
    fn report_is_deterministic() {
        let setup = small_setup();
        let a = run_scenario1(&setup, 3).unwrap();
        let b = run_scenario1(&setup, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn top5_ranks_by_tpr_then_id() {
        let conf = crate::fairmetrics::confusion(&[true], &[true], &[synthdata::Group::A]).unwrap();
        let metrics =
            crate::fairmetrics::compute_metrics(&conf, crate::fairmetrics::LabelSource::TrueLabels);
        let outcomes: Vec<TrialOutcome> = [0.3, 0.9, 0.9, 0.1, 0.5, 0.7, 0.2]
            .iter()
            .enumerate()
            .map(|(id, &tpr)| TrialOutcome {
                config_id: id,
                config: ModelConfig {
                    awareness: false,
                    params: learners::Hyperparams::Gbdt(learners::GbdtParams {
                        rounds: 1,
                        max_depth: 1,
                        learning_rate: 0.1,
                        min_leaf: 1,
                    }),
                },
                tpr,
                log2_fpr_ratio: None,
                metrics: metrics.clone(),
            })
            .collect();
        assert_eq!(top5_ids(&outcomes), vec![1, 2, 5, 4, 0]);
    }
}
