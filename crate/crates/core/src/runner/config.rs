//! Experiment configuration: a TOML document in which every key is
//! optional. An empty file runs the desk-scale default experiment for
//! whichever subcommand invokes it. Unknown keys are rejected.

use crate::decision::{ThresholdKind, ThresholdPolicy};
use crate::error::{Error, Result};
use crate::learners::{
    Algorithm, AlgoSpace, GbdtSpace, HyperparamSpace, LogUniform, LogregSpace, UniformInt,
};
use crate::scenarios::{Scenario1Setup, Scenario2Setup};
use crate::synthdata::{
    self, BiasSpec, ConditionalComponents, DynamicShiftSpec, Group, MonthRange, NoiseMode,
    NoisyLabelSpec,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub bias: BiasConfig,
    pub learner: LearnerConfig,
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub n: usize,
    pub prevalence: f64,
    pub d: usize,
    pub months: u32,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            n: 50_000,
            prevalence: 0.01,
            d: 8,
            months: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct BiasConfig {
    /// Group A share; defaults to 0.5 (0.2 for scenario 2).
    pub group_share_a: Option<f64>,
    pub allow_degenerate_share: bool,
    /// Fraud-rate multiplier of A over B; defaults to 1.0 (2.0 for
    /// scenario 2).
    pub prevalence_multiplier: Option<f64>,
    /// Append the x1, x2 features; defaults to false (true for
    /// scenario 1).
    pub class_conditional: Option<bool>,
    /// Custom per-(label, group) components; defaults to the standard
    /// A-unseparable / B-separable parameterization.
    pub components: Option<ConditionalComponents>,
    pub noisy_labels: Option<NoisyLabelsConfig>,
    pub dynamic_shift: DynamicShiftConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoisyLabelsConfig {
    pub mode: NoiseMode,
    pub target_multiplier: f64,
    pub affected_group: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicShiftConfig {
    /// Defaults to false (true for scenario 1).
    pub enabled: Option<bool>,
    pub adapted_group: Option<String>,
    /// Half-open [start, end); defaults to the test months.
    pub shift_months: Option<[u32; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub algorithm: String,
    pub awareness: bool,
    pub gbdt: GbdtSpaceConfig,
    pub logreg: LogregSpaceConfig,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            algorithm: "gbdt".to_string(),
            awareness: false,
            gbdt: GbdtSpaceConfig::default(),
            logreg: LogregSpaceConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbdtSpaceConfig {
    pub rounds: [usize; 2],
    pub max_depth: Vec<usize>,
    pub learning_rate: [f64; 2],
    pub min_leaf: [usize; 2],
}

impl Default for GbdtSpaceConfig {
    fn default() -> Self {
        let s = GbdtSpace::default();
        GbdtSpaceConfig {
            rounds: [s.rounds.lo, s.rounds.hi],
            max_depth: s.max_depth,
            learning_rate: [s.learning_rate.lo, s.learning_rate.hi],
            min_leaf: [s.min_leaf.lo, s.min_leaf.hi],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogregSpaceConfig {
    pub learning_rate: [f64; 2],
    pub l2: [f64; 2],
    pub max_iters: [usize; 2],
}

impl Default for LogregSpaceConfig {
    fn default() -> Self {
        let s = LogregSpace::default();
        LogregSpaceConfig {
            learning_rate: [s.learning_rate.lo, s.learning_rate.hi],
            l2: [s.l2.lo, s.l2.hi],
            max_iters: [s.max_iters.lo, s.max_iters.hi],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub trials: usize,
    pub seeds: Vec<u64>,
    pub target_fpr: f64,
    pub policy: String,
    pub drop_old: bool,
    pub out_dir: String,
    /// Scenario-1 train/test split point; defaults to months - 2.
    pub train_months: Option<u32>,
    /// Significance level for verify-bias.
    pub alpha: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            trials: 50,
            seeds: (0..10).collect(),
            target_fpr: 0.05,
            policy: "global".to_string(),
            drop_old: false,
            out_dir: "perfloop-out".to_string(),
            train_months: None,
            alpha: 0.01,
        }
    }
}

/// Which subcommand is resolving the config; scenario defaults differ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunKind {
    Gen,
    VerifyBias,
    Scenario1,
    Scenario2,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.seeds.is_empty() {
            return Err(Error::Config("run.seeds must not be empty".to_string()));
        }
        let mut sorted = self.run.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.run.seeds.len() {
            return Err(Error::Config("run.seeds contains duplicates".to_string()));
        }
        if self.run.trials == 0 {
            return Err(Error::Config("run.trials must be at least 1".to_string()));
        }
        if !(self.run.target_fpr > 0.0 && self.run.target_fpr < 1.0) {
            return Err(Error::Config(format!(
                "run.target_fpr {} outside (0, 1)",
                self.run.target_fpr
            )));
        }
        if !(self.run.alpha > 0.0 && self.run.alpha < 1.0) {
            return Err(Error::Config(format!(
                "run.alpha {} outside (0, 1)",
                self.run.alpha
            )));
        }
        self.algorithm()?;
        self.policy()?;
        if let Some(share) = self.bias.group_share_a {
            let ok = (share > 0.0 && share < 1.0)
                || (self.bias.allow_degenerate_share && (share == 0.0 || share == 1.0));
            if !ok {
                return Err(Error::Config(format!(
                    "bias.group_share_a {share} outside (0, 1)"
                )));
            }
        }
        if let Some(c) = self.bias.prevalence_multiplier {
            if !(c > 0.0) {
                return Err(Error::Config(format!(
                    "bias.prevalence_multiplier {c} must be positive"
                )));
            }
        }
        if let Some(nl) = &self.bias.noisy_labels {
            Group::parse(&nl.affected_group).map_err(|_| {
                Error::Config(format!("bad noisy_labels.affected_group {:?}", nl.affected_group))
            })?;
            if !(nl.target_multiplier > 0.0) {
                return Err(Error::Config(
                    "noisy_labels.target_multiplier must be positive".to_string(),
                ));
            }
        }
        if let Some(g) = &self.bias.dynamic_shift.adapted_group {
            Group::parse(g)
                .map_err(|_| Error::Config(format!("bad dynamic_shift.adapted_group {g:?}")))?;
        }
        self.space()?.validate().map_err(|e| match e {
            Error::EmptySpace => Error::Config("learner space is empty".to_string()),
            other => other,
        })?;
        Ok(())
    }

    pub fn algorithm(&self) -> Result<Algorithm> {
        match self.learner.algorithm.as_str() {
            "gbdt" => Ok(Algorithm::Gbdt),
            "logreg" => Ok(Algorithm::Logreg),
            other => Err(Error::Config(format!("unknown learner.algorithm {other:?}"))),
        }
    }

    pub fn policy(&self) -> Result<ThresholdPolicy> {
        let kind = match self.run.policy.as_str() {
            "global" => ThresholdKind::Global,
            "groupwise" => ThresholdKind::Groupwise,
            other => return Err(Error::Config(format!("unknown run.policy {other:?}"))),
        };
        ThresholdPolicy::new(kind, self.run.target_fpr)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn space(&self) -> Result<HyperparamSpace> {
        let space = match self.algorithm()? {
            Algorithm::Gbdt => AlgoSpace::Gbdt(GbdtSpace {
                rounds: UniformInt {
                    lo: self.learner.gbdt.rounds[0],
                    hi: self.learner.gbdt.rounds[1],
                },
                max_depth: self.learner.gbdt.max_depth.clone(),
                learning_rate: LogUniform {
                    lo: self.learner.gbdt.learning_rate[0],
                    hi: self.learner.gbdt.learning_rate[1],
                },
                min_leaf: UniformInt {
                    lo: self.learner.gbdt.min_leaf[0],
                    hi: self.learner.gbdt.min_leaf[1],
                },
            }),
            Algorithm::Logreg => AlgoSpace::Logreg(LogregSpace {
                learning_rate: LogUniform {
                    lo: self.learner.logreg.learning_rate[0],
                    hi: self.learner.logreg.learning_rate[1],
                },
                l2: LogUniform {
                    lo: self.learner.logreg.l2[0],
                    hi: self.learner.logreg.l2[1],
                },
                max_iters: UniformInt {
                    lo: self.learner.logreg.max_iters[0],
                    hi: self.learner.logreg.max_iters[1],
                },
            }),
        };
        Ok(HyperparamSpace {
            awareness: self.learner.awareness,
            space,
        })
    }

    pub fn train_months(&self) -> u32 {
        self.run
            .train_months
            .unwrap_or(self.data.months.saturating_sub(2))
    }

    fn components(&self) -> ConditionalComponents {
        self.bias
            .components
            .unwrap_or_else(synthdata::default_conditional_components)
    }

    fn shift_spec(&self, kind: RunKind) -> Result<Option<DynamicShiftSpec>> {
        let enabled = self
            .bias
            .dynamic_shift
            .enabled
            .unwrap_or(kind == RunKind::Scenario1);
        if !enabled {
            return Ok(None);
        }
        let adapted_group = match &self.bias.dynamic_shift.adapted_group {
            Some(g) => Group::parse(g)?,
            None => Group::B,
        };
        let months = match self.bias.dynamic_shift.shift_months {
            Some([start, end]) => MonthRange::new(start, end),
            None => MonthRange::new(self.train_months(), self.data.months),
        };
        Ok(Some(synthdata::default_uninformative_shift(
            adapted_group,
            months,
            &self.components(),
        )))
    }

    /// The declarative bias pipeline for `gen` and `verify-bias`.
    pub fn bias_spec(&self, kind: RunKind) -> Result<BiasSpec> {
        let class_conditional = self
            .bias
            .class_conditional
            .unwrap_or(kind == RunKind::Scenario1);
        let noisy = match &self.bias.noisy_labels {
            Some(nl) => Some(NoisyLabelSpec {
                mode: nl.mode,
                target_multiplier: nl.target_multiplier,
                affected_group: Group::parse(&nl.affected_group)?,
            }),
            None => None,
        };
        Ok(BiasSpec {
            group_share_a: self.bias.group_share_a.unwrap_or(match kind {
                RunKind::Scenario2 => 0.2,
                _ => 0.5,
            }),
            allow_degenerate_share: self.bias.allow_degenerate_share,
            prevalence_multiplier_c: self.bias.prevalence_multiplier.unwrap_or(match kind {
                RunKind::Scenario2 => 2.0,
                _ => 1.0,
            }),
            cond_dist: class_conditional.then(|| self.components()),
            noisy_labels: noisy,
            dynamic_shift: if class_conditional {
                self.shift_spec(kind)?
            } else {
                None
            },
        })
    }

    pub fn scenario1_setup(&self) -> Result<Scenario1Setup> {
        let share = self.bias.group_share_a.unwrap_or(0.5);
        let c = self.bias.prevalence_multiplier.unwrap_or(1.0);
        if share != 0.5 || c != 1.0 {
            return Err(Error::Config(
                "scenario 1 requires balanced groups (share 0.5) and equal fraud rates (multiplier 1)"
                    .to_string(),
            ));
        }
        Ok(Scenario1Setup {
            n: self.data.n,
            prevalence: self.data.prevalence,
            d: self.data.d,
            months: self.data.months,
            train_months: self.train_months(),
            components: self.components(),
            shift: self.shift_spec(RunKind::Scenario1)?,
            space: self.space()?,
            n_trials: self.run.trials,
            target_fpr: self.run.target_fpr,
        })
    }

    pub fn scenario2_setup(&self) -> Result<Scenario2Setup> {
        let class_conditional = self.bias.class_conditional.unwrap_or(false);
        Ok(Scenario2Setup {
            n: self.data.n,
            prevalence: self.data.prevalence,
            d: self.data.d,
            months: self.data.months,
            group_share_a: self.bias.group_share_a.unwrap_or(0.2),
            prevalence_multiplier_c: self.bias.prevalence_multiplier.unwrap_or(2.0),
            cond_dist: class_conditional.then(|| self.components()),
            policy: self.policy()?,
            drop_old: self.run.drop_old,
            space: self.space()?,
            n_trials: self.run.trials,
        })
    }

    /// Stable hash of the fully resolved configuration.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml().as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_desk_scale_default() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg.data.n, 50_000);
        assert_eq!(cfg.run.seeds.len(), 10);
        let s1 = cfg.scenario1_setup().unwrap();
        assert_eq!(s1.train_months, 6);
        assert!(s1.shift.is_some());
        let s2 = cfg.scenario2_setup().unwrap();
        assert_eq!(s2.group_share_a, 0.2);
        assert_eq!(s2.prevalence_multiplier_c, 2.0);
        assert!(s2.cond_dist.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml("[data]\nn = 10\nbogus = 3\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn duplicate_seeds_are_rejected() {
        let err = ExperimentConfig::from_toml("[run]\nseeds = [1, 1]\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn bad_policy_is_rejected() {
        let err = ExperimentConfig::from_toml("[run]\npolicy = \"sideways\"\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn scenario1_rejects_unbalanced_bias() {
        let cfg = ExperimentConfig::from_toml("[bias]\nprevalence_multiplier = 2.0\n").unwrap();
        assert!(cfg.scenario1_setup().is_err());
        assert!(cfg.scenario2_setup().is_ok());
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::from_toml("").unwrap();
        let b = ExperimentConfig::from_toml("[run]\ntrials = 7\n").unwrap();
        assert_eq!(a.hash(), ExperimentConfig::from_toml("").unwrap().hash());
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn round_trip_through_toml() {
        let cfg = ExperimentConfig::from_toml("[run]\ntrials = 3\nseeds = [4, 5]\n").unwrap();
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, back);
    }
}
