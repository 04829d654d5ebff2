//! Scoring models: L2-regularized logistic regression trained by
//! full-batch gradient descent, and gradient-boosted shallow regression
//! trees on logistic-loss gradients. Both train on observed labels, can
//! optionally see the protected attribute (awareness), and are
//! deterministic functions of (data, config).

mod gbdt;
mod logreg;

pub use gbdt::{Node, Tree};
pub use logreg::loss_and_gradient;

use crate::error::{Error, Result};
use crate::synthdata::{Dataset, Group};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Logreg,
    Gbdt,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Logreg => "logreg",
            Algorithm::Gbdt => "gbdt",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogregParams {
    pub learning_rate: f64,
    pub l2: f64,
    pub max_iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
}

pub const MAX_TREE_DEPTH: usize = 4;
pub const MAX_ROUNDS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "lowercase")]
pub enum Hyperparams {
    Logreg(LogregParams),
    Gbdt(GbdtParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Whether the group indicator is fed to the learner as a feature.
    pub awareness: bool,
    pub params: Hyperparams,
}

impl ModelConfig {
    pub fn algorithm(&self) -> Algorithm {
        match self.params {
            Hyperparams::Logreg(_) => Algorithm::Logreg,
            Hyperparams::Gbdt(_) => Algorithm::Gbdt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.params {
            Hyperparams::Logreg(p) => {
                if !(p.learning_rate > 0.0 && p.l2 > 0.0) {
                    return Err(Error::InvalidParameter(
                        "logreg learning_rate and l2 must be positive".to_string(),
                    ));
                }
            }
            Hyperparams::Gbdt(p) => {
                if !(p.learning_rate > 0.0) || p.min_leaf == 0 || p.max_depth == 0 {
                    return Err(Error::InvalidParameter(
                        "gbdt hyperparameters must be positive".to_string(),
                    ));
                }
                if p.max_depth > MAX_TREE_DEPTH {
                    return Err(Error::InvalidParameter(format!(
                        "max_depth {} exceeds cap {MAX_TREE_DEPTH}",
                        p.max_depth
                    )));
                }
                if p.rounds > MAX_ROUNDS {
                    return Err(Error::InvalidParameter(format!(
                        "rounds {} exceeds cap {MAX_ROUNDS}",
                        p.rounds
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Which columns a model was trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    /// Feature count of the datasets this model scores (excluding the
    /// group indicator).
    pub n_features: usize,
    /// True when the group indicator is appended as the last column.
    pub includes_group: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub final_loss: f64,
    pub iterations: usize,
    /// Mean training logistic loss after each boosting round (gbdt only).
    pub loss_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    Logreg {
        weights: Vec<f64>,
        intercept: f64,
    },
    Gbdt {
        base_score: f64,
        trees: Vec<Tree>,
    },
}

/// A trained scorer. Immutable after training; safe to score from many
/// threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub config: ModelConfig,
    pub layout: FeatureLayout,
    pub params: ModelParams,
    pub meta: TrainingMeta,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable mean logistic loss of raw scores `z` against 0/1
/// targets.
pub(crate) fn mean_logistic_loss(z: &[f64], y: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (&zi, &yi) in z.iter().zip(y) {
        sum += zi.max(0.0) - yi * zi + (-zi.abs()).exp().ln_1p();
    }
    sum / z.len() as f64
}

/// Group indicator encoding for aware models: A = 1, B = 0.
pub(crate) fn group_indicator(group: Group) -> f64 {
    match group {
        Group::A => 1.0,
        Group::B => 0.0,
    }
}

fn check_trainable(ds: &Dataset) -> Result<()> {
    if ds.is_empty() {
        return Err(Error::EmptyOrDegenerateConfig(
            "empty training set".to_string(),
        ));
    }
    let pos = ds.instances.iter().filter(|i| i.observed_label).count();
    if pos == 0 || pos == ds.len() {
        return Err(Error::DegenerateLabels);
    }
    Ok(())
}

/// Trains a model of the configured algorithm on the dataset's observed
/// labels.
pub fn train(ds: &Dataset, config: &ModelConfig) -> Result<Model> {
    config.validate()?;
    check_trainable(ds)?;
    match &config.params {
        Hyperparams::Logreg(p) => logreg::train(ds, p, config.awareness),
        Hyperparams::Gbdt(p) => gbdt::train(ds, p, config.awareness),
    }
}

/// One score in [0, 1] per instance, order-aligned with the dataset.
pub fn predict_scores(model: &Model, ds: &Dataset) -> Result<Vec<f64>> {
    if ds.d != model.layout.n_features {
        return Err(Error::FeatureLayoutMismatch {
            expected: model.layout.n_features,
            got: ds.d,
        });
    }
    let scores = match &model.params {
        ModelParams::Logreg { weights, intercept } => ds
            .instances
            .iter()
            .map(|inst| {
                let mut z = *intercept;
                for (w, x) in weights.iter().zip(&inst.features) {
                    z += w * x;
                }
                if model.layout.includes_group {
                    z += weights[ds.d] * group_indicator(inst.group);
                }
                sigmoid(z)
            })
            .collect(),
        ModelParams::Gbdt { base_score, trees } => ds
            .instances
            .iter()
            .map(|inst| {
                let group_col = group_indicator(inst.group);
                let fetch = |f: usize| {
                    if f < ds.d {
                        inst.features[f]
                    } else {
                        group_col
                    }
                };
                let mut z = *base_score;
                for tree in trees {
                    z += tree.predict_with(&fetch);
                }
                sigmoid(z)
            })
            .collect(),
    };
    Ok(scores)
}

/// Log-uniform range [lo, hi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogUniform {
    pub lo: f64,
    pub hi: f64,
}

impl LogUniform {
    fn validate(&self) -> Result<()> {
        if !(self.lo > 0.0 && self.hi >= self.lo) {
            return Err(Error::EmptySpace);
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u = rng.random_range(self.lo.ln()..=self.hi.ln());
        u.exp()
    }

    pub fn contains(&self, v: f64) -> bool {
        // A hair of slack for the exp/ln round trip at the edges.
        v >= self.lo * (1.0 - 1e-12) && v <= self.hi * (1.0 + 1e-12)
    }
}

/// Uniform integer range [lo, hi], inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniformInt {
    pub lo: usize,
    pub hi: usize,
}

impl UniformInt {
    fn validate(&self) -> Result<()> {
        if self.hi < self.lo {
            return Err(Error::EmptySpace);
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        rng.random_range(self.lo..=self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogregSpace {
    pub learning_rate: LogUniform,
    pub l2: LogUniform,
    pub max_iters: UniformInt,
}

impl Default for LogregSpace {
    fn default() -> Self {
        LogregSpace {
            learning_rate: LogUniform { lo: 1e-3, hi: 1.0 },
            l2: LogUniform { lo: 1e-6, hi: 1.0 },
            max_iters: UniformInt { lo: 100, hi: 2000 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtSpace {
    pub rounds: UniformInt,
    pub max_depth: Vec<usize>,
    pub learning_rate: LogUniform,
    pub min_leaf: UniformInt,
}

impl Default for GbdtSpace {
    fn default() -> Self {
        GbdtSpace {
            rounds: UniformInt { lo: 20, hi: 300 },
            max_depth: vec![1, 2, 3],
            learning_rate: LogUniform { lo: 0.02, hi: 0.4 },
            min_leaf: UniformInt { lo: 5, hi: 200 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "lowercase")]
pub enum AlgoSpace {
    Logreg(LogregSpace),
    Gbdt(GbdtSpace),
}

/// Search space for random hyperparameter sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparamSpace {
    pub awareness: bool,
    pub space: AlgoSpace,
}

impl HyperparamSpace {
    pub fn default_for(algorithm: Algorithm, awareness: bool) -> HyperparamSpace {
        let space = match algorithm {
            Algorithm::Logreg => AlgoSpace::Logreg(LogregSpace::default()),
            Algorithm::Gbdt => AlgoSpace::Gbdt(GbdtSpace::default()),
        };
        HyperparamSpace { awareness, space }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.space {
            AlgoSpace::Logreg(s) => {
                s.learning_rate.validate()?;
                s.l2.validate()?;
                s.max_iters.validate()
            }
            AlgoSpace::Gbdt(s) => {
                s.rounds.validate()?;
                s.learning_rate.validate()?;
                s.min_leaf.validate()?;
                if s.max_depth.is_empty() || s.max_depth.iter().any(|&d| d == 0 || d > MAX_TREE_DEPTH)
                {
                    return Err(Error::EmptySpace);
                }
                if s.rounds.hi > MAX_ROUNDS {
                    return Err(Error::EmptySpace);
                }
                Ok(())
            }
        }
    }
}

/// Independently samples `n_trials` configurations from the space.
/// Deterministic for a fixed seed.
pub fn sample_hyperparams(
    space: &HyperparamSpace,
    n_trials: usize,
    seed: u64,
) -> Result<Vec<ModelConfig>> {
    if n_trials == 0 {
        return Err(Error::InvalidParameter(
            "n_trials must be at least 1".to_string(),
        ));
    }
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_trials);
    for _ in 0..n_trials {
        let params = match &space.space {
            AlgoSpace::Logreg(s) => Hyperparams::Logreg(LogregParams {
                learning_rate: s.learning_rate.sample(&mut rng),
                l2: s.l2.sample(&mut rng),
                max_iters: s.max_iters.sample(&mut rng),
            }),
            AlgoSpace::Gbdt(s) => Hyperparams::Gbdt(GbdtParams {
                rounds: s.rounds.sample(&mut rng),
                max_depth: s.max_depth[rng.random_range(0..s.max_depth.len())],
                learning_rate: s.learning_rate.sample(&mut rng),
                min_leaf: s.min_leaf.sample(&mut rng),
            }),
        };
        out.push(ModelConfig {
            awareness: space.awareness,
            params,
        });
    }
    Ok(out)
}

/// Builds the column-major design matrix, appending the group indicator
/// column for aware models.
pub(crate) fn design_columns(ds: &Dataset, awareness: bool) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = ds.len();
    let p = ds.d + awareness as usize;
    let mut cols = vec![Vec::with_capacity(n); p];
    for inst in &ds.instances {
        for (j, &x) in inst.features.iter().enumerate() {
            cols[j].push(x);
        }
        if awareness {
            cols[ds.d].push(group_indicator(inst.group));
        }
    }
    let y: Vec<f64> = ds
        .instances
        .iter()
        .map(|i| i.observed_label as u8 as f64)
        .collect();
    (cols, y)
}
