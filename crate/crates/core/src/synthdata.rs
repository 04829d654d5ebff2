//! Synthetic dataset generation and bias injection.
//!
//! A base population is drawn from two class-conditional Gaussians with
//! partial overlap, then individual bias conditions are layered on top:
//! group attachment, prevalence disparity, group-wise class-conditional
//! feature bias (appended columns x1, x2), label noise, and a dynamic
//! shift that redraws x1, x2 for one group in selected months. Every
//! injection is recorded in the dataset's provenance so that
//! [`verify_bias_conditions`] can certify, statistically, that the
//! declared conditions actually hold in the sample.

use crate::error::{Error, Result};
use crate::stats;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Mahalanobis separation between the two base-feature class centroids.
/// Chosen so a linear scorer lands mid-range (TPR@5%FPR around 0.5),
/// leaving headroom for injected biases to move the needle.
pub const BASE_MEAN_SEPARATION: f64 = 1.645;

/// Minimum positives required to evaluate group metrics downstream.
pub const MIN_POSITIVES: usize = 10;

/// Protected group identifier. Exactly two groups are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    A,
    B,
}

impl Group {
    pub fn other(self) -> Group {
        match self {
            Group::A => Group::B,
            Group::B => Group::A,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Group::A => "A",
            Group::B => "B",
        }
    }

    pub fn parse(s: &str) -> Result<Group> {
        match s {
            "A" | "a" => Ok(Group::A),
            "B" | "b" => Ok(Group::B),
            other => Err(Error::InvalidParameter(format!("unknown group {other:?}"))),
        }
    }
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One application row: features, protected group, labels, and arrival month.
///
/// `observed_label` is what the practitioner sees; it diverges from
/// `true_label` only through a noisy-label injection or the selective-label
/// feedback loop. `true_label` is never mutated after generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: u64,
    pub month: u32,
    pub group: Group,
    pub true_label: bool,
    pub observed_label: bool,
    pub features: Vec<f64>,
}

/// Bivariate Gaussian component for the appended features x1, x2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl GaussianComponent {
    pub fn isotropic(mx: f64, my: f64, var: f64) -> GaussianComponent {
        GaussianComponent {
            mean: [mx, my],
            cov: [[var, 0.0], [0.0, var]],
        }
    }

    /// Symmetric positive-definite check for the 2x2 covariance.
    pub fn validate(&self) -> Result<()> {
        let c = &self.cov;
        let sym_tol = 1e-12 * (1.0 + c[0][1].abs().max(c[1][0].abs()));
        if (c[0][1] - c[1][0]).abs() > sym_tol {
            return Err(Error::InvalidCovariance);
        }
        let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
        if !(c[0][0] > 0.0 && det > 0.0) || !det.is_finite() {
            return Err(Error::InvalidCovariance);
        }
        Ok(())
    }

    fn cholesky(&self) -> (f64, f64, f64) {
        let l11 = self.cov[0][0].sqrt();
        let l21 = self.cov[1][0] / l11;
        let l22 = (self.cov[1][1] - l21 * l21).sqrt();
        (l11, l21, l22)
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let (l11, l21, l22) = self.cholesky();
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        (
            self.mean[0] + l11 * z1,
            self.mean[1] + l21 * z1 + l22 * z2,
        )
    }
}

/// One component per (label, group) pair for the appended features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalComponents {
    pub a0: GaussianComponent,
    pub a1: GaussianComponent,
    pub b0: GaussianComponent,
    pub b1: GaussianComponent,
}

impl ConditionalComponents {
    pub fn get(&self, label: bool, group: Group) -> &GaussianComponent {
        match (label, group) {
            (false, Group::A) => &self.a0,
            (true, Group::A) => &self.a1,
            (false, Group::B) => &self.b0,
            (true, Group::B) => &self.b1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.a0.validate()?;
        self.a1.validate()?;
        self.b0.validate()?;
        self.b1.validate()
    }

    /// Equality of the two group components for a given label.
    pub fn groups_equal_for_label(&self, label: bool) -> bool {
        if label {
            self.a1 == self.b1
        } else {
            self.a0 == self.b0
        }
    }
}

/// Default parameterization: x1, x2 carry no class signal for group A
/// (identical components) and separate the classes cleanly for group B
/// (3-sigma-disjoint components).
pub fn default_conditional_components() -> ConditionalComponents {
    let origin = GaussianComponent::isotropic(0.0, 0.0, 1.0);
    ConditionalComponents {
        a0: origin,
        a1: origin,
        b0: origin,
        b1: GaussianComponent::isotropic(4.5, 4.5, 1.0),
    }
}

/// Half-open month window [start, end).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthRange {
    pub start: u32,
    pub end: u32,
}

impl MonthRange {
    pub fn new(start: u32, end: u32) -> MonthRange {
        MonthRange { start, end }
    }

    pub fn contains(&self, month: u32) -> bool {
        month >= self.start && month < self.end
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }
}

/// Direction of label-noise injection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    /// Flip observed 0 -> 1 in the affected group until its observed
    /// prevalence is `target_multiplier` times the other group's.
    Inflate,
    /// Flip observed 1 -> 0 in the affected group until observed
    /// prevalences match across groups.
    Equalize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisyLabelSpec {
    pub mode: NoiseMode,
    pub target_multiplier: f64,
    pub affected_group: Group,
}

/// Redraw x1, x2 for one group in a month window, keyed only by label.
/// With both labels mapped to the same component the features become
/// uninformative for the adapted group in the shifted months.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicShiftSpec {
    pub adapted_group: Group,
    pub shift_months: MonthRange,
    pub post_label0: GaussianComponent,
    pub post_label1: GaussianComponent,
}

impl DynamicShiftSpec {
    fn post(&self, label: bool) -> &GaussianComponent {
        if label {
            &self.post_label1
        } else {
            &self.post_label0
        }
    }
}

/// Default adaptation: the adapted group's fraud hides inside its own
/// legitimate x1, x2 distribution during the shifted months.
pub fn default_uninformative_shift(
    adapted_group: Group,
    shift_months: MonthRange,
    base: &ConditionalComponents,
) -> DynamicShiftSpec {
    let legit = *base.get(false, adapted_group);
    DynamicShiftSpec {
        adapted_group,
        shift_months,
        post_label0: legit,
        post_label1: legit,
    }
}

/// Declarative description of the bias conditions to inject, in pipeline
/// order: group attachment, prevalence disparity, class-conditional
/// features, label noise, dynamic shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasSpec {
    pub group_share_a: f64,
    pub allow_degenerate_share: bool,
    pub prevalence_multiplier_c: f64,
    pub cond_dist: Option<ConditionalComponents>,
    pub noisy_labels: Option<NoisyLabelSpec>,
    pub dynamic_shift: Option<DynamicShiftSpec>,
}

impl Default for BiasSpec {
    fn default() -> Self {
        BiasSpec {
            group_share_a: 0.5,
            allow_degenerate_share: false,
            prevalence_multiplier_c: 1.0,
            cond_dist: None,
            noisy_labels: None,
            dynamic_shift: None,
        }
    }
}

/// Record of one applied injection, kept on the dataset for verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BiasCondition {
    GroupAttachment { share_a: f64 },
    PrevalenceDisparity { c: f64 },
    ClassConditional { components: ConditionalComponents },
    NoisyLabels { spec: NoisyLabelSpec },
    DynamicShift { spec: DynamicShiftSpec },
}

impl BiasCondition {
    pub fn name(&self) -> &'static str {
        match self {
            BiasCondition::GroupAttachment { .. } => "group_attachment",
            BiasCondition::PrevalenceDisparity { .. } => "prevalence_disparity",
            BiasCondition::ClassConditional { .. } => "class_conditional",
            BiasCondition::NoisyLabels { .. } => "noisy_labels",
            BiasCondition::DynamicShift { .. } => "dynamic_shift",
        }
    }
}

/// An ordered collection of instances plus generation metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub instances: Vec<Instance>,
    /// Feature count shared by every instance.
    pub d: usize,
    /// Number of months on the temporal axis; every month < months.
    pub months: u32,
    /// Prevalence of true labels recorded at creation.
    pub base_prevalence: f64,
    /// Applied bias conditions, in application order.
    pub provenance: Vec<BiasCondition>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn groups_attached(&self) -> bool {
        self.provenance
            .iter()
            .any(|c| matches!(c, BiasCondition::GroupAttachment { .. }))
    }

    pub fn conditional_features_present(&self) -> bool {
        self.provenance
            .iter()
            .any(|c| matches!(c, BiasCondition::ClassConditional { .. }))
    }

    /// Column indices of the appended x1, x2 (always the last two).
    pub fn conditional_feature_columns(&self) -> Option<(usize, usize)> {
        if self.conditional_features_present() {
            Some((self.d - 2, self.d - 1))
        } else {
            None
        }
    }

    pub fn true_prevalence(&self) -> f64 {
        let pos = self.instances.iter().filter(|i| i.true_label).count();
        pos as f64 / self.len() as f64
    }

    pub fn observed_prevalence(&self) -> f64 {
        let pos = self.instances.iter().filter(|i| i.observed_label).count();
        pos as f64 / self.len() as f64
    }

    pub fn observed_prevalence_of(&self, group: Group) -> f64 {
        let (mut pos, mut n) = (0usize, 0usize);
        for inst in &self.instances {
            if inst.group == group {
                n += 1;
                if inst.observed_label {
                    pos += 1;
                }
            }
        }
        if n == 0 {
            0.0
        } else {
            pos as f64 / n as f64
        }
    }

    pub fn group_count(&self, group: Group) -> usize {
        self.instances.iter().filter(|i| i.group == group).count()
    }

    /// Rows whose month lies in [start, end); metadata is carried over.
    pub fn slice_by_months(&self, range: MonthRange) -> Dataset {
        Dataset {
            instances: self
                .instances
                .iter()
                .filter(|i| range.contains(i.month))
                .cloned()
                .collect(),
            d: self.d,
            months: self.months,
            base_prevalence: self.base_prevalence,
            provenance: self.provenance.clone(),
        }
    }

    pub fn groups(&self) -> Vec<Group> {
        self.instances.iter().map(|i| i.group).collect()
    }

    pub fn true_labels(&self) -> Vec<bool> {
        self.instances.iter().map(|i| i.true_label).collect()
    }

    pub fn observed_labels(&self) -> Vec<bool> {
        self.instances.iter().map(|i| i.observed_label).collect()
    }
}

/// Generates the base population: exactly `round(n * prevalence)` positives,
/// spherical class-conditional Gaussians in `d` dims with partial overlap,
/// uniformly assigned months, observed = true labels, group defaulted to A
/// until [`attach_protected`] runs.
pub fn gen_base(n: usize, prevalence: f64, d: usize, months: u32, seed: u64) -> Result<Dataset> {
    if n == 0 || d < 2 {
        return Err(Error::EmptyOrDegenerateConfig(format!(
            "n={n}, d={d}; need n > 0 and d >= 2"
        )));
    }
    if !(prevalence > 0.0 && prevalence < 1.0) {
        return Err(Error::EmptyOrDegenerateConfig(format!(
            "prevalence {prevalence} outside (0, 1)"
        )));
    }
    if months < 2 {
        return Err(Error::EmptyOrDegenerateConfig(format!(
            "months {months}; need at least 2"
        )));
    }
    let positives = (n as f64 * prevalence).round() as usize;
    if positives < MIN_POSITIVES {
        return Err(Error::InsufficientPositives {
            min: MIN_POSITIVES,
            got: positives,
        });
    }
    if positives >= n {
        return Err(Error::EmptyOrDegenerateConfig(
            "prevalence leaves no negatives".to_string(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = vec![true; positives];
    labels.resize(n, false);
    labels.shuffle(&mut rng);

    let offset = BASE_MEAN_SEPARATION / (d as f64).sqrt();
    let mut instances = Vec::with_capacity(n);
    for (id, &label) in labels.iter().enumerate() {
        let month = rng.random_range(0..months);
        let mut features = Vec::with_capacity(d);
        for _ in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            features.push(if label { z + offset } else { z });
        }
        instances.push(Instance {
            id: id as u64,
            month,
            group: Group::A,
            true_label: label,
            observed_label: label,
            features,
        });
    }

    Ok(Dataset {
        instances,
        d,
        months,
        base_prevalence: positives as f64 / n as f64,
        provenance: Vec::new(),
    })
}

/// Draws each instance's group independently as Bernoulli(share_a),
/// reading nothing else from the row.
pub fn attach_protected(ds: &Dataset, group_share_a: f64, seed: u64) -> Result<Dataset> {
    attach_protected_with(ds, group_share_a, false, seed)
}

/// As [`attach_protected`], with exact 0/1 shares permitted when
/// `allow_degenerate` is set.
pub fn attach_protected_with(
    ds: &Dataset,
    group_share_a: f64,
    allow_degenerate: bool,
    seed: u64,
) -> Result<Dataset> {
    if ds.is_empty() {
        return Err(Error::EmptyOrDegenerateConfig("empty dataset".to_string()));
    }
    let in_open = group_share_a > 0.0 && group_share_a < 1.0;
    let degenerate_ok = allow_degenerate && (group_share_a == 0.0 || group_share_a == 1.0);
    if !(in_open || degenerate_ok) {
        return Err(Error::DegenerateGroupShare(group_share_a));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ds.clone();
    for inst in &mut out.instances {
        inst.group = if rng.random_bool(group_share_a) {
            Group::A
        } else {
            Group::B
        };
    }
    out.provenance.push(BiasCondition::GroupAttachment {
        share_a: group_share_a,
    });
    Ok(out)
}

/// Relative tolerance on every injected ratio target.
pub const RATIO_TOLERANCE: f64 = 0.05;

/// Reassigns group membership (never labels, never features) so that
/// P[Y=1 | Z=A] = c * P[Y=1 | Z=B] holds empirically, keeping group sizes
/// and total prevalence exactly as they were.
pub fn inject_prevalence_disparity(ds: &Dataset, c: f64, seed: u64) -> Result<Dataset> {
    if !ds.groups_attached() {
        return Err(Error::ProvenanceMismatch(
            "groups must be attached before injecting prevalence disparity".to_string(),
        ));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "prevalence multiplier must be finite and positive, got {c}"
        )));
    }

    let mut out = ds.clone();
    if c == 1.0 {
        // No-op fast path: rows untouched, condition still recorded so
        // verification has an entry to confirm.
        out.provenance.push(BiasCondition::PrevalenceDisparity { c });
        return Ok(out);
    }

    let n_a = ds.group_count(Group::A);
    let n_b = ds.len() - n_a;
    let total_pos = ds.instances.iter().filter(|i| i.true_label).count();
    if n_a == 0 || n_b == 0 {
        return Err(Error::InfeasibleDisparity {
            c,
            reason: "one group is empty".to_string(),
        });
    }

    // Solve p_a / n_a = c * (P - p_a) / n_b for the positive count in A.
    let pa = (c * n_a as f64 * total_pos as f64 / (n_b as f64 + c * n_a as f64)).round();
    let pa = pa as i64;
    if pa < 1 || pa > total_pos as i64 - 1 || pa > n_a as i64 {
        return Err(Error::InfeasibleDisparity {
            c,
            reason: format!(
                "cannot place {pa} of {total_pos} positives in group A (size {n_a}) \
                 while keeping both groups non-empty of positives"
            ),
        });
    }
    let pa = pa as usize;
    let neg_a = n_a - pa;
    let total_neg = ds.len() - total_pos;
    if neg_a > total_neg {
        return Err(Error::InfeasibleDisparity {
            c,
            reason: "not enough negatives to fill group A".to_string(),
        });
    }
    let achieved = (pa as f64 / n_a as f64) / ((total_pos - pa) as f64 / n_b as f64);
    if (achieved - c).abs() / c > RATIO_TOLERANCE {
        return Err(Error::InfeasibleDisparity {
            c,
            reason: format!("integer rounding only reaches ratio {achieved:.4}"),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos_idx: Vec<usize> = Vec::with_capacity(total_pos);
    let mut neg_idx: Vec<usize> = Vec::with_capacity(total_neg);
    for (i, inst) in ds.instances.iter().enumerate() {
        if inst.true_label {
            pos_idx.push(i);
        } else {
            neg_idx.push(i);
        }
    }
    pos_idx.shuffle(&mut rng);
    neg_idx.shuffle(&mut rng);
    for (k, &i) in pos_idx.iter().enumerate() {
        out.instances[i].group = if k < pa { Group::A } else { Group::B };
    }
    for (k, &i) in neg_idx.iter().enumerate() {
        out.instances[i].group = if k < neg_a { Group::A } else { Group::B };
    }
    out.provenance.push(BiasCondition::PrevalenceDisparity { c });
    Ok(out)
}

/// Appends x1, x2 drawn from the component matching each row's
/// (true_label, group). Increases `d` by 2.
pub fn inject_class_conditional_bias(
    ds: &Dataset,
    components: &ConditionalComponents,
    seed: u64,
) -> Result<Dataset> {
    if !ds.groups_attached() {
        return Err(Error::ProvenanceMismatch(
            "groups must be attached before injecting class-conditional bias".to_string(),
        ));
    }
    if ds.conditional_features_present() {
        return Err(Error::ProvenanceMismatch(
            "class-conditional features already present".to_string(),
        ));
    }
    components.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ds.clone();
    for inst in &mut out.instances {
        let (x1, x2) = components.get(inst.true_label, inst.group).sample(&mut rng);
        inst.features.push(x1);
        inst.features.push(x2);
    }
    out.d += 2;
    out.provenance.push(BiasCondition::ClassConditional {
        components: *components,
    });
    Ok(out)
}

/// Flips observed labels (only) in the affected group until the observed
/// prevalence target is met. Flipped rows are picked uniformly without
/// replacement among the eligible ones.
pub fn inject_noisy_labels(
    ds: &Dataset,
    mode: NoiseMode,
    target_multiplier: f64,
    affected_group: Group,
    seed: u64,
) -> Result<Dataset> {
    if !ds.groups_attached() {
        return Err(Error::ProvenanceMismatch(
            "groups must be attached before injecting label noise".to_string(),
        ));
    }
    if !(target_multiplier > 0.0) || !target_multiplier.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "target multiplier must be finite and positive, got {target_multiplier}"
        )));
    }

    let other = affected_group.other();
    let (mut pos_a, mut n_a, mut pos_o, mut n_o) = (0i64, 0i64, 0i64, 0i64);
    for inst in &ds.instances {
        if inst.group == affected_group {
            n_a += 1;
            pos_a += inst.observed_label as i64;
        } else {
            n_o += 1;
            pos_o += inst.observed_label as i64;
        }
    }
    if n_a == 0 || n_o == 0 {
        return Err(Error::InfeasibleNoiseTarget("a group is empty".to_string()));
    }
    if pos_o == 0 {
        return Err(Error::InfeasibleNoiseTarget(format!(
            "reference group {other} has no observed positives to anchor the ratio"
        )));
    }

    let spec = NoisyLabelSpec {
        mode,
        target_multiplier,
        affected_group,
    };
    let reference = pos_o as f64 / n_o as f64;
    let (flips, flip_to) = match mode {
        NoiseMode::Inflate => {
            let target_pos = (target_multiplier * reference * n_a as f64).round() as i64;
            let k = target_pos - pos_a;
            if k < 0 {
                return Err(Error::InfeasibleNoiseTarget(format!(
                    "observed ratio already exceeds {target_multiplier}; inflate can only flip 0 -> 1"
                )));
            }
            (k as usize, true)
        }
        NoiseMode::Equalize => {
            let target_pos = (reference * n_a as f64).round() as i64;
            let k = pos_a - target_pos;
            if k < 0 {
                return Err(Error::InfeasibleNoiseTarget(
                    "affected group's observed prevalence is already below the reference; \
                     equalize can only flip 1 -> 0"
                        .to_string(),
                ));
            }
            (k as usize, false)
        }
    };

    let mut out = ds.clone();
    if flips > 0 {
        let eligible: Vec<usize> = ds
            .instances
            .iter()
            .enumerate()
            .filter(|(_, i)| i.group == affected_group && i.observed_label != flip_to)
            .map(|(idx, _)| idx)
            .collect();
        if flips > eligible.len() {
            return Err(Error::InfeasibleNoiseTarget(format!(
                "need {flips} flips but only {} eligible rows",
                eligible.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picks = rand::seq::index::sample(&mut rng, eligible.len(), flips);
        for p in picks.iter() {
            out.instances[eligible[p]].observed_label = flip_to;
        }
    }

    // Confirm the integer solution actually lands inside the tolerance band.
    let achieved = out.observed_prevalence_of(affected_group) / out.observed_prevalence_of(other);
    let target = match mode {
        NoiseMode::Inflate => target_multiplier,
        NoiseMode::Equalize => 1.0,
    };
    if (achieved - target).abs() / target > RATIO_TOLERANCE {
        return Err(Error::InfeasibleNoiseTarget(format!(
            "integer rounding only reaches observed ratio {achieved:.4} (target {target})"
        )));
    }
    out.provenance.push(BiasCondition::NoisyLabels { spec });
    Ok(out)
}

/// Redraws x1, x2 for adapted-group rows in the shift window from the
/// post-shift components keyed only by true label. Rows outside the
/// window or group are untouched; the redraw is keyed per (seed, id), so
/// applying the same shift twice leaves rows unchanged.
pub fn apply_dynamic_shift(ds: &Dataset, spec: &DynamicShiftSpec, seed: u64) -> Result<Dataset> {
    if spec.shift_months.is_empty() {
        return Ok(ds.clone());
    }
    let (c1, c2) = ds
        .conditional_feature_columns()
        .ok_or(Error::MissingConditionalFeatures)?;
    if spec.shift_months.end > ds.months {
        return Err(Error::InvalidParameter(format!(
            "shift window [{}, {}) exceeds the {}-month timeline",
            spec.shift_months.start, spec.shift_months.end, ds.months
        )));
    }
    spec.post_label0.validate()?;
    spec.post_label1.validate()?;

    let mut out = ds.clone();
    for inst in &mut out.instances {
        if inst.group == spec.adapted_group && spec.shift_months.contains(inst.month) {
            let mut rng = ChaCha8Rng::seed_from_u64(stats::mix_seed(seed, inst.id));
            let (x1, x2) = spec.post(inst.true_label).sample(&mut rng);
            inst.features[c1] = x1;
            inst.features[c2] = x2;
        }
    }
    out.provenance.push(BiasCondition::DynamicShift { spec: *spec });
    Ok(out)
}

/// One verified condition in a [`BiasVerificationReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasCheck {
    pub condition: String,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub pass: bool,
    pub detail: String,
}

/// Statistical certificate that the declared bias conditions hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasVerificationReport {
    pub alpha: f64,
    pub entries: Vec<BiasCheck>,
}

impl BiasVerificationReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn entry(&self, condition: &str) -> Option<&BiasCheck> {
        self.entries.iter().find(|e| e.condition == condition)
    }
}

/// Runs the matching statistical test for each condition in the dataset's
/// provenance: binomial share + chi-square independence for attachment,
/// a ratio z-test for prevalence disparity, per-label two-sample KS for
/// class-conditional bias, an exact count audit for label noise, and
/// pre/post-window KS for the dynamic shift.
pub fn verify_bias_conditions(ds: &Dataset, alpha: f64) -> Result<BiasVerificationReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha {alpha} outside (0, 1)"
        )));
    }
    let mut entries = Vec::new();
    for (pos, cond) in ds.provenance.iter().enumerate() {
        let entry = match cond {
            BiasCondition::GroupAttachment { share_a } => {
                verify_group_attachment(ds, *share_a, pos, alpha)
            }
            BiasCondition::PrevalenceDisparity { c } => verify_prevalence(ds, *c, alpha),
            BiasCondition::ClassConditional { components } => {
                verify_class_conditional(ds, components, pos, alpha)?
            }
            BiasCondition::NoisyLabels { spec } => verify_noisy_labels(ds, spec),
            BiasCondition::DynamicShift { spec } => verify_dynamic_shift(ds, spec, alpha)?,
        };
        entries.push(entry);
    }
    Ok(BiasVerificationReport { alpha, entries })
}

fn verify_group_attachment(ds: &Dataset, share_a: f64, pos: usize, alpha: f64) -> BiasCheck {
    let n = ds.len() as f64;
    let count_a = ds.group_count(Group::A) as f64;
    let sigma = (n * share_a * (1.0 - share_a)).sqrt();
    let share_ok = if sigma > 0.0 {
        (count_a - n * share_a).abs() <= 4.0 * sigma
    } else {
        count_a == n * share_a
    };

    // The attachment's independence claim only stands while no later
    // condition re-couples Z with Y.
    let superseded = ds.provenance[pos + 1..].iter().any(|c| {
        matches!(
            c,
            BiasCondition::PrevalenceDisparity { c } if *c != 1.0
        ) || matches!(c, BiasCondition::NoisyLabels { .. })
    });
    if superseded {
        BiasCheck {
            condition: "group_attachment".to_string(),
            statistic: count_a / n,
            p_value: None,
            pass: share_ok,
            detail: format!(
                "share A {:.4} vs declared {share_a} (4-sigma bound {}); \
                 independence superseded by later conditions",
                count_a / n,
                if share_ok { "ok" } else { "violated" }
            ),
        }
    } else {
        let mut table = [[0u64; 2]; 2];
        for inst in &ds.instances {
            let r = (inst.group == Group::B) as usize;
            let c = inst.true_label as usize;
            table[r][c] += 1;
        }
        let (chi2, p) = stats::chi2_independence_2x2(table);
        let independent = p >= alpha;
        BiasCheck {
            condition: "group_attachment".to_string(),
            statistic: chi2,
            p_value: Some(p),
            pass: share_ok && independent,
            detail: format!(
                "share A {:.4} vs declared {share_a}; chi-square group x label p = {p:.4}",
                count_a / n
            ),
        }
    }
}

fn verify_prevalence(ds: &Dataset, c: f64, alpha: f64) -> BiasCheck {
    let (mut pos_a, mut n_a, mut pos_b, mut n_b) = (0u64, 0u64, 0u64, 0u64);
    for inst in &ds.instances {
        if inst.group == Group::A {
            n_a += 1;
            pos_a += inst.true_label as u64;
        } else {
            n_b += 1;
            pos_b += inst.true_label as u64;
        }
    }
    let ratio = if pos_b == 0 || n_a == 0 || n_b == 0 {
        f64::INFINITY
    } else {
        (pos_a as f64 / n_a as f64) / (pos_b as f64 / n_b as f64)
    };
    let within = ratio.is_finite() && (ratio - c).abs() / c <= RATIO_TOLERANCE;
    let (z, p) = stats::prevalence_ratio_z(pos_a, n_a, pos_b, n_b, c);
    let ratio_consistent = p >= alpha;
    // For a genuine disparity the plain equality hypothesis must fall.
    let equality_rejected = if c == 1.0 {
        true
    } else {
        stats::two_proportion_z(pos_a, n_a, pos_b, n_b).1 < alpha
    };
    BiasCheck {
        condition: "prevalence_disparity".to_string(),
        statistic: z,
        p_value: Some(p),
        pass: within && ratio_consistent && equality_rejected,
        detail: format!(
            "empirical ratio {ratio:.4} vs declared {c}; ratio-test p = {p:.4}; \
             equality {}",
            if c == 1.0 {
                "not applicable".to_string()
            } else if equality_rejected {
                "rejected".to_string()
            } else {
                "NOT rejected".to_string()
            }
        ),
    }
}

fn verify_class_conditional(
    ds: &Dataset,
    components: &ConditionalComponents,
    pos: usize,
    alpha: f64,
) -> Result<BiasCheck> {
    let (c1, c2) = ds
        .conditional_feature_columns()
        .ok_or_else(|| Error::ProvenanceMismatch("x1,x2 columns missing".to_string()))?;
    // Exclude rows a later dynamic shift redrew; the class-conditional
    // claim applies to the pre-shift distribution.
    let shifted: Vec<&DynamicShiftSpec> = ds.provenance[pos + 1..]
        .iter()
        .filter_map(|c| match c {
            BiasCondition::DynamicShift { spec } => Some(spec),
            _ => None,
        })
        .collect();
    let untouched = |inst: &Instance| {
        !shifted
            .iter()
            .any(|s| inst.group == s.adapted_group && s.shift_months.contains(inst.month))
    };

    let mut max_d: f64 = 0.0;
    let mut min_p: f64 = 1.0;
    let mut ok = true;
    let mut notes = Vec::new();
    for label in [false, true] {
        let grab = |g: Group, col: usize| -> Vec<f64> {
            ds.instances
                .iter()
                .filter(|i| i.true_label == label && i.group == g && untouched(i))
                .map(|i| i.features[col])
                .collect()
        };
        let mut rejected = false;
        for col in [c1, c2] {
            let (d, p) = stats::ks_two_sample(&grab(Group::A, col), &grab(Group::B, col));
            max_d = max_d.max(d);
            min_p = min_p.min(p);
            rejected |= p < alpha;
        }
        let declared_equal = components.groups_equal_for_label(label);
        if rejected == declared_equal {
            ok = false;
        }
        notes.push(format!(
            "label {}: groups {} (declared {})",
            label as u8,
            if rejected { "differ" } else { "match" },
            if declared_equal { "equal" } else { "distinct" }
        ));
    }
    Ok(BiasCheck {
        condition: "class_conditional".to_string(),
        statistic: max_d,
        p_value: Some(min_p),
        pass: ok,
        detail: notes.join("; "),
    })
}

fn verify_noisy_labels(ds: &Dataset, spec: &NoisyLabelSpec) -> BiasCheck {
    let affected = spec.affected_group;
    let mut bad_flip = 0u64;
    let mut flips = 0u64;
    for inst in &ds.instances {
        if inst.observed_label != inst.true_label {
            flips += 1;
            let direction_ok = match spec.mode {
                NoiseMode::Inflate => inst.observed_label && !inst.true_label,
                NoiseMode::Equalize => !inst.observed_label && inst.true_label,
            };
            if inst.group != affected || !direction_ok {
                bad_flip += 1;
            }
        }
    }
    let achieved =
        ds.observed_prevalence_of(affected) / ds.observed_prevalence_of(affected.other());
    let target = match spec.mode {
        NoiseMode::Inflate => spec.target_multiplier,
        NoiseMode::Equalize => 1.0,
    };
    let within = achieved.is_finite() && (achieved - target).abs() / target <= RATIO_TOLERANCE;
    BiasCheck {
        condition: "noisy_labels".to_string(),
        statistic: achieved,
        p_value: None,
        pass: bad_flip == 0 && within,
        detail: format!(
            "{flips} flipped rows ({bad_flip} outside group/direction); \
             observed ratio {achieved:.4} vs target {target}"
        ),
    }
}

fn verify_dynamic_shift(ds: &Dataset, spec: &DynamicShiftSpec, alpha: f64) -> Result<BiasCheck> {
    let (c1, c2) = ds
        .conditional_feature_columns()
        .ok_or_else(|| Error::ProvenanceMismatch("x1,x2 columns missing".to_string()))?;
    let components = ds
        .provenance
        .iter()
        .find_map(|c| match c {
            BiasCondition::ClassConditional { components } => Some(components),
            _ => None,
        })
        .ok_or_else(|| {
            Error::ProvenanceMismatch("dynamic shift without class-conditional origin".to_string())
        })?;

    let mut max_d: f64 = 0.0;
    let mut min_p: f64 = 1.0;
    let mut ok = true;
    let mut notes = Vec::new();
    for group in [Group::A, Group::B] {
        for label in [false, true] {
            let collect = |in_window: bool, col: usize| -> Vec<f64> {
                ds.instances
                    .iter()
                    .filter(|i| {
                        i.group == group
                            && i.true_label == label
                            && spec.shift_months.contains(i.month) == in_window
                    })
                    .map(|i| i.features[col])
                    .collect()
            };
            let mut rejected = false;
            for col in [c1, c2] {
                let (d, p) = stats::ks_two_sample(&collect(false, col), &collect(true, col));
                max_d = max_d.max(d);
                min_p = min_p.min(p);
                rejected |= p < alpha;
            }
            let expected_change =
                group == spec.adapted_group && spec.post(label) != components.get(label, group);
            if rejected != expected_change {
                ok = false;
            }
            notes.push(format!(
                "{group}/label {}: {} (expected {})",
                label as u8,
                if rejected { "shifted" } else { "stable" },
                if expected_change { "shift" } else { "stable" }
            ));
        }
    }
    Ok(BiasCheck {
        condition: "dynamic_shift".to_string(),
        statistic: max_d,
        p_value: Some(min_p),
        pass: ok,
        detail: notes.join("; "),
    })
}

/// Applies a full [`BiasSpec`] pipeline with per-stage sub-seeds derived
/// from `seed`.
pub fn apply_bias_spec(base: &Dataset, spec: &BiasSpec, seed: u64) -> Result<Dataset> {
    let mut ds = attach_protected_with(
        base,
        spec.group_share_a,
        spec.allow_degenerate_share,
        stats::mix_seed(seed, 0x67_72_6f_75_70),
    )?;
    ds = inject_prevalence_disparity(
        &ds,
        spec.prevalence_multiplier_c,
        stats::mix_seed(seed, 0x70_72_65_76),
    )?;
    if let Some(components) = &spec.cond_dist {
        ds = inject_class_conditional_bias(&ds, components, stats::mix_seed(seed, 0x63_6f_6e_64))?;
    }
    if let Some(noise) = &spec.noisy_labels {
        ds = inject_noisy_labels(
            &ds,
            noise.mode,
            noise.target_multiplier,
            noise.affected_group,
            stats::mix_seed(seed, 0x6e_6f_69_73),
        )?;
    }
    if let Some(shift) = &spec.dynamic_shift {
        ds = apply_dynamic_shift(&ds, shift, stats::mix_seed(seed, 0x73_68_69_66))?;
    }
    Ok(ds)
}
