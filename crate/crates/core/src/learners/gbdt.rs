//! Gradient-boosted shallow regression trees on logistic-loss gradients.
//!
//! Trees are grown level-wise with exact greedy variance-reduction splits
//! over thresholds at midpoints of sorted unique feature values; leaf
//! values are a Newton step (sum of gradients over sum of hessians, with
//! a fixed L2 term and a magnitude cap), scaled by the learning rate.
//! No binning, no subsampling: training is deterministic given the data
//! order and the configuration.

use super::{
    design_columns, mean_logistic_loss, sigmoid, FeatureLayout, GbdtParams, Model, ModelConfig,
    ModelParams, TrainingMeta,
};
use crate::error::{Error, Result};
use crate::synthdata::Dataset;
use serde::{Deserialize, Serialize};

/// Fixed L2 regularizer in the Newton leaf denominator.
const LEAF_L2: f64 = 1.0;
/// Cap on the unshrunk leaf magnitude; keeps near-pure leaves from
/// producing unbounded steps.
const MAX_LEAF_VALUE: f64 = 4.0;
/// Gains at or below this are treated as no improvement.
const MIN_GAIN: f64 = 1e-12;

const SETTLED: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Routes a row (via a column fetcher) to its leaf value. Rule:
    /// go left when `value < threshold`.
    pub fn predict_with(&self, fetch: &dyn Fn(usize) -> f64) -> f64 {
        let mut at = 0u32;
        loop {
            match self.nodes[at as usize] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if fetch(feature as usize) < threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }
}

struct FrontierNode {
    arena_id: u32,
    n: u32,
    sum_g: f64,
    sum_h: f64,
}

struct BuiltTree {
    tree: Tree,
    /// Shrunk leaf value each training sample landed in.
    delta: Vec<f64>,
}

fn leaf_value(sum_g: f64, sum_h: f64, learning_rate: f64) -> f64 {
    let raw = sum_g / (sum_h + LEAF_L2);
    learning_rate * raw.clamp(-MAX_LEAF_VALUE, MAX_LEAF_VALUE)
}

fn build_tree(
    cols: &[Vec<f64>],
    sorted: &[Vec<u32>],
    g: &[f64],
    h: &[f64],
    params: &GbdtParams,
) -> BuiltTree {
    let n = g.len();
    let mut arena: Vec<Node> = vec![Node::Leaf { value: 0.0 }];
    let mut slot = vec![0u32; n];
    let mut delta = vec![0.0; n];

    let root_g: f64 = g.iter().sum();
    let root_h: f64 = h.iter().sum();
    let mut frontier = vec![FrontierNode {
        arena_id: 0,
        n: n as u32,
        sum_g: root_g,
        sum_h: root_h,
    }];

    for _depth in 0..params.max_depth {
        if frontier.is_empty() {
            break;
        }
        let k = frontier.len();
        let parent_score: Vec<f64> = frontier
            .iter()
            .map(|f| f.sum_g * f.sum_g / f.n as f64)
            .collect();
        // (gain, feature, threshold) per frontier slot; strictly greater
        // gain replaces, so the earliest feature / lowest threshold wins
        // ties deterministically.
        let mut best: Vec<Option<(f64, u32, f64)>> = vec![None; k];

        let mut cnt = vec![0u32; k];
        let mut sum = vec![0.0f64; k];
        let mut last = vec![0.0f64; k];
        let mut seen = vec![false; k];
        for (f, order) in sorted.iter().enumerate() {
            cnt.fill(0);
            sum.fill(0.0);
            seen.fill(false);
            let col = &cols[f];
            for &iu in order {
                let i = iu as usize;
                let s = slot[i];
                if s == SETTLED {
                    continue;
                }
                let s = s as usize;
                let v = col[i];
                if seen[s] && v > last[s] {
                    let left_n = cnt[s];
                    let right_n = frontier[s].n - left_n;
                    if left_n >= params.min_leaf as u32 && right_n >= params.min_leaf as u32 {
                        let gl = sum[s];
                        let gr = frontier[s].sum_g - gl;
                        let gain = gl * gl / left_n as f64 + gr * gr / right_n as f64
                            - parent_score[s];
                        let better = match best[s] {
                            None => gain > MIN_GAIN,
                            Some((bg, _, _)) => gain > bg,
                        };
                        if better {
                            let mut thr = 0.5 * (last[s] + v);
                            // Midpoints of adjacent floats can round onto an
                            // endpoint; pin to the right value so rows equal
                            // to `last` still go left under `x < thr`.
                            if !(thr > last[s]) {
                                thr = v;
                            }
                            best[s] = Some((gain, f as u32, thr));
                        }
                    }
                }
                cnt[s] += 1;
                sum[s] += g[i];
                last[s] = v;
                seen[s] = true;
            }
        }

        // Materialize: split winners get children, the rest settle.
        enum Action {
            Split { feature: u32, threshold: f64, left_slot: u32, right_slot: u32 },
            Settle { value: f64 },
        }
        let mut actions: Vec<Action> = Vec::with_capacity(k);
        let mut next_frontier: Vec<FrontierNode> = Vec::new();
        for (s, node) in frontier.iter().enumerate() {
            match best[s] {
                Some((gain, feature, threshold)) if gain > MIN_GAIN => {
                    let left_id = arena.len() as u32;
                    arena.push(Node::Leaf { value: 0.0 });
                    let right_id = arena.len() as u32;
                    arena.push(Node::Leaf { value: 0.0 });
                    arena[node.arena_id as usize] = Node::Split {
                        feature,
                        threshold,
                        left: left_id,
                        right: right_id,
                    };
                    let left_slot = next_frontier.len() as u32;
                    next_frontier.push(FrontierNode {
                        arena_id: left_id,
                        n: 0,
                        sum_g: 0.0,
                        sum_h: 0.0,
                    });
                    let right_slot = next_frontier.len() as u32;
                    next_frontier.push(FrontierNode {
                        arena_id: right_id,
                        n: 0,
                        sum_g: 0.0,
                        sum_h: 0.0,
                    });
                    actions.push(Action::Split {
                        feature,
                        threshold,
                        left_slot,
                        right_slot,
                    });
                }
                _ => {
                    let value = leaf_value(node.sum_g, node.sum_h, params.learning_rate);
                    arena[node.arena_id as usize] = Node::Leaf { value };
                    actions.push(Action::Settle { value });
                }
            }
        }

        for i in 0..n {
            let s = slot[i];
            if s == SETTLED {
                continue;
            }
            match actions[s as usize] {
                Action::Split {
                    feature,
                    threshold,
                    left_slot,
                    right_slot,
                } => {
                    let child = if cols[feature as usize][i] < threshold {
                        left_slot
                    } else {
                        right_slot
                    };
                    slot[i] = child;
                    let fnode = &mut next_frontier[child as usize];
                    fnode.n += 1;
                    fnode.sum_g += g[i];
                    fnode.sum_h += h[i];
                }
                Action::Settle { value } => {
                    delta[i] = value;
                    slot[i] = SETTLED;
                }
            }
        }
        frontier = next_frontier;
    }

    // Depth exhausted: everything still open becomes a leaf.
    if !frontier.is_empty() {
        let values: Vec<f64> = frontier
            .iter()
            .map(|node| {
                let value = leaf_value(node.sum_g, node.sum_h, params.learning_rate);
                arena[node.arena_id as usize] = Node::Leaf { value };
                value
            })
            .collect();
        for i in 0..n {
            let s = slot[i];
            if s != SETTLED {
                delta[i] = values[s as usize];
            }
        }
    }

    BuiltTree {
        tree: Tree { nodes: arena },
        delta,
    }
}

pub(super) fn train(ds: &Dataset, params: &GbdtParams, awareness: bool) -> Result<Model> {
    let n = ds.len();
    if params.min_leaf > n {
        return Err(Error::DegenerateSplitConfig {
            min_leaf: params.min_leaf,
            n,
        });
    }
    let (cols, y) = design_columns(ds, awareness);
    let sorted: Vec<Vec<u32>> = cols
        .iter()
        .map(|col| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_unstable_by(|&a, &b| {
                col[a as usize]
                    .partial_cmp(&col[b as usize])
                    .expect("finite features")
                    .then(a.cmp(&b))
            });
            idx
        })
        .collect();

    let positives = y.iter().filter(|&&v| v == 1.0).count();
    let pbar = positives as f64 / n as f64;
    let base_score = (pbar / (1.0 - pbar)).ln();

    let mut z = vec![base_score; n];
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut trees = Vec::with_capacity(params.rounds);
    let mut loss_trace = Vec::with_capacity(params.rounds + 1);
    loss_trace.push(mean_logistic_loss(&z, &y));

    for _ in 0..params.rounds {
        for i in 0..n {
            let p = sigmoid(z[i]);
            g[i] = y[i] - p;
            h[i] = p * (1.0 - p);
        }
        let built = build_tree(&cols, &sorted, &g, &h, params);
        for i in 0..n {
            z[i] += built.delta[i];
        }
        let loss = mean_logistic_loss(&z, &y);
        if !loss.is_finite() {
            return Err(Error::DivergedTraining);
        }
        loss_trace.push(loss);
        trees.push(built.tree);
    }

    let final_loss = *loss_trace.last().expect("trace has the base entry");
    Ok(Model {
        config: ModelConfig {
            awareness,
            params: super::Hyperparams::Gbdt(*params),
        },
        layout: FeatureLayout {
            n_features: ds.d,
            includes_group: awareness,
        },
        params: ModelParams::Gbdt { base_score, trees },
        meta: TrainingMeta {
            final_loss,
            iterations: params.rounds,
            loss_trace,
        },
    })
}

#[cfg(test)]
pub(crate) mod stump_oracle {
    //! Brute-force single-split reference: evaluates the variance
    //! reduction of every midpoint candidate directly from its
    //! definition (two-pass sums of squared deviations).

    pub fn best_stump(
        cols: &[Vec<f64>],
        g: &[f64],
        min_leaf: usize,
    ) -> Option<(usize, f64, f64)> {
        let n = g.len();
        let sse = |idx: &[usize]| -> f64 {
            if idx.is_empty() {
                return 0.0;
            }
            let mean = idx.iter().map(|&i| g[i]).sum::<f64>() / idx.len() as f64;
            idx.iter().map(|&i| (g[i] - mean).powi(2)).sum()
        };
        let all: Vec<usize> = (0..n).collect();
        let parent = sse(&all);
        let mut best: Option<(usize, f64, f64)> = None; // (feature, threshold, gain)
        for (f, col) in cols.iter().enumerate() {
            let mut values: Vec<f64> = col.clone();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            values.dedup();
            for w in values.windows(2) {
                let mut thr = 0.5 * (w[0] + w[1]);
                if !(thr > w[0]) {
                    thr = w[1];
                }
                let left: Vec<usize> = (0..n).filter(|&i| col[i] < thr).collect();
                let right: Vec<usize> = (0..n).filter(|&i| col[i] >= thr).collect();
                if left.len() < min_leaf || right.len() < min_leaf {
                    continue;
                }
                let gain = parent - sse(&left) - sse(&right);
                let better = match best {
                    None => gain > 1e-12,
                    Some((_, _, bg)) => gain > bg,
                };
                if better {
                    best = Some((f, thr, gain));
                }
            }
        }
        best
    }
}
