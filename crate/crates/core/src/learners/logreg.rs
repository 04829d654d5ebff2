//! L2-regularized logistic regression by full-batch gradient descent,
//! deterministic from zero-initialized weights.

use super::{design_columns, sigmoid, FeatureLayout, LogregParams, Model, ModelConfig, ModelParams, TrainingMeta};
use crate::error::{Error, Result};
use crate::synthdata::Dataset;

/// Mean logistic loss with L2 penalty on the weights (intercept excluded),
/// plus its gradient. Row-major `x` of shape n x p.
pub fn loss_and_gradient(
    x: &[f64],
    n: usize,
    p: usize,
    y: &[f64],
    weights: &[f64],
    intercept: f64,
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    assert_eq!(x.len(), n * p);
    assert_eq!(y.len(), n);
    assert_eq!(weights.len(), p);
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; p];
    let mut grad_b = 0.0;
    for i in 0..n {
        let row = &x[i * p..(i + 1) * p];
        let mut z = intercept;
        for j in 0..p {
            z += weights[j] * row[j];
        }
        loss += z.max(0.0) - y[i] * z + (-z.abs()).exp().ln_1p();
        let err = sigmoid(z) - y[i];
        for j in 0..p {
            grad_w[j] += err * row[j];
        }
        grad_b += err;
    }
    let inv_n = 1.0 / n as f64;
    loss *= inv_n;
    grad_b *= inv_n;
    let mut penalty = 0.0;
    for j in 0..p {
        grad_w[j] = grad_w[j] * inv_n + l2 * weights[j];
        penalty += weights[j] * weights[j];
    }
    loss += 0.5 * l2 * penalty;
    (loss, grad_w, grad_b)
}

pub(super) fn train(ds: &Dataset, params: &LogregParams, awareness: bool) -> Result<Model> {
    let (cols, y) = design_columns(ds, awareness);
    let n = ds.len();
    let p = cols.len();
    // Row-major copy; the gradient loop walks rows.
    let mut x = vec![0.0; n * p];
    for (j, col) in cols.iter().enumerate() {
        for i in 0..n {
            x[i * p + j] = col[i];
        }
    }

    let mut weights = vec![0.0; p];
    let mut intercept = 0.0;
    let mut last_loss = f64::INFINITY;
    for _ in 0..params.max_iters {
        let (loss, grad_w, grad_b) = loss_and_gradient(&x, n, p, &y, &weights, intercept, params.l2);
        if !loss.is_finite() {
            return Err(Error::DivergedTraining);
        }
        last_loss = loss;
        for j in 0..p {
            weights[j] -= params.learning_rate * grad_w[j];
        }
        intercept -= params.learning_rate * grad_b;
    }
    let (final_loss, _, _) = loss_and_gradient(&x, n, p, &y, &weights, intercept, params.l2);
    if !final_loss.is_finite() {
        return Err(Error::DivergedTraining);
    }
    let _ = last_loss;

    Ok(Model {
        config: ModelConfig {
            awareness,
            params: super::Hyperparams::Logreg(*params),
        },
        layout: FeatureLayout {
            n_features: ds.d,
            includes_group: awareness,
        },
        params: ModelParams::Logreg { weights, intercept },
        meta: TrainingMeta {
            final_loss,
            iterations: params.max_iters,
            loss_trace: Vec::new(),
        },
    })
}
