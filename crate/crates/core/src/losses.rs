//! Training objective: mean absolute error plus a pairwise rank hinge.

use crate::error::{Result, VqaError};

pub const DEFAULT_LAMBDA: f64 = 1.0;

/// Predicted and ground-truth video scores of one mini-batch.
#[derive(Clone, Copy, Debug)]
pub struct Batch<'a> {
    pub predictions: &'a [f64],
    pub ground_truth: &'a [f64],
}

impl<'a> Batch<'a> {
    pub fn new(predictions: &'a [f64], ground_truth: &'a [f64]) -> Result<Self> {
        if predictions.is_empty() {
            return Err(VqaError::invalid("empty batch"));
        }
        if predictions.len() != ground_truth.len() {
            return Err(VqaError::invalid(format!(
                "batch has {} predictions but {} labels",
                predictions.len(),
                ground_truth.len()
            )));
        }
        Ok(Batch {
            predictions,
            ground_truth,
        })
    }

    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }
}

pub fn mae_loss(batch: &Batch) -> f64 {
    batch
        .predictions
        .iter()
        .zip(batch.ground_truth)
        .map(|(q, t)| (q - t).abs())
        .sum::<f64>()
        / batch.len() as f64
}

/// `+1` when `a ≥ b`, else `-1`.
pub fn rank_sign(a: f64, b: f64) -> f64 {
    if a >= b {
        1.0
    } else {
        -1.0
    }
}

#[inline]
fn pair_margin(batch: &Batch, i: usize, j: usize) -> (f64, f64) {
    let (ti, tj) = (batch.ground_truth[i], batch.ground_truth[j]);
    let e = rank_sign(ti, tj);
    ((ti - tj).abs() - e * (batch.predictions[i] - batch.predictions[j]), e)
}

/// Mean over all `N²` ordered pairs (diagonal included) of the rank hinge.
pub fn rank_loss(batch: &Batch) -> f64 {
    let n = batch.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += pair_margin(batch, i, j).0.max(0.0);
        }
    }
    acc / (n * n) as f64
}

pub fn total_loss(batch: &Batch, lambda: f64) -> f64 {
    mae_loss(batch) + lambda * rank_loss(batch)
}

/// `∂L/∂Q_i` for every prediction. Subgradients at kinks are taken as 0.
pub fn total_loss_grad(batch: &Batch, lambda: f64) -> Vec<f64> {
    let n = batch.len();
    let mut grad: Vec<f64> = batch
        .predictions
        .iter()
        .zip(batch.ground_truth)
        .map(|(q, t)| {
            let d = q - t;
            if d > 0.0 {
                1.0 / n as f64
            } else if d < 0.0 {
                -1.0 / n as f64
            } else {
                0.0
            }
        })
        .collect();
    if lambda != 0.0 {
        let scale = lambda / (n * n) as f64;
        for i in 0..n {
            for j in 0..n {
                let (m, e) = pair_margin(batch, i, j);
                if m > 0.0 {
                    grad[i] -= scale * e;
                    grad[j] += scale * e;
                }
            }
        }
    }
    grad
}
