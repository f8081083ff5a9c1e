//! Two-layer regressor from a fused chunk feature to a chunk score, and the
//! temporal average that turns chunk scores into a video score.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VqaError};

pub const DEFAULT_HIDDEN_UNITS: usize = 128;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpHead {
    pub input_dim: usize,
    pub hidden_units: usize,
    /// `[hidden][input]`
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

/// Hidden activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct HeadTrace {
    hidden: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadGrads {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl MlpHead {
    pub fn new(input_dim: usize, hidden_units: usize, output_bias: f64, seed: u64) -> Result<Self> {
        if input_dim == 0 || hidden_units == 0 {
            return Err(VqaError::Config("regressor widths must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n1 = Normal::new(0.0, (2.0 / input_dim as f64).sqrt()).expect("valid normal");
        let n2 = Normal::new(0.0, (1.0 / hidden_units as f64).sqrt()).expect("valid normal");
        Ok(MlpHead {
            input_dim,
            hidden_units,
            w1: (0..input_dim * hidden_units).map(|_| n1.sample(&mut rng)).collect(),
            b1: vec![0.0; hidden_units],
            w2: (0..hidden_units).map(|_| n2.sample(&mut rng)).collect(),
            b2: output_bias,
        })
    }

    fn check_width(&self, feature: &[f64]) -> Result<()> {
        if feature.len() != self.input_dim {
            return Err(VqaError::ContractViolation(format!(
                "feature has {} values, regressor expects {}",
                feature.len(),
                self.input_dim
            )));
        }
        Ok(())
    }

    /// `q = w2 · relu(W1 f + b1) + b2`.
    pub fn regress_chunk(&self, feature: &[f64]) -> Result<f64> {
        Ok(self.forward(feature)?.0)
    }

    pub fn forward(&self, feature: &[f64]) -> Result<(f64, HeadTrace)> {
        self.check_width(feature)?;
        let hidden: Vec<f64> = self
            .w1
            .chunks_exact(self.input_dim)
            .zip(&self.b1)
            .map(|(row, b)| {
                let z = row.iter().zip(feature).map(|(w, x)| w * x).sum::<f64>() + b;
                z.max(0.0)
            })
            .collect();
        let q = hidden.iter().zip(&self.w2).map(|(h, w)| h * w).sum::<f64>() + self.b2;
        Ok((q, HeadTrace { hidden }))
    }

    /// Gradients for `dL/dq = grad_q`; also returns `dL/d(feature)`.
    pub fn backward(&self, feature: &[f64], trace: &HeadTrace, grad_q: f64) -> (HeadGrads, Vec<f64>) {
        let mut gw1 = vec![0.0; self.w1.len()];
        let mut gb1 = vec![0.0; self.hidden_units];
        let mut gfeat = vec![0.0; self.input_dim];
        let gw2: Vec<f64> = trace.hidden.iter().map(|h| h * grad_q).collect();
        for (j, &h) in trace.hidden.iter().enumerate() {
            if h <= 0.0 {
                continue;
            }
            let gz = grad_q * self.w2[j];
            gb1[j] = gz;
            let row = &self.w1[j * self.input_dim..(j + 1) * self.input_dim];
            let grow = &mut gw1[j * self.input_dim..(j + 1) * self.input_dim];
            for ((gw, gf), (&w, &x)) in grow.iter_mut().zip(gfeat.iter_mut()).zip(row.iter().zip(feature)) {
                *gw = gz * x;
                *gf += gz * w;
            }
        }
        (
            HeadGrads {
                w1: gw1,
                b1: gb1,
                w2: gw2,
                b2: grad_q,
            },
            gfeat,
        )
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w1.as_mut_slice(),
            self.b1.as_mut_slice(),
            self.w2.as_mut_slice(),
            std::slice::from_mut(&mut self.b2),
        ]
    }

    pub fn flatten_grads(g: HeadGrads) -> Vec<Vec<f64>> {
        vec![g.w1, g.b1, g.w2, vec![g.b2]]
    }
}

/// Temporal average pooling of chunk scores.
pub fn pool_video(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(VqaError::invalid("cannot pool an empty list of chunk scores"));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}
