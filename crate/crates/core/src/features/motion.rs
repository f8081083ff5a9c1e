//! Frozen motion embedding. The stub network is a fixed bank of random
//! zero-mean 3×3 filters applied to luma frames and to their temporal
//! differences, pooled by global mean and standard deviation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Result, VqaError};
use crate::image::Image;

pub trait MotionAdapter: Send + Sync {
    fn name(&self) -> &str;
    fn embedding_dim(&self) -> usize;
    /// Expected `(frame_count, side)` of the input chunk.
    fn input_shape(&self) -> (usize, usize);
    fn apply(&self, frames: &[Image]) -> Result<Vec<f64>>;
    /// Read-only view of the weights; nothing in the crate mutates them.
    fn parameters(&self) -> &[f64];
    fn trainable(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StubMotion {
    name: String,
    filters: usize,
    frames: usize,
    side: usize,
    weights: Vec<f64>,
}

/// Scalars appended after the filter statistics: RGB mean/std and the
/// mean/std of per-step absolute frame differences.
const EXTRA_DIMS: usize = 8;

impl StubMotion {
    /// `embedding_dim` must be `4·k + 8` for some `k ≥ 1`.
    pub fn new(
        name: impl Into<String>,
        embedding_dim: usize,
        frames: usize,
        side: usize,
        seed: u64,
    ) -> Result<Self> {
        if embedding_dim < EXTRA_DIMS + 4 || (embedding_dim - EXTRA_DIMS) % 4 != 0 {
            return Err(VqaError::Config(format!(
                "stub motion embedding dim must be 4k+{EXTRA_DIMS}, got {embedding_dim}"
            )));
        }
        if frames < 2 || side < 3 {
            return Err(VqaError::Config("stub motion needs ≥2 frames of side ≥3".into()));
        }
        let filters = (embedding_dim - EXTRA_DIMS) / 4;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0 / 3.0).expect("valid normal");
        let mut weights = Vec::with_capacity(filters * 9);
        for _ in 0..filters {
            let mut k: Vec<f64> = (0..9).map(|_| normal.sample(&mut rng)).collect();
            let mean = k.iter().sum::<f64>() / 9.0;
            k.iter_mut().for_each(|v| *v -= mean);
            weights.extend(k);
        }
        Ok(StubMotion {
            name: name.into(),
            filters,
            frames,
            side,
            weights,
        })
    }

    fn luma(img: &Image) -> Vec<f64> {
        let n = img.height * img.width;
        (0..n)
            .map(|i| {
                0.299 * img.data[i] as f64
                    + 0.587 * img.data[n + i] as f64
                    + 0.114 * img.data[2 * n + i] as f64
            })
            .collect()
    }

    /// Accumulate sum and sum of squares of |filter response| (valid region).
    fn filter_moments(&self, plane: &[f64], acc: &mut [(f64, f64)]) {
        let s = self.side;
        for (f, slot) in acc.iter_mut().enumerate() {
            let k = &self.weights[f * 9..(f + 1) * 9];
            for y in 1..s - 1 {
                for x in 1..s - 1 {
                    let mut r = 0.0;
                    for ky in 0..3 {
                        let row = &plane[(y + ky - 1) * s + x - 1..(y + ky - 1) * s + x + 2];
                        r += k[ky * 3] * row[0] + k[ky * 3 + 1] * row[1] + k[ky * 3 + 2] * row[2];
                    }
                    let r = r.abs();
                    slot.0 += r;
                    slot.1 += r * r;
                }
            }
        }
    }
}

fn moments_to_stats(sum: f64, sq: f64, n: f64) -> (f64, f64) {
    let mean = sum / n;
    (mean, (sq / n - mean * mean).max(0.0).sqrt())
}

impl MotionAdapter for StubMotion {
    fn name(&self) -> &str {
        &self.name
    }

    fn embedding_dim(&self) -> usize {
        4 * self.filters + EXTRA_DIMS
    }

    fn input_shape(&self) -> (usize, usize) {
        (self.frames, self.side)
    }

    fn apply(&self, frames: &[Image]) -> Result<Vec<f64>> {
        if frames.len() != self.frames {
            return Err(VqaError::invalid(format!(
                "motion network expects {} frames, got {}",
                self.frames,
                frames.len()
            )));
        }
        if let Some(bad) = frames
            .iter()
            .find(|f| f.channels != 3 || f.height != self.side || f.width != self.side)
        {
            return Err(VqaError::invalid(format!(
                "motion network expects 3x{s}x{s} frames, got {}x{}x{}",
                bad.channels,
                bad.height,
                bad.width,
                s = self.side
            )));
        }
        let lumas: Vec<Vec<f64>> = frames.iter().map(Self::luma).collect();
        let inner = ((self.side - 2) * (self.side - 2)) as f64;

        let mut spatial = vec![(0.0, 0.0); self.filters];
        for l in &lumas {
            self.filter_moments(l, &mut spatial);
        }
        let mut temporal = vec![(0.0, 0.0); self.filters];
        let mut step_energy = Vec::with_capacity(lumas.len() - 1);
        for pair in lumas.windows(2) {
            let diff: Vec<f64> = pair[1].iter().zip(&pair[0]).map(|(a, b)| a - b).collect();
            step_energy.push(diff.iter().map(|d| d.abs()).sum::<f64>() / diff.len() as f64);
            self.filter_moments(&diff, &mut temporal);
        }

        let mut out = Vec::with_capacity(self.embedding_dim());
        let ns = inner * lumas.len() as f64;
        let nt = inner * (lumas.len() - 1) as f64;
        for &(s, q) in &spatial {
            let (m, sd) = moments_to_stats(s, q, ns);
            out.extend([m, sd]);
        }
        for &(s, q) in &temporal {
            let (m, sd) = moments_to_stats(s, q, nt);
            out.extend([m, sd]);
        }
        let npx = (self.side * self.side * frames.len()) as f64;
        for c in 0..3 {
            let (mut s, mut q) = (0.0, 0.0);
            for f in frames {
                for &v in f.plane(c) {
                    s += v as f64;
                    q += (v as f64) * (v as f64);
                }
            }
            let (m, sd) = moments_to_stats(s, q, npx);
            out.extend([m, sd]);
        }
        let (s, q) = step_energy
            .iter()
            .fold((0.0, 0.0), |(s, q), &e| (s + e, q + e * e));
        let (m, sd) = moments_to_stats(s, q, step_energy.len() as f64);
        out.extend([m, sd]);
        debug_assert_eq!(out.len(), self.embedding_dim());
        Ok(out)
    }

    fn parameters(&self) -> &[f64] {
        &self.weights
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_and_determinism() {
        let m = StubMotion::new("m", 64, 4, 8, 3).unwrap();
        assert_eq!(m.embedding_dim(), 64);
        let frames: Vec<Image> = (0..4)
            .map(|t| {
                let mut f = Image::new(3, 8, 8);
                for (i, v) in f.data.iter_mut().enumerate() {
                    *v = ((i * 31 + t * 7) % 17) as f32 / 17.0;
                }
                f
            })
            .collect();
        let a = m.apply(&frames).unwrap();
        assert_eq!(a.len(), 64);
        assert_eq!(a, m.apply(&frames).unwrap());
        assert!(a.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_bad_dims() {
        assert!(StubMotion::new("m", 63, 4, 8, 0).is_err());
        let m = StubMotion::new("m", 64, 4, 8, 0).unwrap();
        assert!(m.apply(&vec![Image::new(3, 8, 8); 3]).is_err());
        assert!(m.apply(&vec![Image::new(3, 9, 8); 4]).is_err());
    }
}
