use crate::error::{Result, VqaError};

/// A dense `channels × height × width` activation map.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        FeatureMap {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    #[inline]
    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }
}

/// Global per-channel mean and population standard deviation.
pub fn stage_statistics(map: &FeatureMap) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = map.height * map.width;
    if n == 0 || map.channels == 0 {
        return Err(VqaError::invalid("feature map has no spatial locations"));
    }
    let mut means = Vec::with_capacity(map.channels);
    let mut stds = Vec::with_capacity(map.channels);
    for c in 0..map.channels {
        let plane = map.plane(c);
        let mean = plane.iter().sum::<f64>() / n as f64;
        let var = plane.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        means.push(mean);
        stds.push(var.sqrt());
    }
    Ok((means, stds))
}

/// Backpropagate through [`stage_statistics`]. The std gradient at a
/// zero-variance channel is taken as 0.
pub fn stage_statistics_backward(
    map: &FeatureMap,
    means: &[f64],
    stds: &[f64],
    grad_mean: &[f64],
    grad_std: &[f64],
) -> FeatureMap {
    let n = (map.height * map.width) as f64;
    let mut grad = FeatureMap::zeros(map.channels, map.height, map.width);
    let hw = map.height * map.width;
    for c in 0..map.channels {
        let gm = grad_mean[c] / n;
        let gs = if stds[c] > 0.0 {
            grad_std[c] / (n * stds[c])
        } else {
            0.0
        };
        let src = map.plane(c);
        for (g, &v) in grad.data[c * hw..(c + 1) * hw].iter_mut().zip(src) {
            *g = gm + gs * (v - means[c]);
        }
    }
    grad
}
