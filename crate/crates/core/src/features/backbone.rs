//! Trainable convolutional backbone used by the stub profile: a stack of
//! stride-2 3×3 convolutions with rectifiers, one stage per layer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::stats::FeatureMap;
use crate::error::{Result, VqaError};
use crate::image::Image;

/// ImageNet channel statistics expected by image-classification backbones.
pub const IMAGENET_MEAN: [f64; 3] = [0.485, 0.456, 0.406];
pub const IMAGENET_STD: [f64; 3] = [0.229, 0.224, 0.225];

/// A network that turns an image into `N_s` stage outputs.
pub trait BackboneAdapter: Send + Sync {
    fn name(&self) -> &str;
    fn stage_channels(&self) -> &[usize];
    fn trainable(&self) -> bool;
    fn apply(&self, image: &Image) -> Result<Vec<FeatureMap>>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvLayer {
    pub in_channels: usize,
    pub out_channels: usize,
    /// `[out][in][3][3]`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvGrads {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

const K: usize = 3;

#[inline]
fn out_dim(n: usize) -> usize {
    (n - 1) / 2 + 1
}

impl ConvLayer {
    fn he_init(in_channels: usize, out_channels: usize, rng: &mut ChaCha8Rng) -> Self {
        let std = (2.0 / (in_channels * K * K) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("valid normal");
        ConvLayer {
            in_channels,
            out_channels,
            weight: (0..out_channels * in_channels * K * K)
                .map(|_| normal.sample(rng))
                .collect(),
            bias: vec![0.0; out_channels],
        }
    }

    /// Convolution (stride 2, zero padding 1) followed by a rectifier.
    fn forward(&self, input: &FeatureMap) -> FeatureMap {
        let (h, w) = (input.height, input.width);
        let (oh, ow) = (out_dim(h), out_dim(w));
        let mut out = FeatureMap::zeros(self.out_channels, oh, ow);
        for o in 0..self.out_channels {
            let dst = &mut out.data[o * oh * ow..(o + 1) * oh * ow];
            dst.fill(self.bias[o]);
            for i in 0..self.in_channels {
                let src = input.plane(i);
                for ky in 0..K {
                    for kx in 0..K {
                        let wv = self.weight[((o * self.in_channels + i) * K + ky) * K + kx];
                        for y in 0..oh {
                            let iy = 2 * y + ky;
                            if iy == 0 || iy > h {
                                continue;
                            }
                            let row = &src[(iy - 1) * w..iy * w];
                            let drow = &mut dst[y * ow..(y + 1) * ow];
                            for (x, d) in drow.iter_mut().enumerate() {
                                let ix = 2 * x + kx;
                                if ix == 0 || ix > w {
                                    continue;
                                }
                                *d += wv * row[ix - 1];
                            }
                        }
                    }
                }
            }
            for v in dst.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        out
    }

    /// Given the layer input, its rectified output and `dL/d(output)`,
    /// return parameter gradients and `dL/d(input)`.
    fn backward(
        &self,
        input: &FeatureMap,
        output: &FeatureMap,
        grad_out: &FeatureMap,
        need_input_grad: bool,
    ) -> (ConvGrads, Option<FeatureMap>) {
        let (h, w) = (input.height, input.width);
        let (oh, ow) = (output.height, output.width);
        let mut grads = ConvGrads {
            weight: vec![0.0; self.weight.len()],
            bias: vec![0.0; self.out_channels],
        };
        let mut grad_in = need_input_grad.then(|| FeatureMap::zeros(self.in_channels, h, w));
        let mut masked = vec![0.0; oh * ow];
        for o in 0..self.out_channels {
            let plane = &output.data[o * oh * ow..(o + 1) * oh * ow];
            let gplane = &grad_out.data[o * oh * ow..(o + 1) * oh * ow];
            for ((m, &v), &g) in masked.iter_mut().zip(plane).zip(gplane) {
                *m = if v > 0.0 { g } else { 0.0 };
            }
            grads.bias[o] = masked.iter().sum();
            for i in 0..self.in_channels {
                let src = input.plane(i);
                for ky in 0..K {
                    for kx in 0..K {
                        let widx = ((o * self.in_channels + i) * K + ky) * K + kx;
                        let wv = self.weight[widx];
                        let mut acc = 0.0;
                        for y in 0..oh {
                            let iy = 2 * y + ky;
                            if iy == 0 || iy > h {
                                continue;
                            }
                            let row_off = (iy - 1) * w;
                            for x in 0..ow {
                                let ix = 2 * x + kx;
                                if ix == 0 || ix > w {
                                    continue;
                                }
                                let g = masked[y * ow + x];
                                acc += g * src[row_off + ix - 1];
                                if let Some(gi) = grad_in.as_mut() {
                                    gi.data[i * h * w + row_off + ix - 1] += wv * g;
                                }
                            }
                        }
                        grads.weight[widx] = acc;
                    }
                }
            }
        }
        (grads, grad_in)
    }
}

/// Stage outputs cached for the backward pass.
#[derive(Clone, Debug)]
pub struct BackboneTrace {
    input: FeatureMap,
    stages: Vec<FeatureMap>,
}

impl BackboneTrace {
    pub fn stage_maps(&self) -> &[FeatureMap] {
        &self.stages
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvBackbone {
    pub name: String,
    pub stage_channels: Vec<usize>,
    pub layers: Vec<ConvLayer>,
}

impl ConvBackbone {
    pub fn new(name: impl Into<String>, stage_channels: &[usize], seed: u64) -> Result<Self> {
        if stage_channels.is_empty() || stage_channels.contains(&0) {
            return Err(VqaError::Config(
                "backbone needs at least one stage with positive width".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut in_ch = 3;
        let layers = stage_channels
            .iter()
            .map(|&c| {
                let layer = ConvLayer::he_init(in_ch, c, &mut rng);
                in_ch = c;
                layer
            })
            .collect();
        Ok(ConvBackbone {
            name: name.into(),
            stage_channels: stage_channels.to_vec(),
            layers,
        })
    }

    pub fn normalize(image: &Image) -> Result<FeatureMap> {
        if image.channels != 3 || image.height == 0 || image.width == 0 {
            return Err(VqaError::invalid("backbone expects a non-empty 3-channel image"));
        }
        let n = image.height * image.width;
        let mut map = FeatureMap::zeros(3, image.height, image.width);
        for c in 0..3 {
            for (d, &v) in map.data[c * n..(c + 1) * n].iter_mut().zip(image.plane(c)) {
                *d = (v as f64 - IMAGENET_MEAN[c]) / IMAGENET_STD[c];
            }
        }
        Ok(map)
    }

    pub fn forward_trace(&self, image: &Image) -> Result<BackboneTrace> {
        let input = Self::normalize(image)?;
        let mut stages: Vec<FeatureMap> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let x = stages.last().unwrap_or(&input);
            let y = layer.forward(x);
            stages.push(y);
        }
        Ok(BackboneTrace { input, stages })
    }

    /// Parameter gradients given `dL/d(stage output)` for every stage.
    pub fn backward(&self, trace: &BackboneTrace, stage_grads: &[FeatureMap]) -> Vec<ConvGrads> {
        assert_eq!(stage_grads.len(), self.layers.len());
        let mut grads = vec![ConvGrads::default(); self.layers.len()];
        let mut carried: Option<FeatureMap> = None;
        for k in (0..self.layers.len()).rev() {
            let mut g = stage_grads[k].clone();
            if let Some(c) = carried.take() {
                for (a, b) in g.data.iter_mut().zip(&c.data) {
                    *a += b;
                }
            }
            let input = if k == 0 {
                &trace.input
            } else {
                &trace.stages[k - 1]
            };
            let (lg, gin) = self.layers[k].backward(input, &trace.stages[k], &g, k > 0);
            grads[k] = lg;
            carried = gin;
        }
        grads
    }

    pub fn params(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    /// Flatten gradients in the same order as [`ConvBackbone::params`].
    pub fn flatten_grads(grads: Vec<ConvGrads>) -> Vec<Vec<f64>> {
        grads
            .into_iter()
            .flat_map(|g| [g.weight, g.bias])
            .collect()
    }
}

impl BackboneAdapter for ConvBackbone {
    fn name(&self) -> &str {
        &self.name
    }

    fn stage_channels(&self) -> &[usize] {
        &self.stage_channels
    }

    fn trainable(&self) -> bool {
        true
    }

    fn apply(&self, image: &Image) -> Result<Vec<FeatureMap>> {
        Ok(self.forward_trace(image)?.stages)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_shapes() {
        let bb = ConvBackbone::new("t", &[4, 6], 1).unwrap();
        let img = Image::filled(3, 13, 10, 0.3);
        let maps = bb.apply(&img).unwrap();
        assert_eq!(maps.len(), 2);
        assert_eq!((maps[0].channels, maps[0].height, maps[0].width), (4, 7, 5));
        assert_eq!((maps[1].channels, maps[1].height, maps[1].width), (6, 4, 3));
    }

    #[test]
    fn init_is_seeded() {
        let a = ConvBackbone::new("t", &[4], 9).unwrap();
        let b = ConvBackbone::new("t", &[4], 9).unwrap();
        let c = ConvBackbone::new("t", &[4], 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
