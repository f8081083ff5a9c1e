//! Quality-aware chunk representation: backbone stage statistics of the key
//! frame concatenated with a frozen motion embedding of the chunk.

mod backbone;
mod motion;
mod registry;
mod stats;

pub use backbone::{
    BackboneAdapter, BackboneTrace, ConvBackbone, ConvGrads, ConvLayer, IMAGENET_MEAN,
    IMAGENET_STD,
};
pub use motion::{MotionAdapter, StubMotion};
pub use registry::{backbone_spec, build_backbone, build_motion, motion_spec, AdapterSpec};
pub use stats::{stage_statistics, stage_statistics_backward, FeatureMap};

use serde::{Deserialize, Serialize};

use crate::error::{Result, VqaError};
use crate::image::Image;

/// Per-stage `[means ‖ stds]`, stages concatenated in order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialFeatureVector(pub Vec<f64>);

/// `[F_s ‖ F_m]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FusedFeature(pub Vec<f64>);

impl FusedFeature {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Which halves of the fused vector a model uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    #[default]
    Full,
    Spatial,
    Motion,
}

impl FeatureMode {
    pub fn uses_spatial(self) -> bool {
        matches!(self, FeatureMode::Full | FeatureMode::Spatial)
    }

    pub fn uses_motion(self) -> bool {
        matches!(self, FeatureMode::Full | FeatureMode::Motion)
    }

    pub fn fused_dim(self, stage_channels: &[usize], motion_dim: usize) -> usize {
        let s = if self.uses_spatial() {
            2 * stage_channels.iter().sum::<usize>()
        } else {
            0
        };
        s + if self.uses_motion() { motion_dim } else { 0 }
    }
}

/// Check that `maps` honour the adapter's declared stages, then pool them.
pub fn spatial_from_maps(maps: &[FeatureMap], stage_channels: &[usize]) -> Result<SpatialFeatureVector> {
    if maps.len() != stage_channels.len() {
        return Err(VqaError::ContractViolation(format!(
            "backbone returned {} stages, declared {}",
            maps.len(),
            stage_channels.len()
        )));
    }
    let mut out = Vec::with_capacity(2 * stage_channels.iter().sum::<usize>());
    for (k, (map, &c)) in maps.iter().zip(stage_channels).enumerate() {
        if map.channels != c {
            return Err(VqaError::ContractViolation(format!(
                "stage {k} has {} channels, declared {c}",
                map.channels
            )));
        }
        let (mean, std) = stage_statistics(map)?;
        out.extend(mean);
        out.extend(std);
    }
    Ok(SpatialFeatureVector(out))
}

/// Map `dL/dF_s` back onto every stage's output map.
pub fn spatial_backward(maps: &[FeatureMap], grad_spatial: &[f64]) -> Result<Vec<FeatureMap>> {
    let expected: usize = maps.iter().map(|m| 2 * m.channels).sum();
    if grad_spatial.len() != expected {
        return Err(VqaError::ContractViolation(format!(
            "spatial gradient has {} values, expected {expected}",
            grad_spatial.len()
        )));
    }
    let mut offset = 0;
    maps.iter()
        .map(|map| {
            let c = map.channels;
            let (mean, std) = stage_statistics(map)?;
            let gm = &grad_spatial[offset..offset + c];
            let gs = &grad_spatial[offset + c..offset + 2 * c];
            offset += 2 * c;
            Ok(stage_statistics_backward(map, &mean, &std, gm, gs))
        })
        .collect()
}

pub fn spatial_features(key_frame: &Image, backbone: &dyn BackboneAdapter) -> Result<SpatialFeatureVector> {
    let maps = backbone.apply(key_frame)?;
    spatial_from_maps(&maps, backbone.stage_channels())
}

pub fn motion_features(frames: &[Image], motion: &dyn MotionAdapter) -> Result<Vec<f64>> {
    let v = motion.apply(frames)?;
    if v.len() != motion.embedding_dim() {
        return Err(VqaError::ContractViolation(format!(
            "motion adapter returned {} values, declared {}",
            v.len(),
            motion.embedding_dim()
        )));
    }
    Ok(v)
}

pub fn fuse(spatial: &SpatialFeatureVector, motion: &[f64]) -> FusedFeature {
    let mut v = Vec::with_capacity(spatial.0.len() + motion.len());
    v.extend_from_slice(&spatial.0);
    v.extend_from_slice(motion);
    FusedFeature(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct WrongStages;

    impl BackboneAdapter for WrongStages {
        fn name(&self) -> &str {
            "wrong"
        }
        fn stage_channels(&self) -> &[usize] {
            &[4, 4]
        }
        fn trainable(&self) -> bool {
            false
        }
        fn apply(&self, _: &Image) -> Result<Vec<FeatureMap>> {
            Ok(vec![FeatureMap::zeros(4, 2, 2)])
        }
    }

    #[test]
    fn stage_count_mismatch_is_contract_violation() {
        let img = Image::filled(3, 8, 8, 0.5);
        assert!(matches!(
            spatial_features(&img, &WrongStages),
            Err(VqaError::ContractViolation(_))
        ));
    }

    #[test]
    fn stub_backbone_length() {
        let bb = ConvBackbone::new("stub", &[8, 16], 0).unwrap();
        let img = Image::filled(3, 20, 20, 0.4);
        let fs = spatial_features(&img, &bb).unwrap();
        assert_eq!(fs.0.len(), 48);
        assert_eq!(fs, spatial_features(&img, &bb).unwrap());
        // std half of each stage is non-negative
        assert!(fs.0[8..16].iter().all(|&v| v >= 0.0));
        assert!(fs.0[32..48].iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn full_size_dimensions() {
        let bb = backbone_spec("resnet50").unwrap();
        let mo = motion_spec("slowfast-r50").unwrap();
        assert_eq!(FeatureMode::Spatial.fused_dim(&bb.stage_channels, 0), 7680);
        assert_eq!(FeatureMode::Full.fused_dim(&bb.stage_channels, mo.embedding_dim), 9984);
    }

    #[test]
    fn fuse_concatenates() {
        let fs = SpatialFeatureVector(vec![1.0, 2.0, 3.0]);
        let f = fuse(&fs, &[4.0, 5.0]);
        assert_eq!(f.len(), 5);
        assert_eq!(&f.0[..3], &fs.0[..]);
        assert_eq!(fuse(&fs, &[]).0, fs.0);
        let long = fuse(&SpatialFeatureVector(vec![0.0; 7680]), &vec![0.0; 2304]);
        assert_eq!(long.len(), 9984);
    }

    #[test]
    fn motion_distinguishes_black_and_white() {
        let m = StubMotion::new("m", 64, 8, 16, 1).unwrap();
        let black = vec![Image::filled(3, 16, 16, 0.0); 8];
        let white = vec![Image::filled(3, 16, 16, 1.0); 8];
        let a = motion_features(&black, &m).unwrap();
        let b = motion_features(&white, &m).unwrap();
        assert_eq!(a.len(), 64);
        assert_ne!(a, b);
    }
}
