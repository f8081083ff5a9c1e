use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::error::{Result, VqaError};
use crate::features::{
    build_backbone, build_motion, fuse, motion_features, spatial_backward, spatial_from_maps,
    BackboneTrace, ConvBackbone, FeatureMode, MotionAdapter, SpatialFeatureVector,
};
use crate::image::Image;
use crate::quality_head::{pool_video, HeadTrace, MlpHead};
use crate::sampling::{
    build_sampling_plan, decode_key_frame, decode_motion_frames, FrameAccessCounter, Mode,
};
use crate::video::VideoSource;

/// Seed of the frozen motion network's weights. Fixed so that every model,
/// whatever its training seed, sees the same "pretrained" embedding.
pub const MOTION_WEIGHTS_SEED: u64 = 0x5EED_F00D;

/// Backbone + regressor (trainable) and the frozen motion network.
pub struct QualityModel {
    pub config: TrainConfig,
    pub backbone: Option<ConvBackbone>,
    pub head: MlpHead,
    motion: Option<Box<dyn MotionAdapter>>,
}

/// Everything the backward pass of one chunk needs.
pub struct ChunkForward {
    trace: Option<BackboneTrace>,
    feature: Vec<f64>,
    head: HeadTrace,
    pub score: f64,
}

/// Gradients grouped like [`QualityModel::params_mut`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModelGrads(pub Vec<Vec<f64>>);

impl ModelGrads {
    pub fn add_assign(&mut self, other: &ModelGrads) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    fingerprint: String,
    config: TrainConfig,
    backbone: Option<ConvBackbone>,
    head: MlpHead,
}

const CHECKPOINT_FORMAT: &str = "chunkvqa-checkpoint-v1";

impl QualityModel {
    /// Fresh model. `output_bias` initialises the regressor's output offset.
    pub fn new(config: &TrainConfig, output_bias: f64) -> Result<Self> {
        config.validate()?;
        let mode = config.feature_mode;
        let backbone = if mode.uses_spatial() {
            Some(build_backbone(&config.backbone, config.seed)?)
        } else {
            None
        };
        let motion = Self::build_motion(config)?;
        let stages = backbone.as_ref().map(|b| b.stage_channels.clone()).unwrap_or_default();
        let mdim = motion.as_ref().map(|m| m.embedding_dim()).unwrap_or(0);
        let head = MlpHead::new(
            mode.fused_dim(&stages, mdim),
            config.hidden_units,
            output_bias,
            config.seed.wrapping_add(1),
        )?;
        Ok(QualityModel {
            config: config.clone(),
            backbone,
            head,
            motion,
        })
    }

    fn build_motion(config: &TrainConfig) -> Result<Option<Box<dyn MotionAdapter>>> {
        if config.feature_mode.uses_motion() {
            Ok(Some(build_motion(&config.motion, &config.sampling, MOTION_WEIGHTS_SEED)?))
        } else {
            Ok(None)
        }
    }

    pub fn feature_mode(&self) -> FeatureMode {
        self.config.feature_mode
    }

    pub fn motion_adapter(&self) -> Option<&dyn MotionAdapter> {
        self.motion.as_deref()
    }

    /// Frozen embedding of a chunk's low-resolution frames (empty when the
    /// model does not use motion).
    pub fn motion_embedding(&self, frames: &[Image]) -> Result<Vec<f64>> {
        match &self.motion {
            Some(m) => motion_features(frames, m.as_ref()),
            None => Ok(Vec::new()),
        }
    }

    pub fn forward_chunk(&self, key_frame: Option<&Image>, motion: &[f64]) -> Result<ChunkForward> {
        let (trace, spatial) = match &self.backbone {
            Some(bb) => {
                let key = key_frame
                    .ok_or_else(|| VqaError::invalid("model needs a key frame"))?;
                let trace = bb.forward_trace(key)?;
                let fs = spatial_from_maps(trace.stage_maps(), &bb.stage_channels)?;
                (Some(trace), fs)
            }
            None => (None, SpatialFeatureVector(Vec::new())),
        };
        let feature = fuse(&spatial, motion).0;
        let (score, head) = self.head.forward(&feature)?;
        if !score.is_finite() {
            return Err(VqaError::Numeric(format!("chunk score is {score}")));
        }
        Ok(ChunkForward {
            trace,
            feature,
            head,
            score,
        })
    }

    pub fn backward_chunk(&self, fwd: &ChunkForward, grad_score: f64) -> Result<ModelGrads> {
        let (head_grads, grad_feature) = self.head.backward(&fwd.feature, &fwd.head, grad_score);
        let mut groups = Vec::new();
        if let (Some(bb), Some(trace)) = (&self.backbone, &fwd.trace) {
            let ns: usize = 2 * bb.stage_channels.iter().sum::<usize>();
            let stage_grads = spatial_backward(trace.stage_maps(), &grad_feature[..ns])?;
            groups.extend(ConvBackbone::flatten_grads(bb.backward(trace, &stage_grads)));
        }
        groups.extend(MlpHead::flatten_grads(head_grads));
        Ok(ModelGrads(groups))
    }

    /// Trainable parameters: backbone layers (if any) then the regressor.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        if let Some(bb) = &mut self.backbone {
            out.extend(bb.params_mut());
        }
        out.extend(self.head.params_mut());
        out
    }

    /// Single-scale score of a decodable video: centre-cropped key frames,
    /// chunk scores pooled by their mean.
    pub fn score_source(
        &self,
        source: &dyn VideoSource,
        counter: Option<&FrameAccessCounter>,
    ) -> Result<VideoScore> {
        let plan = build_sampling_plan(source.meta(), self.config.tau)?;
        let cfg = &self.config.sampling;
        let mut chunk_scores = Vec::with_capacity(plan.chunk_count);
        for i in 0..plan.chunk_count {
            let key = if self.backbone.is_some() {
                Some(decode_key_frame(source, &plan, i, cfg, Mode::Test, 0, counter)?)
            } else {
                None
            };
            let motion = if self.motion.is_some() {
                let frames = decode_motion_frames(source, &plan, i, cfg, counter)?;
                self.motion_embedding(&frames)?
            } else {
                Vec::new()
            };
            chunk_scores.push(self.forward_chunk(key.as_ref(), &motion)?.score);
        }
        Ok(VideoScore {
            score: pool_video(&chunk_scores)?,
            chunk_scores,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let ckpt = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            fingerprint: self.config.fingerprint(),
            config: self.config.clone(),
            backbone: self.backbone.clone(),
            head: self.head.clone(),
        };
        let json = serde_json::to_vec(&ckpt).map_err(|e| VqaError::Numeric(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| VqaError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| VqaError::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_slice(&bytes)
            .map_err(|e| VqaError::Config(format!("{}: not a checkpoint: {e}", path.display())))?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(VqaError::Config(format!("unsupported checkpoint format '{}'", ckpt.format)));
        }
        if ckpt.fingerprint != ckpt.config.fingerprint() {
            return Err(VqaError::Config(format!(
                "{}: config fingerprint mismatch",
                path.display()
            )));
        }
        ckpt.config.validate()?;
        let motion = Self::build_motion(&ckpt.config)?;
        Ok(QualityModel {
            config: ckpt.config,
            backbone: ckpt.backbone,
            head: ckpt.head,
            motion,
        })
    }
}

impl Clone for QualityModel {
    fn clone(&self) -> Self {
        QualityModel {
            config: self.config.clone(),
            backbone: self.backbone.clone(),
            head: self.head.clone(),
            motion: Self::build_motion(&self.config).expect("config validated at construction"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VideoScore {
    pub score: f64,
    pub chunk_scores: Vec<f64>,
}
