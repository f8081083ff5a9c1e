//! Adapters resolvable by name from a run configuration.

use super::backbone::ConvBackbone;
use super::motion::{MotionAdapter, StubMotion};
use crate::error::{Result, VqaError};
use crate::sampling::SamplingConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct AdapterSpec {
    pub name: &'static str,
    pub stage_channels: Vec<usize>,
    pub embedding_dim: usize,
    /// Whether weights ship with this crate.
    pub bundled: bool,
}

pub fn backbone_spec(name: &str) -> Result<AdapterSpec> {
    let (name, stages, bundled) = match name {
        "stub-conv" => ("stub-conv", vec![8, 16], true),
        "stub-conv3" => ("stub-conv3", vec![8, 16, 32], true),
        "resnet50" => ("resnet50", vec![256, 512, 1024, 2048], false),
        other => return Err(VqaError::Config(format!("unknown backbone '{other}'"))),
    };
    Ok(AdapterSpec {
        name,
        stage_channels: stages,
        embedding_dim: 0,
        bundled,
    })
}

pub fn motion_spec(name: &str) -> Result<AdapterSpec> {
    let (name, dim, bundled) = match name {
        "stub-motion" => ("stub-motion", 64, true),
        "slowfast-r50" => ("slowfast-r50", 2304, false),
        other => return Err(VqaError::Config(format!("unknown motion network '{other}'"))),
    };
    Ok(AdapterSpec {
        name,
        stage_channels: Vec::new(),
        embedding_dim: dim,
        bundled,
    })
}

fn unavailable(name: &str) -> VqaError {
    VqaError::AdapterUnavailable {
        name: name.to_string(),
        reason: "pretrained weights are not bundled; bind an external implementation".into(),
    }
}

pub fn build_backbone(name: &str, seed: u64) -> Result<ConvBackbone> {
    let spec = backbone_spec(name)?;
    if !spec.bundled {
        return Err(unavailable(name));
    }
    ConvBackbone::new(spec.name, &spec.stage_channels, seed)
}

pub fn build_motion(name: &str, sampling: &SamplingConfig, seed: u64) -> Result<Box<dyn MotionAdapter>> {
    let spec = motion_spec(name)?;
    if !spec.bundled {
        return Err(unavailable(name));
    }
    Ok(Box::new(StubMotion::new(
        spec.name,
        spec.embedding_dim,
        sampling.motion_frames,
        sampling.motion_size,
        seed,
    )?))
}
