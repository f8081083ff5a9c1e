use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::model::{QualityModel, VideoScore};
use crate::csf::{fuse_multiscale, scale_weights, ScaleWeights, ViewingEnvironment};
use crate::datasets::{DatasetManifest, SplitSpec};
use crate::error::{Result, VqaError};
use crate::metrics::{evaluate, EvalResult};
use crate::sampling::FrameAccessCounter;
use crate::video::{open_video, ScaledSource, VideoSource};

/// Score `ids` of a manifest with `predict`, then compute every criterion.
pub fn evaluate_with<F>(manifest: &DatasetManifest, ids: &[usize], predict: F) -> Result<EvalResult>
where
    F: Fn(usize) -> Result<f64> + Sync,
{
    let predicted = ids.par_iter().map(|&i| predict(i)).collect::<Result<Vec<_>>>()?;
    let mos: Vec<f64> = ids.iter().map(|&i| manifest.records[i].mos).collect();
    evaluate(&predicted, &mos)
}

pub fn predict_video(model: &QualityModel, manifest: &DatasetManifest, id: usize) -> Result<f64> {
    let source = open_video(&manifest.video_path(id))?;
    Ok(model.score_source(source.as_ref(), None)?.score)
}

/// Centre-crop evaluation on the test part of `split`. Never mutates `model`.
pub fn evaluate_model(model: &QualityModel, manifest: &DatasetManifest, split: &SplitSpec) -> Result<EvalResult> {
    evaluate_with(manifest, &split.test_ids, |i| predict_video(model, manifest, i))
}

/// Single- or multi-scale scoring.
pub struct VideoScorer<'a> {
    model: &'a QualityModel,
    environment: ViewingEnvironment,
    weights: ScaleWeights,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MultiScaleScore {
    /// Vertical line count of each scale.
    pub scale_lines: Vec<u32>,
    pub per_scale: Vec<VideoScore>,
    pub weights: ScaleWeights,
    pub fused: f64,
}

impl MultiScaleScore {
    pub fn per_scale_scores(&self) -> Vec<f64> {
        self.per_scale.iter().map(|s| s.score).collect()
    }
}

impl<'a> VideoScorer<'a> {
    /// Weights are computed here once and reused for every video.
    pub fn new(model: &'a QualityModel, environment: ViewingEnvironment) -> Result<Self> {
        let weights = scale_weights(&environment)?;
        Ok(VideoScorer {
            model,
            environment,
            weights,
        })
    }

    pub fn weights(&self) -> &ScaleWeights {
        &self.weights
    }

    pub fn single(&self, source: &dyn VideoSource, counter: Option<&FrameAccessCounter>) -> Result<VideoScore> {
        self.model.score_source(source, counter)
    }

    /// Rescale the video so its short side matches each scale, score each,
    /// and fuse with the contrast-sensitivity weights.
    pub fn multiscale(&self, source: &dyn VideoSource, counter: Option<&FrameAccessCounter>) -> Result<MultiScaleScore> {
        let per_scale = self
            .environment
            .scale_lines
            .iter()
            .map(|&lines| {
                let scaled = ScaledSource::new(source, lines as usize)?;
                self.model.score_source(&scaled, counter)
            })
            .collect::<Result<Vec<_>>>()?;
        let scores: Vec<f64> = per_scale.iter().map(|s| s.score).collect();
        let fused = fuse_multiscale(&scores, &self.weights)?;
        Ok(MultiScaleScore {
            scale_lines: self.environment.scale_lines.clone(),
            per_scale,
            weights: self.weights.clone(),
            fused,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ScoreReport {
    Single(VideoScore),
    Multi(MultiScaleScore),
}

impl ScoreReport {
    pub fn score(&self) -> f64 {
        match self {
            ScoreReport::Single(s) => s.score,
            ScoreReport::Multi(m) => m.fused,
        }
    }
}

pub fn score_video(
    model: &QualityModel,
    path: &Path,
    environment: &ViewingEnvironment,
    multiscale: bool,
) -> Result<ScoreReport> {
    let source = open_video(path)?;
    let scorer = VideoScorer::new(model, environment.clone())?;
    if multiscale {
        Ok(ScoreReport::Multi(scorer.multiscale(source.as_ref(), None)?))
    } else {
        Ok(ScoreReport::Single(scorer.single(source.as_ref(), None)?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossDatabaseResult {
    pub database: String,
    pub multiscale: bool,
    #[serde(flatten)]
    pub result: EvalResult,
}

/// Evaluate every video of every target database, once single-scale and once
/// with multi-scale fusion. No fine-tuning.
pub fn cross_database_eval(
    model: &QualityModel,
    targets: &[DatasetManifest],
    environment: &ViewingEnvironment,
) -> Result<Vec<CrossDatabaseResult>> {
    let scorer = VideoScorer::new(model, environment.clone())?;
    let mut out = Vec::with_capacity(2 * targets.len());
    for target in targets {
        if target.is_empty() {
            return Err(VqaError::invalid(format!("target '{}' is empty", target.name)));
        }
        let ids: Vec<usize> = (0..target.len()).collect();
        for multiscale in [false, true] {
            let result = evaluate_with(target, &ids, |i| {
                let source = open_video(&target.video_path(i))?;
                if multiscale {
                    Ok(scorer.multiscale(source.as_ref(), None)?.fused)
                } else {
                    Ok(scorer.single(source.as_ref(), None)?.score)
                }
            })?;
            out.push(CrossDatabaseResult {
                database: target.name.clone(),
                multiscale,
                result,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ModuleTimings {
    pub key_frame_preprocess_s: f64,
    pub motion_preprocess_s: f64,
    pub spatial_features_s: f64,
    pub motion_features_s: f64,
    pub regression_s: f64,
    pub total_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub uri: String,
    pub frame_count: usize,
    pub chunk_count: usize,
    pub key_frames: usize,
    pub motion_frames: usize,
    pub score: f64,
    pub timings: ModuleTimings,
}

/// Score one video while timing each stage and counting frame accesses.
pub fn bench_video(model: &QualityModel, source: &dyn VideoSource) -> Result<BenchReport> {
    use crate::features::{fuse, spatial_features, SpatialFeatureVector};
    use crate::quality_head::pool_video;
    use crate::sampling::{build_sampling_plan, decode_key_frame, decode_motion_frames, Mode};
    use std::time::Instant;

    let cfg = &model.config;
    let counter = FrameAccessCounter::new();
    let start = Instant::now();
    let plan = build_sampling_plan(source.meta(), cfg.tau)?;
    let mut t = ModuleTimings::default();
    let mut scores = Vec::with_capacity(plan.chunk_count);
    for i in 0..plan.chunk_count {
        let spatial = match &model.backbone {
            Some(bb) => {
                let s = Instant::now();
                let key = decode_key_frame(source, &plan, i, &cfg.sampling, Mode::Test, 0, Some(&counter))?;
                t.key_frame_preprocess_s += s.elapsed().as_secs_f64();
                let s = Instant::now();
                let fs = spatial_features(&key, bb)?;
                t.spatial_features_s += s.elapsed().as_secs_f64();
                fs
            }
            None => SpatialFeatureVector(Vec::new()),
        };
        let motion = if model.motion_adapter().is_some() {
            let s = Instant::now();
            let frames = decode_motion_frames(source, &plan, i, &cfg.sampling, Some(&counter))?;
            t.motion_preprocess_s += s.elapsed().as_secs_f64();
            let s = Instant::now();
            let m = model.motion_embedding(&frames)?;
            t.motion_features_s += s.elapsed().as_secs_f64();
            m
        } else {
            Vec::new()
        };
        let s = Instant::now();
        scores.push(model.head.regress_chunk(&fuse(&spatial, &motion).0)?);
        t.regression_s += s.elapsed().as_secs_f64();
    }
    let score = pool_video(&scores)?;
    t.total_s = start.elapsed().as_secs_f64();
    let counts = counter.snapshot();
    Ok(BenchReport {
        uri: source.meta().uri.clone(),
        frame_count: source.meta().frame_count,
        chunk_count: plan.chunk_count,
        key_frames: counts.key_frames,
        motion_frames: counts.motion_frames,
        score,
        timings: t,
    })
}
