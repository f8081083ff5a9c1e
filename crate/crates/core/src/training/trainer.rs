use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{SampleUnit, TrainConfig};
use super::model::{ChunkForward, ModelGrads, QualityModel};
use super::optim::Adam;
use crate::datasets::{DatasetManifest, SplitSpec};
use crate::error::{Result, VqaError};
use crate::losses::{total_loss, total_loss_grad, Batch};
use crate::metrics::srcc;
use crate::sampling::{build_sampling_plan, decode_key_frame, decode_motion_frames, Mode, SamplingPlan};
use crate::video::{open_video, VideoSource};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    /// SRCC of the epoch's (training-mode) predictions against MOS.
    pub train_srcc: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    pub step_losses: Vec<f64>,
}

impl TrainingLog {
    pub fn initial_loss(&self) -> Option<f64> {
        self.step_losses.first().copied()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.mean_loss)
    }
}

pub(crate) struct TrainingVideo {
    pub id: usize,
    pub mos: f64,
    pub source: Box<dyn VideoSource>,
    pub plan: SamplingPlan,
    /// Frozen motion embedding per chunk; empty when motion is unused.
    pub motion: Vec<Vec<f64>>,
}

pub(crate) fn open_videos(
    model: &QualityModel,
    manifest: &DatasetManifest,
    ids: &[usize],
) -> Result<Vec<TrainingVideo>> {
    let cfg = &model.config;
    ids.par_iter()
        .map(|&id| {
            let source = open_video(&manifest.video_path(id))?;
            let plan = build_sampling_plan(source.meta(), cfg.tau)?;
            let motion = if cfg.feature_mode.uses_motion() {
                (0..plan.chunk_count)
                    .map(|i| {
                        let frames = decode_motion_frames(source.as_ref(), &plan, i, &cfg.sampling, None)?;
                        model.motion_embedding(&frames)
                    })
                    .collect::<Result<Vec<_>>>()?
            } else {
                Vec::new()
            };
            Ok(TrainingVideo {
                id,
                mos: manifest.records[id].mos,
                source,
                plan,
                motion,
            })
        })
        .collect()
}

struct VideoForward {
    chunks: Vec<ChunkForward>,
    score: f64,
}

fn forward_video(
    model: &QualityModel,
    video: &TrainingVideo,
    chunks: &[usize],
    crop_seed: u64,
) -> Result<VideoForward> {
    let cfg = &model.config;
    let mut out = Vec::with_capacity(chunks.len());
    for &i in chunks {
        let key = if cfg.feature_mode.uses_spatial() {
            Some(decode_key_frame(
                video.source.as_ref(),
                &video.plan,
                i,
                &cfg.sampling,
                Mode::Train,
                crop_seed,
                None,
            )?)
        } else {
            None
        };
        let motion = video.motion.get(i).map(Vec::as_slice).unwrap_or(&[]);
        out.push(model.forward_chunk(key.as_ref(), motion)?);
    }
    let score = out.iter().map(|c| c.score).sum::<f64>() / out.len() as f64;
    Ok(VideoForward { chunks: out, score })
}

fn diverged(
    what: &str,
    epoch: usize,
    step: usize,
    batch: &[usize],
    videos: &[TrainingVideo],
    config: &TrainConfig,
) -> VqaError {
    let ids: Vec<usize> = batch.iter().map(|&v| videos[v].id).collect();
    VqaError::Numeric(format!(
        "{what} at epoch {epoch}, step {step}; batch records {ids:?}; learning rate {}",
        config.learning_rate
    ))
}

/// Fit backbone and regressor on the training part of `split`.
pub fn train_model(
    manifest: &DatasetManifest,
    split: &SplitSpec,
    config: &TrainConfig,
) -> Result<(QualityModel, TrainingLog)> {
    config.validate()?;
    if split.train_ids.is_empty() {
        return Err(VqaError::invalid("split has no training videos"));
    }
    if let Some(&bad) = split.train_ids.iter().find(|&&i| i >= manifest.len()) {
        return Err(VqaError::invalid(format!("split references record {bad} beyond manifest")));
    }
    let mean_mos = split.train_ids.iter().map(|&i| manifest.records[i].mos).sum::<f64>()
        / split.train_ids.len() as f64;
    let mut model = QualityModel::new(config, mean_mos)?;
    let videos = open_videos(&model, manifest, &split.train_ids)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x7A11_AB1E);
    let mut adam = Adam::new(config.learning_rate);
    let mut log = TrainingLog::default();
    let mut order: Vec<usize> = (0..videos.len()).collect();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        let mut epoch_pred = Vec::with_capacity(videos.len());
        let mut epoch_mos = Vec::with_capacity(videos.len());

        for batch in order.chunks(config.batch_size) {
            let picks: Vec<(Vec<usize>, u64)> = batch
                .iter()
                .map(|&v| {
                    let n = videos[v].plan.chunk_count;
                    let chunks = match config.sample_unit {
                        SampleUnit::RandomChunk => vec![rng.random_range(0..n)],
                        SampleUnit::AllChunks => (0..n).collect(),
                    };
                    (chunks, rng.random::<u64>())
                })
                .collect();

            let forwards = batch
                .par_iter()
                .zip(&picks)
                .map(|(&v, (chunks, seed))| forward_video(&model, &videos[v], chunks, *seed))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| match e {
                    VqaError::Numeric(msg) => diverged(&msg, epoch, log.step_losses.len(), batch, &videos, config),
                    other => other,
                })?;

            let pred: Vec<f64> = forwards.iter().map(|f| f.score).collect();
            let truth: Vec<f64> = batch.iter().map(|&v| videos[v].mos).collect();
            let b = Batch::new(&pred, &truth)?;
            let loss = total_loss(&b, config.lambda);
            if !loss.is_finite() {
                let msg = format!("loss became {loss}");
                return Err(diverged(&msg, epoch, log.step_losses.len(), batch, &videos, config));
            }
            let grad_scores = total_loss_grad(&b, config.lambda);

            let per_video = forwards
                .par_iter()
                .zip(&grad_scores)
                .map(|(f, &g)| {
                    let share = g / f.chunks.len() as f64;
                    let mut acc: Option<ModelGrads> = None;
                    for c in &f.chunks {
                        let grads = model.backward_chunk(c, share)?;
                        match acc.as_mut() {
                            Some(a) => a.add_assign(&grads),
                            None => acc = Some(grads),
                        }
                    }
                    Ok(acc.expect("at least one chunk"))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut total = per_video[0].clone();
            for g in &per_video[1..] {
                total.add_assign(g);
            }
            adam.step(model.params_mut(), &total.0);

            log.step_losses.push(loss);
            epoch_loss += loss;
            batches += 1;
            epoch_pred.extend(pred);
            epoch_mos.extend(truth);
        }

        let record = EpochRecord {
            epoch,
            mean_loss: epoch_loss / batches as f64,
            train_srcc: srcc(&epoch_pred, &epoch_mos).ok(),
        };
        log::debug!(
            "epoch {epoch}: loss {:.4} train srcc {:?}",
            record.mean_loss,
            record.train_srcc
        );
        log.epochs.push(record);
    }
    Ok((model, log))
}
