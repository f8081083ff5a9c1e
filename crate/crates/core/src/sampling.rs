//! Chunk planning and the two sparse views of a video: one high-resolution
//! key frame per chunk and the low-resolution frames of the whole chunk.

use std::ops::Range;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VqaError};
use crate::image::Image;
use crate::video::VideoSource;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub uri: String,
    pub frame_count: usize,
    /// Frames per second.
    pub frame_rate: f64,
    pub width: usize,
    pub height: usize,
}

impl VideoMeta {
    pub fn new(
        uri: impl Into<String>,
        frame_count: usize,
        frame_rate: f64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let meta = VideoMeta {
            uri: uri.into(),
            frame_count,
            frame_rate,
            width,
            height,
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_count == 0 {
            return Err(VqaError::invalid(format!("{}: video has no frames", self.uri)));
        }
        if !(self.frame_rate.is_finite() && self.frame_rate > 0.0) {
            return Err(VqaError::invalid(format!(
                "{}: frame rate must be positive, got {}",
                self.uri, self.frame_rate
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(VqaError::invalid(format!("{}: empty frame size", self.uri)));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.frame_count as f64 / self.frame_rate
    }
}

/// Fixed-interval chunk schedule for one video.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub tau: f64,
    pub chunk_count: usize,
    pub frames_per_chunk: usize,
    pub key_frame_indices: Vec<usize>,
    pub chunk_ranges: Vec<Range<usize>>,
}

/// Split a video into `floor(l / round(r·τ))` chunks of equal length.
///
/// Trailing frames that do not fill a chunk are dropped. A video shorter
/// than one chunk becomes a single short chunk.
pub fn build_sampling_plan(meta: &VideoMeta, tau: f64) -> Result<SamplingPlan> {
    meta.validate()?;
    if !(tau.is_finite() && tau > 0.0) {
        return Err(VqaError::invalid(format!("chunk interval must be positive, got {tau}")));
    }
    let frames_per_chunk = ((meta.frame_rate * tau).round() as usize).max(1);
    let l = meta.frame_count;
    let chunk_ranges: Vec<Range<usize>> = if l >= frames_per_chunk {
        (0..l / frames_per_chunk)
            .map(|i| i * frames_per_chunk..(i + 1) * frames_per_chunk)
            .collect()
    } else {
        vec![0..l]
    };
    Ok(SamplingPlan {
        tau,
        chunk_count: chunk_ranges.len(),
        frames_per_chunk,
        key_frame_indices: chunk_ranges.iter().map(|r| r.start).collect(),
        chunk_ranges,
    })
}

impl SamplingPlan {
    /// Frame indices of chunk `i`, padded to `frames_per_chunk` by repeating
    /// the last frame.
    pub fn padded_chunk(&self, i: usize) -> Result<Vec<usize>> {
        let range = self.chunk_ranges.get(i).ok_or_else(|| {
            VqaError::invalid(format!("chunk {i} out of range (0..{})", self.chunk_count))
        })?;
        let mut idx: Vec<usize> = range.clone().collect();
        let last = range.end - 1;
        idx.resize(self.frames_per_chunk.max(idx.len()), last);
        Ok(idx)
    }

    /// The `motion_frames` frame indices fed to the motion network for chunk `i`.
    pub fn motion_indices(&self, i: usize, motion_frames: usize) -> Result<Vec<usize>> {
        let padded = self.padded_chunk(i)?;
        Ok(uniform_resample(padded.len(), motion_frames)
            .into_iter()
            .map(|j| padded[j])
            .collect())
    }
}

/// Positions `round(j·n/m)` for `j in 0..m`, clamped to `n - 1`.
pub fn uniform_resample(n: usize, m: usize) -> Vec<usize> {
    (0..m)
        .map(|j| ((j as f64 * n as f64 / m as f64).round() as usize).min(n - 1))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Test,
}

/// Preprocessing geometry for the two views.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub resize_min: usize,
    pub crop_size: usize,
    pub motion_size: usize,
    pub motion_frames: usize,
}

impl SamplingConfig {
    pub fn paper() -> Self {
        SamplingConfig {
            resize_min: 520,
            crop_size: 448,
            motion_size: 224,
            motion_frames: 32,
        }
    }

    pub fn stub() -> Self {
        SamplingConfig {
            resize_min: 64,
            crop_size: 56,
            motion_size: 32,
            motion_frames: 8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.crop_size == 0 || self.motion_size == 0 || self.motion_frames == 0 {
            return Err(VqaError::Config("sizes and frame counts must be positive".into()));
        }
        if self.crop_size > self.resize_min {
            return Err(VqaError::Config(format!(
                "crop_size {} exceeds resize_min {}",
                self.crop_size, self.resize_min
            )));
        }
        Ok(())
    }
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self::paper()
    }
}

/// Counts frame preprocessing work, split by view.
#[derive(Debug, Default)]
pub struct FrameAccessCounter {
    key_frames: AtomicUsize,
    motion_frames: AtomicUsize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FrameAccessCounts {
    pub key_frames: usize,
    pub motion_frames: usize,
}

impl FrameAccessCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn snapshot(&self) -> FrameAccessCounts {
        FrameAccessCounts {
            key_frames: self.key_frames.load(Ordering::Relaxed),
            motion_frames: self.motion_frames.load(Ordering::Relaxed),
        }
    }

    pub fn reset(&self) {
        self.key_frames.store(0, Ordering::Relaxed);
        self.motion_frames.store(0, Ordering::Relaxed);
    }

    fn add_key(&self) {
        self.key_frames.fetch_add(1, Ordering::Relaxed);
    }

    fn add_motion(&self, n: usize) {
        self.motion_frames.fetch_add(n, Ordering::Relaxed);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChunkSample {
    pub key_frame: Image,
    pub motion_frames: Vec<Image>,
}

/// Seed for the crop of chunk `chunk` under run seed `seed`.
fn chunk_seed(seed: u64, chunk: usize) -> u64 {
    seed ^ (chunk as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Resize so the shorter side is `resize_min`, then crop `crop_size` square:
/// random (seeded) position for training, centre for testing.
pub fn preprocess_key_frame(
    frame: &Image,
    cfg: &SamplingConfig,
    mode: Mode,
    seed: u64,
) -> Result<Image> {
    let resized = frame.resize_min_side(cfg.resize_min);
    crop_key_frame(&resized, cfg.crop_size, mode, seed)
}

/// The crop half of [`preprocess_key_frame`], for callers that cache the resize.
pub fn crop_key_frame(resized: &Image, crop: usize, mode: Mode, seed: u64) -> Result<Image> {
    match mode {
        Mode::Test => resized.center_crop(crop),
        Mode::Train => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let top = rng.random_range(0..=resized.height.saturating_sub(crop));
            let left = rng.random_range(0..=resized.width.saturating_sub(crop));
            resized.crop(top, left, crop, crop)
        }
    }
}

/// Decode only the low-resolution view of chunk `i`: each distinct frame is
/// decoded and resized once, then resampled to `motion_frames`.
pub fn decode_motion_frames(
    source: &dyn VideoSource,
    plan: &SamplingPlan,
    i: usize,
    cfg: &SamplingConfig,
    counter: Option<&FrameAccessCounter>,
) -> Result<Vec<Image>> {
    let indices = plan.motion_indices(i, cfg.motion_frames)?;
    let mut distinct = indices.clone();
    distinct.dedup();
    let mut decoded: Vec<(usize, Image)> = Vec::with_capacity(distinct.len());
    for &f in &distinct {
        let frame = source.read_frame(f)?;
        decoded.push((f, frame.resize_bilinear(cfg.motion_size, cfg.motion_size)));
    }
    if let Some(c) = counter {
        c.add_motion(decoded.len());
    }
    Ok(indices
        .iter()
        .map(|f| {
            decoded
                .iter()
                .find(|(g, _)| g == f)
                .map(|(_, img)| img.clone())
                .expect("resampled index was decoded")
        })
        .collect())
}

pub fn decode_key_frame(
    source: &dyn VideoSource,
    plan: &SamplingPlan,
    i: usize,
    cfg: &SamplingConfig,
    mode: Mode,
    seed: u64,
    counter: Option<&FrameAccessCounter>,
) -> Result<Image> {
    let &index = plan.key_frame_indices.get(i).ok_or_else(|| {
        VqaError::invalid(format!("chunk {i} out of range (0..{})", plan.chunk_count))
    })?;
    let frame = source.read_frame(index)?;
    let key = preprocess_key_frame(&frame, cfg, mode, chunk_seed(seed, i))?;
    if let Some(c) = counter {
        c.add_key();
    }
    Ok(key)
}

/// Both views of chunk `i`.
pub fn decode_chunk(
    source: &dyn VideoSource,
    plan: &SamplingPlan,
    i: usize,
    cfg: &SamplingConfig,
    mode: Mode,
    seed: u64,
    counter: Option<&FrameAccessCounter>,
) -> Result<ChunkSample> {
    if i >= plan.chunk_count {
        return Err(VqaError::invalid(format!(
            "chunk {i} out of range (0..{})",
            plan.chunk_count
        )));
    }
    Ok(ChunkSample {
        key_frame: decode_key_frame(source, plan, i, cfg, mode, seed, counter)?,
        motion_frames: decode_motion_frames(source, plan, i, cfg, counter)?,
    })
}

/// Seed used for the key-frame crop of chunk `i` (exposed for caches that
/// replicate [`decode_key_frame`]).
pub fn key_frame_crop_seed(seed: u64, i: usize) -> u64 {
    chunk_seed(seed, i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video::MemoryVideo;

    fn meta(l: usize, r: f64) -> VideoMeta {
        VideoMeta::new("mem://v", l, r, 16, 12).unwrap()
    }

    #[test]
    fn eight_second_clip_gives_eight_chunks() {
        let plan = build_sampling_plan(&meta(240, 30.0), 1.0).unwrap();
        assert_eq!(plan.chunk_count, 8);
        assert_eq!(plan.frames_per_chunk, 30);
        assert_eq!(plan.key_frame_indices, (0..8).map(|i| i * 30).collect::<Vec<_>>());
    }

    #[test]
    fn exactly_one_chunk() {
        let plan = build_sampling_plan(&meta(30, 30.0), 1.0).unwrap();
        assert_eq!(plan.chunk_count, 1);
        assert_eq!(plan.key_frame_indices, vec![0]);
    }

    #[test]
    fn short_video_is_padded() {
        let plan = build_sampling_plan(&meta(29, 30.0), 1.0).unwrap();
        assert_eq!(plan.chunk_count, 1);
        assert_eq!(plan.chunk_ranges, vec![0..29]);
        let padded = plan.padded_chunk(0).unwrap();
        assert_eq!(padded.len(), 30);
        assert_eq!(padded[28], 28);
        assert_eq!(padded[29], 28);
    }

    #[test]
    fn trailing_frames_dropped() {
        let plan = build_sampling_plan(&meta(75, 30.0), 1.0).unwrap();
        assert_eq!(plan.chunk_count, 2);
        assert_eq!(plan.chunk_ranges.last().unwrap().end, 60);
    }

    #[test]
    fn rejects_bad_tau() {
        assert!(matches!(
            build_sampling_plan(&meta(30, 30.0), 0.0),
            Err(VqaError::InvalidArgument(_))
        ));
        assert!(build_sampling_plan(&meta(30, 30.0), -1.0).is_err());
        assert!(VideoMeta::new("x", 0, 30.0, 4, 4).is_err());
    }

    #[test]
    fn resample_thirty_to_thirty_two() {
        let idx = uniform_resample(30, 32);
        assert_eq!(idx.len(), 32);
        // Hand-evaluated: round(j*30/32) for each j, clamped to 29.
        let expected: Vec<usize> = (0..32)
            .map(|j| ((j * 30) as f64 / 32.0).round().min(29.0) as usize)
            .collect();
        assert_eq!(idx, expected);
        assert!(idx.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn full_hd_key_frame_geometry() {
        let frame = Image::filled(3, 1080, 1920, 0.5);
        let cfg = SamplingConfig::paper();
        let resized = frame.resize_min_side(cfg.resize_min);
        assert_eq!((resized.height, resized.width), (520, 924));
        for mode in [Mode::Train, Mode::Test] {
            let key = preprocess_key_frame(&frame, &cfg, mode, 3).unwrap();
            assert_eq!((key.height, key.width), (448, 448));
        }
    }

    #[test]
    fn decode_is_deterministic_and_counted() {
        let frames: Vec<Image> = (0..20)
            .map(|t| {
                let mut img = Image::new(3, 70, 90);
                for (k, v) in img.data.iter_mut().enumerate() {
                    *v = ((k * 7 + t * 13) % 101) as f32 / 100.0;
                }
                img
            })
            .collect();
        let video = MemoryVideo::new("mem://x", 10.0, frames).unwrap();
        let plan = build_sampling_plan(video.meta(), 1.0).unwrap();
        let cfg = SamplingConfig::stub();
        let counter = FrameAccessCounter::new();
        let a = decode_chunk(&video, &plan, 1, &cfg, Mode::Train, 42, Some(&counter)).unwrap();
        let b = decode_chunk(&video, &plan, 1, &cfg, Mode::Train, 42, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.motion_frames.len(), cfg.motion_frames);
        assert_eq!(a.key_frame.height, cfg.crop_size);
        let counts = counter.snapshot();
        assert_eq!(counts.key_frames, 1);
        assert!(counts.motion_frames <= 10);
        assert!(decode_chunk(&video, &plan, 2, &cfg, Mode::Test, 0, None).is_err());
    }
}
