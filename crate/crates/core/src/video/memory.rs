use crate::error::{Result, VqaError};
use crate::image::Image;
use crate::sampling::VideoMeta;

use super::VideoSource;

/// Frames held in memory. Used for generated content and tests.
pub struct MemoryVideo {
    meta: VideoMeta,
    frames: Vec<Image>,
}

impl MemoryVideo {
    pub fn new(uri: impl Into<String>, frame_rate: f64, frames: Vec<Image>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| VqaError::invalid("video has no frames"))?;
        let meta = VideoMeta::new(uri, frames.len(), frame_rate, first.width, first.height)?;
        if frames
            .iter()
            .any(|f| f.width != first.width || f.height != first.height || f.channels != 3)
        {
            return Err(VqaError::invalid("frames must share one 3-channel size"));
        }
        Ok(MemoryVideo { meta, frames })
    }

    pub fn frames(&self) -> &[Image] {
        &self.frames
    }
}

impl VideoSource for MemoryVideo {
    fn meta(&self) -> &VideoMeta {
        &self.meta
    }

    fn read_frame(&self, index: usize) -> Result<Image> {
        self.frames.get(index).cloned().ok_or(VqaError::Decode {
            uri: self.meta.uri.clone(),
            frame: index,
            reason: "frame index out of range".into(),
        })
    }
}

/// Presents another source rescaled so its shorter side equals `short_side`.
pub struct ScaledSource<'a> {
    inner: &'a dyn VideoSource,
    meta: VideoMeta,
    short_side: usize,
}

impl<'a> ScaledSource<'a> {
    pub fn new(inner: &'a dyn VideoSource, short_side: usize) -> Result<Self> {
        let m = inner.meta();
        let (h, w) = crate::image::min_side_dims(m.height, m.width, short_side);
        let meta = VideoMeta::new(m.uri.clone(), m.frame_count, m.frame_rate, w, h)?;
        Ok(ScaledSource {
            inner,
            meta,
            short_side,
        })
    }
}

impl VideoSource for ScaledSource<'_> {
    fn meta(&self) -> &VideoMeta {
        &self.meta
    }

    fn read_frame(&self, index: usize) -> Result<Image> {
        Ok(self.inner.read_frame(index)?.resize_min_side(self.short_side))
    }
}
