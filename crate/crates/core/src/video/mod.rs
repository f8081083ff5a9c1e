//! Decoding adapters: anything that can hand out individual frames by index.

mod memory;
mod y4m;

use std::path::Path;

pub use memory::{MemoryVideo, ScaledSource};
pub use y4m::{write_y4m, Y4mReader};

use crate::error::{Result, VqaError};
use crate::image::Image;
use crate::sampling::VideoMeta;

/// Random-access frame provider.
pub trait VideoSource: Send + Sync {
    fn meta(&self) -> &VideoMeta;

    /// Decode frame `index` as planar RGB in `[0, 1]`.
    fn read_frame(&self, index: usize) -> Result<Image>;
}

/// Open a video file, dispatching on its extension.
pub fn open_video(path: &Path) -> Result<Box<dyn VideoSource>> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("y4m") => Ok(Box::new(Y4mReader::open(path)?)),
        _ => Err(VqaError::UnsupportedContainer(path.display().to_string())),
    }
}
