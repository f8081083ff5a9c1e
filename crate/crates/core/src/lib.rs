//! Chunk-based no-reference video quality assessment.
//!
//! A video is cut into fixed-duration chunks. Each chunk contributes one
//! high-resolution key frame, summarised by per-stage mean/std statistics of
//! a trainable convolutional backbone, and its low-resolution frames,
//! summarised by a frozen motion network. A small regressor scores every
//! chunk; the video score is the chunk average. Scores at several display
//! scales can be fused with weights derived from a contrast sensitivity
//! model of the viewing environment.

pub mod csf;
pub mod datasets;
pub mod error;
pub mod features;
pub mod image;
pub mod losses;
pub mod metrics;
pub mod quality_head;
pub mod sampling;
pub mod training;
pub mod video;

pub use error::{Result, VqaError};
