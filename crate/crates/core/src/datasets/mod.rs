//! Labelled video collections: manifest files, reproducible train/test
//! partitions and a procedural generator with known quality labels.

mod manifest;
mod splits;
mod synth;

pub use manifest::{load_manifest, parse_manifest, write_manifest, DatasetManifest, ManifestRecord, MANIFEST_HEADER};
pub use splits::{make_split, make_splits, SplitSpec, REPEATS, TRAIN_FRACTION};
pub use synth::{
    degradation_index, oracle_mos, render_clip, synthesize_dataset, Degradation, SynthProfile, MOS_MAX, MOS_MIN,
};
