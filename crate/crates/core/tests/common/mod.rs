#![allow(dead_code)]

use std::path::Path;

use chunkvqa::datasets::{synthesize_dataset, DatasetManifest, SynthProfile};
use chunkvqa::training::TrainConfig;

pub fn synth(dir: &Path, n: usize, seed: u64) -> DatasetManifest {
    synthesize_dataset(dir, n, seed, &SynthProfile::stub()).expect("synthesis")
}

/// Stub profile cut down for quick tests.
pub fn quick_config(epochs: usize) -> TrainConfig {
    let mut cfg = TrainConfig::stub();
    cfg.epochs = epochs;
    cfg.hidden_units = 32;
    cfg
}
