//! The repeated-split protocol: train and test on ten seeded 80/20
//! partitions and report the median criteria.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::config::TrainConfig;
use super::eval::evaluate_model;
use super::trainer::{train_model, TrainingLog};
use crate::datasets::{make_splits, DatasetManifest};
use crate::error::{Result, VqaError};
use crate::metrics::{median_over_splits, EvalResult};

/// One JSON line of the results file.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplitRecord {
    pub database: String,
    pub split_seed: u64,
    pub repeat_index: usize,
    #[serde(flatten)]
    pub result: EvalResult,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProtocolReport {
    pub config_fingerprint: String,
    pub splits: Vec<SplitRecord>,
    pub logs: Vec<TrainingLog>,
    pub median: EvalResult,
}

/// Run every split. With `output_dir`, writes `split_<r>.ckpt.json`,
/// `split_<r>.log.jsonl`, `results.jsonl` and `median.json` there.
pub fn run_protocol(
    manifest: &DatasetManifest,
    config: &TrainConfig,
    output_dir: Option<&Path>,
) -> Result<ProtocolReport> {
    let splits = make_splits(manifest, config.seed)?;
    if let Some(dir) = output_dir {
        std::fs::create_dir_all(dir).map_err(|e| VqaError::io(dir, e))?;
    }
    let mut records = Vec::with_capacity(splits.len());
    let mut logs = Vec::with_capacity(splits.len());
    for split in &splits {
        let (model, log) = train_model(manifest, split, config)?;
        let result = evaluate_model(&model, manifest, split)?;
        log::info!(
            "split {}: srcc {:.4} plcc {:.4}",
            split.repeat_index,
            result.srcc,
            result.plcc_fitted
        );
        if let Some(dir) = output_dir {
            model.save(&dir.join(format!("split_{}.ckpt.json", split.repeat_index)))?;
            write_jsonl(&dir.join(format!("split_{}.log.jsonl", split.repeat_index)), &log.epochs)?;
        }
        records.push(SplitRecord {
            database: manifest.name.clone(),
            split_seed: split.seed,
            repeat_index: split.repeat_index,
            result,
        });
        logs.push(log);
    }
    let median = median_over_splits(&records.iter().map(|r| r.result.clone()).collect::<Vec<_>>())?;
    if let Some(dir) = output_dir {
        write_jsonl(&dir.join("results.jsonl"), &records)?;
        let path = dir.join("median.json");
        let json = serde_json::to_string_pretty(&median).map_err(|e| VqaError::Numeric(e.to_string()))?;
        std::fs::write(&path, json).map_err(|e| VqaError::io(&path, e))?;
    }
    Ok(ProtocolReport {
        config_fingerprint: config.fingerprint(),
        splits: records,
        logs,
        median,
    })
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| VqaError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for row in rows {
        let line = serde_json::to_string(row).map_err(|e| VqaError::Numeric(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| VqaError::io(path, e))?;
    }
    out.flush().map_err(|e| VqaError::io(path, e))
}
