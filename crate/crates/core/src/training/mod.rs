//! Training, evaluation and scoring.

mod config;
mod eval;
mod model;
mod optim;
mod protocol;
mod trainer;

pub use config::{
    AdapterSection, DataSection, Profile, RunConfig, RunConfigFile, SampleUnit, SamplingSection,
    TrainConfig, TrainSection,
};
pub use eval::{
    bench_video, cross_database_eval, evaluate_model, evaluate_with, predict_video, score_video,
    BenchReport, ModuleTimings,
    CrossDatabaseResult, MultiScaleScore, ScoreReport, VideoScorer,
};
pub use model::{ChunkForward, ModelGrads, QualityModel, VideoScore, MOTION_WEIGHTS_SEED};
pub use optim::Adam;
pub use protocol::{run_protocol, write_jsonl, ProtocolReport, SplitRecord};
pub use trainer::{train_model, EpochRecord, TrainingLog};
