//! On-disk datasets, run configuration and the pipeline commands.

mod commands;
mod config;
mod dataset;
mod stages;

pub use commands::{
    cmd_ablate, cmd_eval, cmd_features, cmd_grid, cmd_metrics, cmd_params, cmd_synth, cmd_train, split_name, write_reports,
    AblationReport, AblationRow, TrainRun, ABLATION_ROWS,
};
pub use config::{AblationConfig, DataConfig, FeatureConfig, RunConfig, SegmentSpec, TrainSection};
pub use dataset::{sha256_hex, split_hash, synthesize, Dataset, FeatureSummary, Manifest, Needs, SessionFeatures, SessionRecord, MANIFEST};
pub use stages::{train_late_mgmu, train_multimodal, train_unimodal, CheckpointMeta, ModelKind, StageLog, Trained};
