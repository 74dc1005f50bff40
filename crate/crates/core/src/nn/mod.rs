//! Parameter storage and the layers the models are built from.

mod layers;
mod params;

pub use layers::{Conv1d, Dense, Lstm};
pub use params::{Bound, CheckpointManifest, ModelParams, ParamId};
