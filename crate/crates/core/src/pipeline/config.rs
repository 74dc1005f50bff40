use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::CorrelationEstimator;
use crate::metrics::EvalOptions;
use crate::models::ModelConfig;
use crate::rng::{derive_seed, tag};
use crate::synth::CohortSpec;
use crate::train::{GridSpec, TrainConfig};

/// Every tunable of a run. Missing keys take their defaults; unknown keys
/// are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub features: FeatureConfig,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub eval: EvalOptions,
    pub ablation: AblationConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub cohort: CohortSpec,
    /// Train, validation and test shares of the subjects.
    pub split_ratios: [f64; 3],
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { cohort: CohortSpec::default(), split_ratios: [0.70, 0.15, 0.15] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentSpec {
    pub window_s: f64,
    pub overlap_s: f64,
    pub max_delay: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub audio: SegmentSpec,
    pub video: SegmentSpec,
    pub estimator: CorrelationEstimator,
    pub s_max: usize,
    pub w_max: usize,
}

impl Default for SegmentSpec {
    fn default() -> Self {
        Self { window_s: 40.0, overlap_s: 5.0, max_delay: 50 }
    }
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            audio: SegmentSpec::default(),
            video: SegmentSpec { window_s: 20.0, overlap_s: 5.0, max_delay: 45 },
            estimator: CorrelationEstimator::FullSegment,
            s_max: 24,
            w_max: 12,
        }
    }
}

/// Optimiser settings per training stage. The `seed` of each stage is
/// replaced by one derived from `seed` and the stage name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub seed: u64,
    pub segment: TrainConfig,
    pub session: TrainConfig,
    pub text: TrainConfig,
    pub multimodal: TrainConfig,
    pub late: TrainConfig,
    pub grid: GridSpec,
}

impl TrainSection {
    pub fn stage(&self, base: &TrainConfig, stage: &str) -> TrainConfig {
        TrainConfig { seed: derive_seed(self.seed, tag(stage)), ..base.clone() }
    }

    pub fn set_max_epochs(&mut self, epochs: usize) {
        for c in [&mut self.segment, &mut self.session, &mut self.text, &mut self.multimodal, &mut self.late] {
            c.max_epochs = epochs;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    /// Training seeds of the fusion runs; rows report the median.
    pub seeds: Vec<u64>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self { seeds: vec![0] }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Pretty JSON of the fully resolved config.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.data.cohort.validate()?;
        for t in [&self.train.segment, &self.train.session, &self.train.text, &self.train.multimodal, &self.train.late] {
            t.validate()?;
        }
        if self.ablation.seeds.is_empty() {
            return Err(Error::invalid("ablation.seeds must not be empty"));
        }
        Ok(())
    }
}
