use serde::{Deserialize, Serialize};

use crate::tensor::Padding;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MgmuVariant {
    /// `h = z⊙h1 + z⊙h2`
    AsWritten,
    /// `h = z⊙h1 + (1−z)⊙h2`
    #[default]
    Complementary,
}

impl MgmuVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            MgmuVariant::AsWritten => "as_written",
            MgmuVariant::Complementary => "complementary",
        }
    }
}

impl std::str::FromStr for MgmuVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "as_written" => Ok(MgmuVariant::AsWritten),
            "complementary" => Ok(MgmuVariant::Complementary),
            other => Err(format!("unknown mGMU variant `{other}` (expected as_written or complementary)")),
        }
    }
}

/// Segment-level dilated CNN over one correlation structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentNetConfig {
    pub conv_channels: usize,
    pub kernel: usize,
    pub dilations: Vec<usize>,
    pub padding: Padding,
    pub embedding: usize,
}

impl Default for SegmentNetConfig {
    fn default() -> Self {
        Self {
            conv_channels: 32,
            kernel: 3,
            dilations: vec![1, 3, 7, 15],
            padding: Padding::Same,
            embedding: 128,
        }
    }
}

/// Session-level CNN over the stacked segment embeddings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionNetConfig {
    pub conv_channels: usize,
    pub kernel: usize,
}

impl Default for SessionNetConfig {
    fn default() -> Self {
        Self {
            conv_channels: 32,
            kernel: 1,
        }
    }
}

/// Convolutions over words, then an LSTM over sentences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextNetConfig {
    pub conv_channels: Vec<usize>,
    pub kernel: usize,
    pub lstm_hidden: usize,
}

impl Default for TextNetConfig {
    fn default() -> Self {
        Self {
            conv_channels: vec![64, 64],
            kernel: 3,
            lstm_hidden: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// Hidden size of both LSTM layers on the audio and on the video path.
    pub av_lstm_hidden: usize,
    pub text: TextNetConfig,
    pub d_h: usize,
    pub fc_hidden: Vec<usize>,
    pub variant: MgmuVariant,
    /// Inverted dropout on the fused vector during training.
    pub dropout: f64,
    /// Width of each late-fusion mGMU.
    pub late_d_h: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            av_lstm_hidden: 128,
            text: TextNetConfig::default(),
            d_h: 64,
            fc_hidden: vec![96],
            variant: MgmuVariant::Complementary,
            dropout: 0.0,
            late_d_h: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub classes: usize,
    pub segment: SegmentNetConfig,
    pub session: SessionNetConfig,
    pub text: TextNetConfig,
    pub fusion: FusionConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            classes: 3,
            segment: SegmentNetConfig::default(),
            session: SessionNetConfig::default(),
            text: TextNetConfig::default(),
            fusion: FusionConfig::default(),
        }
    }
}
