//! Model-ready inputs: segment windows, correlation structures and the
//! padded text grid.

mod fvtc;
mod series;
pub mod sidecar;
mod text;

pub use fvtc::{compute_fvtc, CorrelationEstimator, FvtcTensor};
pub use series::{segment_count, segment_series, ChannelSeries, Modality, AUDIO_CHANNELS, VIDEO_CHANNELS};
pub use text::{
    default_stopwords, embed_text, tokenize, EmbeddingTable, TextGrid, DEFAULT_EMBEDDING_DIM, DEFAULT_PUNCTUATION,
    DEFAULT_STOPWORDS,
};
