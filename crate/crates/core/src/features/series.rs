use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Audio,
    Video,
}

/// Six vocal tract variables followed by the two glottal parameters.
pub const AUDIO_CHANNELS: [&str; 8] = ["LA", "LP", "TBCL", "TBCD", "TTCL", "TTCD", "periodicity", "aperiodicity"];

/// Facial action units around the eyes and lips.
pub const VIDEO_CHANNELS: [&str; 10] = [
    "AU01", "AU02", "AU04", "AU05", "AU06", "AU07", "AU12", "AU15", "AU20", "AU25",
];

impl Modality {
    pub fn default_channel_names(self) -> Vec<String> {
        match self {
            Modality::Audio => AUDIO_CHANNELS.iter().map(|s| s.to_string()).collect(),
            Modality::Video => VIDEO_CHANNELS.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn default_channels(self) -> usize {
        match self {
            Modality::Audio => AUDIO_CHANNELS.len(),
            Modality::Video => VIDEO_CHANNELS.len(),
        }
    }

    /// Frames per second when the config does not say otherwise.
    pub fn default_frame_rate(self) -> f64 {
        match self {
            Modality::Audio => 100.0,
            Modality::Video => 30.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Audio => "audio",
            Modality::Video => "video",
        }
    }
}

/// A `C×T` block of low-level channel values. Frames at or beyond
/// `valid_frames` are zero padding.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSeries {
    pub modality: Modality,
    pub channel_names: Vec<String>,
    pub frame_rate: f64,
    values: Tensor,
    valid_frames: usize,
}

impl ChannelSeries {
    pub fn new(modality: Modality, channel_names: Vec<String>, frame_rate: f64, values: Tensor) -> Result<Self> {
        let frames = match values.shape() {
            &[c, t] if c == channel_names.len() => t,
            s => {
                return Err(Error::invalid(format!(
                    "{} series with {} channel names cannot hold values of shape {s:?}",
                    modality.as_str(),
                    channel_names.len()
                )))
            }
        };
        if frames == 0 {
            return Err(Error::invalid("series needs at least one frame"));
        }
        if !(frame_rate > 0.0 && frame_rate.is_finite()) {
            return Err(Error::invalid(format!("frame rate must be positive, got {frame_rate}")));
        }
        if !values.is_finite() {
            return Err(Error::invalid("series contains non-finite values"));
        }
        Ok(Self {
            modality,
            channel_names,
            frame_rate,
            values,
            valid_frames: frames,
        })
    }

    /// Series with the modality's default channel names.
    pub fn with_defaults(modality: Modality, frame_rate: f64, values: Tensor) -> Result<Self> {
        Self::new(modality, modality.default_channel_names(), frame_rate, values)
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn channels(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn frames(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn valid_frames(&self) -> usize {
        self.valid_frames
    }

    pub fn duration_s(&self) -> f64 {
        self.frames() as f64 / self.frame_rate
    }

    /// `true` for real frames, `false` for padding.
    pub fn mask(&self) -> Vec<bool> {
        (0..self.frames()).map(|t| t < self.valid_frames).collect()
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    /// Copies frames `[start, start + len)`, zero-filling past the end.
    fn window(&self, start: usize, len: usize) -> Self {
        let (c, t) = (self.channels(), self.frames());
        let mut data = vec![0.0; c * len];
        let real = t.saturating_sub(start).min(len);
        for ch in 0..c {
            data[ch * len..ch * len + real].copy_from_slice(&self.channel(ch)[start..start + real]);
        }
        Self {
            modality: self.modality,
            channel_names: self.channel_names.clone(),
            frame_rate: self.frame_rate,
            values: Tensor::new(vec![c, len], data).expect("window shape"),
            valid_frames: real.min(self.valid_frames.saturating_sub(start)),
        }
    }
}

/// Number of full windows in a series of `frames` frames; a series shorter
/// than one window still yields one (padded) segment.
pub fn segment_count(frames: usize, window: usize, hop: usize) -> usize {
    if frames < window {
        1
    } else {
        (frames - window) / hop + 1
    }
}

/// Cuts a series into overlapping fixed-length windows.
///
/// Windows start every `window_s - overlap_s` seconds. A trailing remainder
/// shorter than one window is dropped; a series shorter than one window
/// becomes a single zero-padded segment.
pub fn segment_series(series: &ChannelSeries, window_s: f64, overlap_s: f64) -> Result<Vec<ChannelSeries>> {
    if !(overlap_s >= 0.0 && overlap_s < window_s) {
        return Err(Error::invalid(format!(
            "overlap {overlap_s} s must lie in [0, window {window_s} s)"
        )));
    }
    let window = (window_s * series.frame_rate).round() as usize;
    let hop = ((window_s - overlap_s) * series.frame_rate).round() as usize;
    if window == 0 || hop == 0 {
        return Err(Error::invalid("window and hop must each span at least one frame"));
    }
    let count = segment_count(series.valid_frames, window, hop);
    Ok((0..count).map(|k| series.window(k * hop, window)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(seconds: f64, rate: f64) -> ChannelSeries {
        let t = (seconds * rate) as usize;
        let data = (0..2 * t).map(|i| i as f64 + 1.0).collect();
        ChannelSeries::new(
            Modality::Video,
            vec!["a".into(), "b".into()],
            rate,
            Tensor::new(vec![2, t], data).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn seven_segments_from_two_minutes() {
        let s = series(120.0, 10.0);
        let segs = segment_series(&s, 20.0, 5.0).unwrap();
        assert_eq!(segs.len(), 7);
        for (k, seg) in segs.iter().enumerate() {
            assert_eq!(seg.frames(), 200);
            assert_eq!(seg.channel(0)[0], s.channel(0)[k * 150]);
        }
    }

    #[test]
    fn exact_fit_is_one_segment() {
        let segs = segment_series(&series(40.0, 10.0), 40.0, 5.0).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].valid_frames(), 400);
    }

    #[test]
    fn short_series_is_padded() {
        let segs = segment_series(&series(10.0, 10.0), 20.0, 5.0).unwrap();
        assert_eq!(segs.len(), 1);
        let seg = &segs[0];
        assert_eq!(seg.frames(), 200);
        assert_eq!(seg.valid_frames(), 100);
        assert!(seg.channel(1)[100..].iter().all(|&v| v == 0.0));
        let mask = seg.mask();
        assert!(mask[99] && !mask[100]);
    }

    #[test]
    fn overlap_must_be_below_window() {
        assert!(segment_series(&series(30.0, 10.0), 20.0, 20.0).is_err());
        assert!(segment_series(&series(30.0, 10.0), 20.0, -1.0).is_err());
    }

    #[test]
    fn rejects_bad_series() {
        let bad = Tensor::new(vec![2, 2], vec![1.0, f64::NAN, 0.0, 0.0]).unwrap();
        assert!(ChannelSeries::new(Modality::Audio, vec!["a".into(), "b".into()], 100.0, bad).is_err());
        assert!(ChannelSeries::with_defaults(Modality::Audio, 100.0, Tensor::zeros(&[3, 5])).is_err());
    }

    /// Counts window placements one by one.
    fn enumerate_placements(frames: usize, window: usize, hop: usize) -> usize {
        if frames < window {
            return 1;
        }
        let mut start = 0;
        let mut n = 0;
        while start + window <= frames {
            n += 1;
            start += hop;
        }
        n
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn count_formula_matches_enumeration(frames in 1usize..5000, window in 1usize..600, overlap_frac in 0.0f64..0.95) {
            let overlap = ((window as f64) * overlap_frac).floor() as usize;
            let hop = (window - overlap).max(1);
            prop_assert_eq!(segment_count(frames, window, hop), enumerate_placements(frames, window, hop));
        }
    }
}
