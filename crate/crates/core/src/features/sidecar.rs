use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::fvtc::FvtcTensor;
use super::series::{ChannelSeries, Modality};
use super::text::TextGrid;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// JSON metadata stored next to every feature TNSR file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub kind: String,
    pub modality: Option<Modality>,
    pub frame_rate: Option<f64>,
    pub channel_names: Option<Vec<String>>,
    #[serde(rename = "D")]
    pub max_delay: Option<usize>,
    #[serde(rename = "S_max")]
    pub s_max: Option<usize>,
    #[serde(rename = "W_max")]
    pub w_max: Option<usize>,
    pub degenerate_flags: Option<Vec<bool>>,
}

impl Sidecar {
    fn bare(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            modality: None,
            frame_rate: None,
            channel_names: None,
            max_delay: None,
            s_max: None,
            w_max: None,
            degenerate_flags: None,
        }
    }
}

pub fn sidecar_path(tensor_path: &Path) -> PathBuf {
    tensor_path.with_extension("json")
}

fn write_pair(path: &Path, tensor: &Tensor, sidecar: &Sidecar) -> Result<()> {
    tensor.save(path)?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(sidecar)?)?;
    Ok(())
}

fn read_sidecar(path: &Path, kind: &str) -> Result<Sidecar> {
    let side: Sidecar = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
    if side.kind != kind {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!("expected kind `{kind}`, found `{}`", side.kind),
        });
    }
    Ok(side)
}

fn missing(path: &Path, field: &str) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: format!("sidecar lacks `{field}`"),
    }
}

pub fn write_series(path: &Path, series: &ChannelSeries) -> Result<()> {
    let side = Sidecar {
        modality: Some(series.modality),
        frame_rate: Some(series.frame_rate),
        channel_names: Some(series.channel_names.clone()),
        ..Sidecar::bare("channel_series")
    };
    write_pair(path, series.values(), &side)
}

pub fn read_series(path: &Path) -> Result<ChannelSeries> {
    let side = read_sidecar(path, "channel_series")?;
    let values = Tensor::load(path)?;
    ChannelSeries::new(
        side.modality.ok_or_else(|| missing(path, "modality"))?,
        side.channel_names.ok_or_else(|| missing(path, "channel_names"))?,
        side.frame_rate.ok_or_else(|| missing(path, "frame_rate"))?,
        values,
    )
}

pub fn write_fvtc(path: &Path, fvtc: &FvtcTensor, modality: Modality, frame_rate: f64, names: &[String]) -> Result<()> {
    let side = Sidecar {
        modality: Some(modality),
        frame_rate: Some(frame_rate),
        channel_names: Some(names.to_vec()),
        max_delay: Some(fvtc.max_delay),
        degenerate_flags: Some(fvtc.degenerate.clone()),
        ..Sidecar::bare("fvtc")
    };
    write_pair(path, &fvtc.values, &side)
}

pub fn read_fvtc(path: &Path) -> Result<FvtcTensor> {
    let side = read_sidecar(path, "fvtc")?;
    let values = Tensor::load(path)?;
    let max_delay = side.max_delay.ok_or_else(|| missing(path, "D"))?;
    let degenerate = side.degenerate_flags.ok_or_else(|| missing(path, "degenerate_flags"))?;
    let channels = degenerate.len();
    if values.shape() != [channels * channels, max_delay + 1] {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!("shape {:?} disagrees with sidecar", values.shape()),
        });
    }
    Ok(FvtcTensor { channels, max_delay, values, degenerate })
}

pub fn write_text_grid(path: &Path, grid: &TextGrid) -> Result<()> {
    let side = Sidecar {
        s_max: Some(grid.s_max),
        w_max: Some(grid.w_max),
        ..Sidecar::bare("text_grid")
    };
    write_pair(path, &grid.values, &side)?;
    let mask = Tensor::new(
        vec![grid.s_max, grid.w_max],
        grid.mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect(),
    )?;
    mask.save(path.with_extension("mask.tnsr"))
}

pub fn read_text_grid(path: &Path) -> Result<TextGrid> {
    let side = read_sidecar(path, "text_grid")?;
    let values = Tensor::load(path)?;
    let mask = Tensor::load(path.with_extension("mask.tnsr"))?;
    let (s_max, w_max) = (
        side.s_max.ok_or_else(|| missing(path, "S_max"))?,
        side.w_max.ok_or_else(|| missing(path, "W_max"))?,
    );
    let dim = match values.shape() {
        &[s, w, e] if s == s_max && w == w_max => e,
        s => {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: format!("grid shape {s:?} disagrees with sidecar"),
            })
        }
    };
    Ok(TextGrid {
        s_max,
        w_max,
        dim,
        values,
        mask: mask.data().iter().map(|&v| v != 0.0).collect(),
        truncated_sentences: 0,
        truncated_words: 0,
        oov_tokens: 0,
    })
}
