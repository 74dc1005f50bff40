//! CNN-LSTM over a sentence × word embedding grid.

use rand::Rng;

use super::config::TextNetConfig;
use super::{Classifier, Mode};
use crate::error::{Error, Result};
use crate::features::TextGrid;
use crate::nn::{Bound, Conv1d, Dense, Lstm, ModelParams};
use crate::tensor::{Padding, Tape, Tensor, Var};

/// Word convolutions and max-pool per sentence, then an LSTM across the real
/// sentences. The last hidden state is the latent.
#[derive(Clone, Debug)]
pub struct TextEncoder {
    pub dim: usize,
    convs: Vec<Conv1d>,
    lstm: Lstm,
}

impl TextEncoder {
    pub fn new<R: Rng + ?Sized>(params: &mut ModelParams, prefix: &str, cfg: &TextNetConfig, dim: usize, rng: &mut R) -> Self {
        let mut convs = Vec::new();
        let mut c_in = dim;
        for (i, &c) in cfg.conv_channels.iter().enumerate() {
            convs.push(Conv1d::new(params, &format!("{prefix}.conv{i}"), c_in, c, cfg.kernel, 1, Padding::Same, rng));
            c_in = c;
        }
        let lstm = Lstm::new(params, &format!("{prefix}.lstm"), c_in, cfg.lstm_hidden, rng);
        Self { dim, convs, lstm }
    }

    pub fn latent_size(&self) -> usize {
        self.lstm.hidden
    }

    /// One vector per real sentence.
    pub fn sentence_vectors<'t>(&self, tape: &'t Tape, p: &Bound<'t>, grid: &TextGrid) -> Result<Vec<Var<'t>>> {
        if grid.dim != self.dim {
            return Err(Error::shape("text grid embedding", &[grid.s_max, grid.w_max, grid.dim], &[self.dim]));
        }
        let lengths = grid.sentence_lengths();
        let mut out = Vec::new();
        for (s, &len) in lengths.iter().enumerate() {
            if len == 0 {
                continue;
            }
            // Real words occupy a prefix of the row; the pad tail is dropped.
            let full = grid.sentence_channels(s);
            let data = full
                .data()
                .chunks(grid.w_max)
                .flat_map(|row| row[..len].iter().copied())
                .collect();
            let mut x = tape.leaf(Tensor::new(vec![self.dim, len], data)?);
            for conv in &self.convs {
                x = conv.forward(p, x)?.relu();
            }
            out.push(x.max_time()?);
        }
        if out.is_empty() {
            return Err(Error::invalid("text grid has no real sentence"));
        }
        Ok(out)
    }

    pub fn forward<'t>(&self, tape: &'t Tape, p: &Bound<'t>, grid: &TextGrid) -> Result<Var<'t>> {
        let sentences = self.sentence_vectors(tape, p, grid)?;
        let hs = self.lstm.sequence(tape, p, &sentences)?;
        Ok(*hs.last().expect("at least one sentence"))
    }
}

/// Text-only classifier: encoder plus a dense layer.
#[derive(Clone, Debug)]
pub struct TextNet {
    pub encoder: TextEncoder,
    out: Dense,
}

impl TextNet {
    pub fn new<R: Rng + ?Sized>(cfg: &TextNetConfig, dim: usize, classes: usize, rng: &mut R) -> (Self, ModelParams) {
        let mut params = ModelParams::new();
        let encoder = TextEncoder::new(&mut params, "text", cfg, dim, rng);
        let out = Dense::new(&mut params, "out", encoder.latent_size(), classes, rng);
        (Self { encoder, out }, params)
    }

    /// Returns `(logits, latent)`.
    pub fn forward<'t>(&self, tape: &'t Tape, p: &Bound<'t>, grid: &TextGrid) -> Result<(Var<'t>, Var<'t>)> {
        let latent = self.encoder.forward(tape, p, grid)?;
        Ok((self.out.forward(p, latent)?, latent))
    }
}

impl Classifier for TextNet {
    type Input = TextGrid;

    fn logits<'t>(&self, tape: &'t Tape, p: &Bound<'t>, input: &TextGrid, _mode: &mut Mode<'_>) -> Result<Var<'t>> {
        Ok(self.forward(tape, p, input)?.0)
    }
}
