//! Intermediate fusion of audio, video and text latents.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::mgmu::MgmuUnit;
use super::text::TextEncoder;
use super::{Classifier, Mode};
use crate::error::{Error, Result};
use crate::features::TextGrid;
use crate::nn::{Bound, Dense, Lstm, ModelParams};
use crate::tensor::{Tape, Tensor, Var};

/// How the three latents are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionKind {
    /// Pairwise gated units (audio-video, audio-text, video-text).
    #[default]
    Mgmu,
    /// Plain concatenation of the three latents.
    Concat,
}

/// One session for the multimodal network.
#[derive(Clone, Debug)]
pub struct MultimodalInput {
    /// `N_a × E` frozen audio segment embeddings.
    pub audio: Tensor,
    /// `N_v × E` frozen video segment embeddings.
    pub video: Tensor,
    pub text: TextGrid,
}

#[derive(Clone, Debug)]
struct SeqPath {
    first: Lstm,
    second: Lstm,
}

impl SeqPath {
    fn new<R: Rng + ?Sized>(params: &mut ModelParams, prefix: &str, inputs: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            first: Lstm::new(params, &format!("{prefix}.lstm1"), inputs, hidden, rng),
            second: Lstm::new(params, &format!("{prefix}.lstm2"), hidden, hidden, rng),
        }
    }

    fn forward<'t>(&self, tape: &'t Tape, p: &Bound<'t>, seq: &Tensor, what: &'static str) -> Result<Var<'t>> {
        let &[n, e] = seq.shape() else {
            return Err(Error::invalid(format!("{what} sequence must be N×E, got {:?}", seq.shape())));
        };
        if e != self.first.inputs {
            return Err(Error::shape(what, seq.shape(), &[n, self.first.inputs]));
        }
        if n == 0 {
            return Err(Error::invalid(format!("{what} sequence is empty")));
        }
        let steps: Vec<Var<'t>> = (0..n).map(|i| tape.leaf(Tensor::vector(seq.row(i).to_vec()))).collect();
        let h1 = self.first.sequence(tape, p, &steps)?;
        let h2 = self.second.sequence(tape, p, &h1)?;
        Ok(*h2.last().expect("non-empty"))
    }
}

#[derive(Clone, Debug)]
pub struct MultimodalNet {
    pub kind: FusionKind,
    pub dropout: f64,
    audio: SeqPath,
    video: SeqPath,
    pub text: TextEncoder,
    /// `[av, at, vt]` when `kind` is [`FusionKind::Mgmu`].
    pub units: Vec<MgmuUnit>,
    hidden: Vec<Dense>,
    out: Dense,
}

impl MultimodalNet {
    /// `embedding` is the width of the frozen segment embeddings, `text_dim`
    /// the word-vector width.
    pub fn new<R: Rng + ?Sized>(
        cfg: &ModelConfig,
        kind: FusionKind,
        embedding: usize,
        text_dim: usize,
        rng: &mut R,
    ) -> (Self, ModelParams) {
        let f = &cfg.fusion;
        let mut params = ModelParams::new();
        let u = f.av_lstm_hidden;
        let audio = SeqPath::new(&mut params, "audio", embedding, u, rng);
        let video = SeqPath::new(&mut params, "video", embedding, u, rng);
        let text = TextEncoder::new(&mut params, "text", &f.text, text_dim, rng);
        let t = text.latent_size();
        let (units, fused) = match kind {
            FusionKind::Mgmu => {
                let units = vec![
                    MgmuUnit::new(&mut params, "mgmu.av", u, u, f.d_h, f.variant, rng),
                    MgmuUnit::new(&mut params, "mgmu.at", u, t, f.d_h, f.variant, rng),
                    MgmuUnit::new(&mut params, "mgmu.vt", u, t, f.d_h, f.variant, rng),
                ];
                (units, 3 * f.d_h)
            }
            FusionKind::Concat => (Vec::new(), 2 * u + t),
        };
        let mut hidden = Vec::new();
        let mut width = fused;
        for (i, &w) in f.fc_hidden.iter().enumerate() {
            hidden.push(Dense::new(&mut params, &format!("head.fc{i}"), width, w, rng));
            width = w;
        }
        let out = Dense::new(&mut params, "head.out", width, cfg.classes, rng);
        let net = Self { kind, dropout: f.dropout, audio, video, text, units, hidden, out };
        (net, params)
    }

    /// `(audio, video, text)` latents.
    pub fn latents<'t>(&self, tape: &'t Tape, p: &Bound<'t>, input: &MultimodalInput) -> Result<[Var<'t>; 3]> {
        Ok([
            self.audio.forward(tape, p, &input.audio, "audio")?,
            self.video.forward(tape, p, &input.video, "video")?,
            self.text.forward(tape, p, &input.text)?,
        ])
    }

    /// The vector handed to the head: three concatenated unit outputs, or
    /// the concatenated latents.
    pub fn fuse_latents<'t>(&self, tape: &'t Tape, p: &Bound<'t>, [a, v, t]: [Var<'t>; 3]) -> Result<Var<'t>> {
        match self.kind {
            FusionKind::Mgmu => {
                let pairs = [(a, v), (a, t), (v, t)];
                let hs = self
                    .units
                    .iter()
                    .zip(pairs)
                    .map(|(unit, (x1, x2))| Ok(unit.forward(tape, p, x1, x2)?.h))
                    .collect::<Result<Vec<_>>>()?;
                tape.concat(&hs, 0)
            }
            FusionKind::Concat => tape.concat(&[a, v, t], 0),
        }
    }

    pub fn head<'t>(&self, p: &Bound<'t>, fused: Var<'t>) -> Result<Var<'t>> {
        let mut x = fused;
        for layer in &self.hidden {
            x = layer.forward(p, x)?.relu();
        }
        self.out.forward(p, x)
    }
}

impl Classifier for MultimodalNet {
    type Input = MultimodalInput;

    fn logits<'t>(&self, tape: &'t Tape, p: &Bound<'t>, input: &MultimodalInput, mode: &mut Mode<'_>) -> Result<Var<'t>> {
        let latents = self.latents(tape, p, input)?;
        let fused = self.fuse_latents(tape, p, latents)?;
        let fused = mode.dropout(tape, fused, self.dropout)?;
        self.head(p, fused)
    }
}
