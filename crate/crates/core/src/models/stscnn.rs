//! Segment-to-session classifier for the audio and video paths.

use rand::Rng;

use super::config::{ModelConfig, SegmentNetConfig, SessionNetConfig};
use super::{Classifier, Mode};
use crate::error::{Error, Result};
use crate::nn::{Bound, Conv1d, Dense, ModelParams};
use crate::tensor::{Padding, Tape, Tensor, Var};

/// Dilated conv stack over a `(C·C) × (D+1)` correlation structure.
#[derive(Clone, Debug)]
pub struct SegmentNet {
    pub in_channels: usize,
    pub delays: usize,
    convs: Vec<Conv1d>,
    embed: Dense,
    out: Dense,
}

impl SegmentNet {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ModelParams,
        prefix: &str,
        cfg: &SegmentNetConfig,
        in_channels: usize,
        delays: usize,
        classes: usize,
        rng: &mut R,
    ) -> Self {
        let mut convs = Vec::with_capacity(cfg.dilations.len());
        let mut c_in = in_channels;
        for (i, &d) in cfg.dilations.iter().enumerate() {
            convs.push(Conv1d::new(
                params,
                &format!("{prefix}.conv{i}"),
                c_in,
                cfg.conv_channels,
                cfg.kernel,
                d,
                cfg.padding,
                rng,
            ));
            c_in = cfg.conv_channels;
        }
        let embed = Dense::new(params, &format!("{prefix}.embed"), c_in, cfg.embedding, rng);
        let out = Dense::new(params, &format!("{prefix}.out"), cfg.embedding, classes, rng);
        Self { in_channels, delays, convs, embed, out }
    }

    pub fn embedding_size(&self) -> usize {
        self.embed.outputs
    }

    /// Returns `(logits, embedding)`.
    pub fn forward<'t>(&self, tape: &'t Tape, p: &Bound<'t>, fvtc: &Tensor) -> Result<(Var<'t>, Var<'t>)> {
        if fvtc.shape() != [self.in_channels, self.delays] {
            return Err(Error::shape("segment net input", fvtc.shape(), &[self.in_channels, self.delays]));
        }
        let mut x = tape.leaf(fvtc.clone());
        for conv in &self.convs {
            x = conv.forward(p, x)?.relu();
        }
        let pooled = x.mean_time()?;
        let embedding = self.embed.forward(p, pooled)?.tanh();
        let logits = self.out.forward(p, embedding)?;
        Ok((logits, embedding))
    }

    /// Embedding only, with frozen weights.
    pub fn embed(&self, params: &ModelParams, fvtc: &Tensor) -> Result<Vec<f64>> {
        let tape = Tape::new();
        let p = params.bind_frozen(&tape);
        let (_, e) = self.forward(&tape, &p, fvtc)?;
        let v = e.to_tensor().into_data();
        Ok(v)
    }
}

impl Classifier for SegmentNet {
    type Input = Tensor;

    fn logits<'t>(&self, tape: &'t Tape, p: &Bound<'t>, input: &Tensor, _mode: &mut Mode<'_>) -> Result<Var<'t>> {
        Ok(self.forward(tape, p, input)?.0)
    }
}

/// Stacked segment embeddings of one session, `N_seg × E`, with a row mask.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentStack {
    pub embeddings: Tensor,
    pub mask: Vec<bool>,
}

impl SegmentStack {
    pub fn new(embeddings: Tensor) -> Result<Self> {
        let n = match embeddings.shape() {
            &[n, _] => n,
            s => return Err(Error::invalid(format!("segment stack must be N×E, got {s:?}"))),
        };
        Ok(Self { embeddings, mask: vec![true; n] })
    }

    pub fn with_mask(embeddings: Tensor, mask: Vec<bool>) -> Result<Self> {
        let s = Self::new(embeddings)?;
        if mask.len() != s.mask.len() {
            return Err(Error::shape("segment stack mask", s.embeddings.shape(), &[mask.len()]));
        }
        Ok(Self { mask, ..s })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Tensor::from_rows(rows)?)
    }

    /// Real rows in order.
    pub fn real_rows(&self) -> Vec<&[f64]> {
        (0..self.mask.len())
            .filter(|&i| self.mask[i])
            .map(|i| self.embeddings.row(i))
            .collect()
    }

    pub fn width(&self) -> usize {
        self.embeddings.shape()[1]
    }
}

/// One convolution over the segment axis, relu, masked mean, dense.
#[derive(Clone, Debug)]
pub struct SessionNet {
    pub width: usize,
    conv: Conv1d,
    out: Dense,
}

impl SessionNet {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ModelParams,
        prefix: &str,
        cfg: &SessionNetConfig,
        width: usize,
        classes: usize,
        rng: &mut R,
    ) -> Self {
        let conv = Conv1d::new(
            params,
            &format!("{prefix}.conv"),
            width,
            cfg.conv_channels,
            cfg.kernel,
            1,
            Padding::Same,
            rng,
        );
        let out = Dense::new(params, &format!("{prefix}.out"), cfg.conv_channels, classes, rng);
        Self { width, conv, out }
    }

    pub fn forward<'t>(&self, tape: &'t Tape, p: &Bound<'t>, stack: &SegmentStack) -> Result<Var<'t>> {
        if stack.width() != self.width {
            return Err(Error::shape("session net input", stack.embeddings.shape(), &[0, self.width]));
        }
        let rows = stack.real_rows();
        if rows.is_empty() {
            return Err(Error::invalid("session has no segments"));
        }
        // Channels-major: E × N over the real rows only.
        let n = rows.len();
        let mut data = vec![0.0; self.width * n];
        for (t, row) in rows.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                data[c * n + t] = *v;
            }
        }
        let x = tape.leaf(Tensor::new(vec![self.width, n], data)?);
        let h = self.conv.forward(p, x)?.relu();
        self.out.forward(p, h.mean_time()?)
    }
}

impl Classifier for SessionNet {
    type Input = SegmentStack;

    fn logits<'t>(&self, tape: &'t Tape, p: &Bound<'t>, input: &SegmentStack, _mode: &mut Mode<'_>) -> Result<Var<'t>> {
        self.forward(tape, p, input)
    }
}

/// Both stages sharing one parameter map (`segment.*`, `session.*`).
#[derive(Clone, Debug)]
pub struct StsCnn {
    pub segment: SegmentNet,
    pub session: SessionNet,
}

impl StsCnn {
    pub fn new<R: Rng + ?Sized>(cfg: &ModelConfig, in_channels: usize, delays: usize, rng: &mut R) -> (Self, ModelParams) {
        let mut params = ModelParams::new();
        let segment = SegmentNet::new(&mut params, "segment", &cfg.segment, in_channels, delays, cfg.classes, rng);
        let session = SessionNet::new(
            &mut params,
            "session",
            &cfg.session,
            segment.embedding_size(),
            cfg.classes,
            rng,
        );
        (Self { segment, session }, params)
    }

    /// Embeds every segment of a session and stacks the vectors.
    pub fn stack(&self, params: &ModelParams, segments: &[Tensor]) -> Result<SegmentStack> {
        if segments.is_empty() {
            return Err(Error::invalid("session has no segments"));
        }
        let rows = segments
            .iter()
            .map(|s| self.segment.embed(params, s))
            .collect::<Result<Vec<_>>>()?;
        SegmentStack::from_rows(&rows)
    }
}
