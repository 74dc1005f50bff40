//! Model architectures: the gated unit, the segment-to-session CNNs, the
//! text CNN-LSTM, the multimodal fusion network and late fusion.

pub mod config;
pub mod late;
pub mod mgmu;
pub mod multimodal;
pub mod stscnn;
pub mod text;

use rand::{Rng, RngCore};

pub use config::{FusionConfig, MgmuVariant, ModelConfig, SegmentNetConfig, SessionNetConfig, TextNetConfig};
pub use late::{late_mean, LateFusion, LateMgmuNet};
pub use mgmu::{mgmu_vars, MgmuParams, MgmuParts, MgmuUnit};
pub use multimodal::{FusionKind, MultimodalInput, MultimodalNet};
pub use stscnn::{SegmentNet, SegmentStack, SessionNet, StsCnn};
pub use text::{TextEncoder, TextNet};

use crate::error::Result;
use crate::nn::Bound;
use crate::tensor::{Tape, Tensor, Var};

/// Evaluation or training (the latter may draw dropout masks).
pub enum Mode<'r> {
    Eval,
    Train(&'r mut dyn RngCore),
}

impl Mode<'_> {
    /// Inverted dropout; identity in eval mode or when `rate` is zero.
    pub fn dropout<'t>(&mut self, tape: &'t Tape, x: Var<'t>, rate: f64) -> Result<Var<'t>> {
        match self {
            Mode::Train(rng) if rate > 0.0 => {
                let keep = 1.0 - rate;
                let shape = x.shape();
                let n = shape.iter().product();
                let mask = (0..n)
                    .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                    .collect();
                x.mul(tape.leaf(Tensor::new(shape, mask)?))
            }
            _ => Ok(x),
        }
    }
}

/// Anything that maps one example to class logits on a tape.
pub trait Classifier {
    type Input;

    fn logits<'t>(&self, tape: &'t Tape, p: &Bound<'t>, input: &Self::Input, mode: &mut Mode<'_>) -> Result<Var<'t>>;
}

/// Softmax of `logits` under frozen parameters.
pub fn predict_proba<M: Classifier>(model: &M, params: &crate::nn::ModelParams, input: &M::Input) -> Result<Vec<f64>> {
    let tape = Tape::new();
    let p = params.bind_frozen(&tape);
    let logits = model.logits(&tape, &p, input, &mut Mode::Eval)?;
    let v = logits.to_tensor();
    Ok(crate::tensor::softmax(v.data()))
}
