use rand::Rng;

use super::params::{Bound, ModelParams, ParamId};
use crate::error::Result;
use crate::tensor::{glorot_uniform, Padding, Tape, Tensor, Var};

/// Fully connected layer `W·x + b`.
#[derive(Clone, Debug)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(params: &mut ModelParams, name: &str, inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let w = params.add(format!("{name}.w"), glorot_uniform(&[outputs, inputs], inputs, outputs, rng));
        let b = params.add(format!("{name}.b"), Tensor::zeros(&[outputs]));
        Self { w, b, inputs, outputs }
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, x: Var<'t>) -> Result<Var<'t>> {
        x.dense(p[self.w], p[self.b])
    }
}

#[derive(Clone, Debug)]
pub struct Conv1d {
    pub w: ParamId,
    pub b: ParamId,
    pub dilation: usize,
    pub padding: Padding,
}

impl Conv1d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        params: &mut ModelParams,
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        dilation: usize,
        padding: Padding,
        rng: &mut R,
    ) -> Self {
        let w = params.add(
            format!("{name}.w"),
            glorot_uniform(&[c_out, c_in, kernel], c_in * kernel, c_out * kernel, rng),
        );
        let b = params.add(format!("{name}.b"), Tensor::zeros(&[c_out]));
        Self { w, b, dilation, padding }
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, x: Var<'t>) -> Result<Var<'t>> {
        x.conv1d(p[self.w], Some(p[self.b]), self.dilation, self.padding)
    }
}

/// LSTM layer with gate order i, f, g, o and forget bias initialised to 1.
#[derive(Clone, Debug)]
pub struct Lstm {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub b: ParamId,
    pub inputs: usize,
    pub hidden: usize,
}

impl Lstm {
    pub fn new<R: Rng + ?Sized>(params: &mut ModelParams, name: &str, inputs: usize, hidden: usize, rng: &mut R) -> Self {
        let u = hidden;
        let w_ih = params.add(format!("{name}.w_ih"), glorot_uniform(&[4 * u, inputs], inputs, 4 * u, rng));
        let w_hh = params.add(format!("{name}.w_hh"), glorot_uniform(&[4 * u, u], u, 4 * u, rng));
        let mut bias = Tensor::zeros(&[4 * u]);
        bias.data_mut()[u..2 * u].iter_mut().for_each(|v| *v = 1.0);
        let b = params.add(format!("{name}.b"), bias);
        Self { w_ih, w_hh, b, inputs, hidden }
    }

    pub fn zero_state<'t>(&self, tape: &'t Tape) -> Var<'t> {
        tape.leaf(Tensor::zeros(&[2 * self.hidden]))
    }

    /// One step; `state` and the result are packed `[h; c]`.
    pub fn step<'t>(&self, tape: &'t Tape, p: &Bound<'t>, x: Var<'t>, state: Var<'t>) -> Result<Var<'t>> {
        tape.lstm_cell(x, state, p[self.w_ih], p[self.w_hh], p[self.b])
    }

    pub fn hidden_of<'t>(&self, state: Var<'t>) -> Result<Var<'t>> {
        state.slice(0, 0, self.hidden)
    }

    /// Runs over `inputs` from a zero state and returns every hidden state.
    pub fn sequence<'t>(&self, tape: &'t Tape, p: &Bound<'t>, inputs: &[Var<'t>]) -> Result<Vec<Var<'t>>> {
        let mut state = self.zero_state(tape);
        let mut hs = Vec::with_capacity(inputs.len());
        for &x in inputs {
            state = self.step(tape, p, x, state)?;
            hs.push(self.hidden_of(state)?);
        }
        Ok(hs)
    }
}
