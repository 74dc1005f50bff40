//! Minimal gated multimodal unit.
//!
//! ```text
//! h1 = tanh(W1·x1)
//! h2 = tanh(W2·x2)
//! z  = σ(Wz·[x1, x2])
//! h  = z⊙h1 + z⊙h2          (as written)
//! h  = z⊙h1 + (1−z)⊙h2      (complementary)
//! ```
//!
//! There are no bias terms; the learnable set is `{W1, W2, Wz}`.

use rand::Rng;

use super::config::MgmuVariant;
use crate::error::{Error, Result};
use crate::nn::{Bound, ModelParams, ParamId};
use crate::tensor::{glorot_uniform, Tape, Tensor, Var};

/// Intermediate values of one unit evaluation.
#[derive(Clone, Copy, Debug)]
pub struct MgmuParts<'t> {
    pub h1: Var<'t>,
    pub h2: Var<'t>,
    pub z: Var<'t>,
    pub h: Var<'t>,
}

/// Evaluates the unit on tape variables.
pub fn mgmu_vars<'t>(
    tape: &'t Tape,
    x1: Var<'t>,
    x2: Var<'t>,
    w1: Var<'t>,
    w2: Var<'t>,
    wz: Var<'t>,
    variant: MgmuVariant,
) -> Result<MgmuParts<'t>> {
    let h1 = w1.matmul(x1)?.tanh();
    let h2 = w2.matmul(x2)?.tanh();
    let joint = tape.concat(&[x1, x2], 0)?;
    let z = wz.matmul(joint)?.sigmoid();
    if h1.shape() != h2.shape() || z.shape() != h1.shape() {
        return Err(Error::shape("mgmu (W1 vs W2 vs Wz rows)", &h1.shape(), &z.shape()));
    }
    let h = match variant {
        MgmuVariant::AsWritten => z.mul(h1)?.add(z.mul(h2)?)?,
        MgmuVariant::Complementary => {
            let ones = tape.leaf(Tensor::full(&z.shape(), 1.0));
            z.mul(h1)?.add(ones.sub(z)?.mul(h2)?)?
        }
    };
    Ok(MgmuParts { h1, h2, z, h })
}

/// Stand-alone unit weights.
#[derive(Clone, Debug, PartialEq)]
pub struct MgmuParams {
    pub w1: Tensor,
    pub w2: Tensor,
    pub wz: Tensor,
    pub variant: MgmuVariant,
}

impl MgmuParams {
    /// `(d1, d2, d_h)`, after checking the three matrices agree.
    pub fn dims(&self) -> Result<(usize, usize, usize)> {
        let (&[dh1, d1], &[dh2, d2], &[dhz, dz]) = (self.w1.shape(), self.w2.shape(), self.wz.shape()) else {
            return Err(Error::invalid("mGMU weights must be matrices"));
        };
        if dh1 != dh2 || dh1 != dhz || dz != d1 + d2 {
            return Err(Error::shape("mgmu params", self.w1.shape(), self.wz.shape()));
        }
        Ok((d1, d2, dh1))
    }

    /// `h` for concrete inputs.
    pub fn forward(&self, x1: &Tensor, x2: &Tensor) -> Result<Tensor> {
        let (d1, d2, _) = self.dims()?;
        if x1.shape() != [d1] || x2.shape() != [d2] {
            return Err(Error::shape("mgmu inputs", x1.shape(), x2.shape()));
        }
        let tape = Tape::new();
        let parts = mgmu_vars(
            &tape,
            tape.leaf(x1.clone()),
            tape.leaf(x2.clone()),
            tape.leaf(self.w1.clone()),
            tape.leaf(self.w2.clone()),
            tape.leaf(self.wz.clone()),
            self.variant,
        )?;
        Ok(parts.h.to_tensor())
    }
}

/// A unit whose weights live in a [`ModelParams`].
#[derive(Clone, Debug)]
pub struct MgmuUnit {
    pub w1: ParamId,
    pub w2: ParamId,
    pub wz: ParamId,
    pub variant: MgmuVariant,
    pub d_h: usize,
}

impl MgmuUnit {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ModelParams,
        name: &str,
        d1: usize,
        d2: usize,
        d_h: usize,
        variant: MgmuVariant,
        rng: &mut R,
    ) -> Self {
        let w1 = params.add(format!("{name}.W1"), glorot_uniform(&[d_h, d1], d1, d_h, rng));
        let w2 = params.add(format!("{name}.W2"), glorot_uniform(&[d_h, d2], d2, d_h, rng));
        let wz = params.add(format!("{name}.Wz"), glorot_uniform(&[d_h, d1 + d2], d1 + d2, d_h, rng));
        Self { w1, w2, wz, variant, d_h }
    }

    pub fn forward<'t>(&self, tape: &'t Tape, p: &Bound<'t>, x1: Var<'t>, x2: Var<'t>) -> Result<MgmuParts<'t>> {
        mgmu_vars(tape, x1, x2, p[self.w1], p[self.w2], p[self.wz], self.variant)
    }
}
