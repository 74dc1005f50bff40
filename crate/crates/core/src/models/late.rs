//! Late fusion of three per-modality probability vectors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::MgmuVariant;
use super::mgmu::MgmuUnit;
use super::{Classifier, Mode};
use crate::error::{Error, Result};
use crate::nn::{Bound, Dense, ModelParams};
use crate::tensor::{Tape, Tensor, Var};

const SIMPLEX_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LateFusion {
    Mean,
    MgmuPairwise,
}

fn check_simplex(p: &Tensor) -> Result<()> {
    let s: f64 = p.data().iter().sum();
    if p.ndim() != 1 || (s - 1.0).abs() > SIMPLEX_TOLERANCE || p.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "late fusion input must be a probability vector (sum {s}, shape {:?})",
            p.shape()
        )));
    }
    Ok(())
}

/// Elementwise average of the three probability vectors.
pub fn late_mean(preds: &[Tensor; 3]) -> Result<Tensor> {
    for p in preds {
        check_simplex(p)?;
    }
    if preds[1].shape() != preds[0].shape() || preds[2].shape() != preds[0].shape() {
        return Err(Error::shape("late mean", preds[0].shape(), preds[1].shape()));
    }
    let data = (0..preds[0].len())
        .map(|i| preds.iter().map(|p| p.data()[i]).sum::<f64>() / 3.0)
        .collect();
    Ok(Tensor::vector(data))
}

/// Three gated units over the pairs (0,1), (0,2), (1,2), concatenated and
/// mapped to logits by one dense layer.
#[derive(Clone, Debug)]
pub struct LateMgmuNet {
    pub units: Vec<MgmuUnit>,
    out: Dense,
}

impl LateMgmuNet {
    pub fn new<R: Rng + ?Sized>(classes: usize, d_h: usize, variant: MgmuVariant, rng: &mut R) -> (Self, ModelParams) {
        let mut params = ModelParams::new();
        let units = ["late.av", "late.at", "late.vt"]
            .iter()
            .map(|name| MgmuUnit::new(&mut params, name, classes, classes, d_h, variant, rng))
            .collect();
        let out = Dense::new(&mut params, "late.out", 3 * d_h, classes, rng);
        (Self { units, out }, params)
    }
}

impl Classifier for LateMgmuNet {
    type Input = [Tensor; 3];

    fn logits<'t>(&self, tape: &'t Tape, p: &Bound<'t>, preds: &[Tensor; 3], _mode: &mut Mode<'_>) -> Result<Var<'t>> {
        for x in preds {
            check_simplex(x)?;
        }
        let xs: Vec<Var<'t>> = preds.iter().map(|x| tape.leaf(x.clone())).collect();
        let pairs = [(xs[0], xs[1]), (xs[0], xs[2]), (xs[1], xs[2])];
        let hs = self
            .units
            .iter()
            .zip(pairs)
            .map(|(u, (a, b))| Ok(u.forward(tape, p, a, b)?.h))
            .collect::<Result<Vec<_>>>()?;
        let fused = tape.concat(&hs, 0)?;
        self.out.forward(p, fused)
    }
}
