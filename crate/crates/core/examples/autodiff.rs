//! Reverse-mode gradients on the tape, checked against a central difference.

use mgmu::tensor::Padding;
use mgmu::{Result, Tape, Tensor};

fn loss(x: &Tensor, w: &Tensor) -> Result<f64> {
    let tape = Tape::new();
    let y = tape.leaf(x.clone()).conv1d(tape.leaf(w.clone()), None, 2, Padding::Same)?;
    Ok(y.tanh().sum().to_tensor().item())
}

fn main() -> Result<()> {
    let x = Tensor::new(vec![2, 8], (0..16).map(|i| (i as f64 * 0.37).sin()).collect())?;
    let w = Tensor::new(vec![3, 2, 3], (0..18).map(|i| 0.1 * (i as f64 - 9.0)).collect())?;

    let tape = Tape::new();
    let wv = tape.param(w.clone());
    let y = tape.leaf(x.clone()).conv1d(wv, None, 2, Padding::Same)?.tanh().sum();
    tape.backward(y)?;
    let grad = tape.grad(wv).expect("parameter gradient");

    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..w.len() {
        let (mut plus, mut minus) = (w.clone(), w.clone());
        plus.data_mut()[i] += h;
        minus.data_mut()[i] -= h;
        let numeric = (loss(&x, &plus)? - loss(&x, &minus)?) / (2.0 * h);
        worst = worst.max((numeric - grad.data()[i]).abs());
    }
    println!("loss {:.6}", y.to_tensor().item());
    println!("dL/dw[0..6] = {:?}", &grad.data()[..6]);
    println!("max |analytic - numeric| = {worst:.2e}");
    Ok(())
}
