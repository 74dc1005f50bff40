//! The minimal gated unit on two small inputs: projections, gate and output
//! for both gate readings.

use mgmu::models::{mgmu_vars, MgmuVariant};
use mgmu::{Tape, Tensor};

fn main() -> mgmu::Result<()> {
    let x1 = Tensor::vector(vec![0.8, -0.3]);
    let x2 = Tensor::vector(vec![-0.5, 0.4, 0.9]);
    let w1 = Tensor::matrix(2, 2, vec![1.0, 0.5, -0.4, 1.2])?;
    let w2 = Tensor::matrix(2, 3, vec![0.3, -0.7, 0.2, 0.9, 0.1, -0.6])?;
    let wz = Tensor::matrix(2, 5, vec![2.0, 0.0, -1.0, 0.5, 0.0, -1.5, 1.0, 0.0, 0.0, 2.0])?;

    for variant in [MgmuVariant::Complementary, MgmuVariant::AsWritten] {
        let tape = Tape::new();
        let leaf = |t: &Tensor| tape.leaf(t.clone());
        let p = mgmu_vars(&tape, leaf(&x1), leaf(&x2), leaf(&w1), leaf(&w2), leaf(&wz), variant)?;
        println!("{variant:?}");
        println!("  h1 = {:?}", p.h1.to_tensor().data());
        println!("  h2 = {:?}", p.h2.to_tensor().data());
        println!("  z  = {:?}", p.z.to_tensor().data());
        println!("  h  = {:?}", p.h.to_tensor().data());
    }
    Ok(())
}
