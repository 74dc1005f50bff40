//! Audit reference confusion matrices and compute the other reported
//! quantities for a toy prediction set.

use mgmu::metrics::{ConfusionMatrix, EvalOptions, EvalReport};
use mgmu::pipeline::cmd_metrics;

fn main() -> mgmu::Result<()> {
    for (name, m) in [("audio", "[[6,2,0],[2,5,2],[1,2,3]]"), ("multimodal", "[[6,2,0],[2,5,2],[1,1,4]]")] {
        println!("== {name} {m}");
        print!("{}", cmd_metrics(m)?);
    }

    let m = ConfusionMatrix::parse("[[6,2,0],[2,5,2],[1,1,4]]")?;
    let mut truth = Vec::new();
    let mut probs = Vec::new();
    for (t, row) in m.counts.iter().enumerate() {
        for (p, &n) in row.iter().enumerate() {
            for _ in 0..n {
                truth.push(t);
                probs.push((0..3).map(|c| if c == p { 0.6 } else { 0.2 }).collect::<Vec<f64>>());
            }
        }
    }
    let report = EvalReport::build("multimodal", "test", &truth, &probs, 3, &EvalOptions::default())?;
    print!("\n{}", EvalReport::table(&[report]));
    Ok(())
}
