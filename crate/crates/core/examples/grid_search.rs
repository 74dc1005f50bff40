//! A small optimiser grid for the audio model, ranked by validation F1.

use std::path::Path;

use mgmu::pipeline::{cmd_features, cmd_grid, cmd_synth, ModelKind, RunConfig};
use mgmu::train::GridSpec;

fn main() -> mgmu::Result<()> {
    let mut cfg = RunConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/tiny.json"))?;
    cfg.train.grid = GridSpec {
        lr: vec![1e-3, 1e-4],
        lr_patience: vec![3],
        early_stop: vec![6],
        factor: vec![0.5],
        segment_seconds: vec![20.0, 40.0],
    };
    let dir = tempfile::tempdir()?;
    let root = dir.path().join("cohort");
    cmd_synth(&cfg, &root)?;
    cmd_features(&root, &cfg, false)?;
    for row in cmd_grid(&root, ModelKind::Audio, &cfg, None)? {
        println!(
            "#{} lr={:<6} segment={:?}s  val F1 {:.3}  val loss {:.4}",
            row.rank, row.cell.lr, row.cell.segment_seconds, row.val_weighted_f1, row.val_loss
        );
    }
    Ok(())
}
