//! Late vs intermediate fusion, with and without gated units, on one split.

use std::path::Path;

use mgmu::pipeline::{cmd_ablate, cmd_features, cmd_synth, cmd_train, ModelKind, RunConfig};

fn main() -> mgmu::Result<()> {
    let mut cfg = RunConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/tiny.json"))?;
    cfg.ablation.seeds = vec![0, 1, 2];
    let dir = tempfile::tempdir()?;
    let root = dir.path().join("cohort");
    cmd_synth(&cfg, &root)?;
    cmd_features(&root, &cfg, false)?;
    for kind in [ModelKind::Audio, ModelKind::Video, ModelKind::Text] {
        cmd_train(&root, kind, &cfg, None)?;
    }
    let report = cmd_ablate(&root, &cfg, None)?;
    print!("{}", report.table());
    for row in &report.rows {
        println!("{:<18} per-seed F1 {:?}", row.model, row.per_seed_f1);
    }
    println!("\n{}", std::fs::read_to_string(root.join("ablation/ablation.csv"))?);
    Ok(())
}
