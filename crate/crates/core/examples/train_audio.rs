//! Synthesize the tiny cohort, extract features, train the audio
//! segment-to-session model and evaluate it on the held-out subjects.
//!
//! `cargo run --release --example train_audio [config.json]`

use std::path::{Path, PathBuf};

use mgmu::metrics::EvalReport;
use mgmu::pipeline::{cmd_eval, cmd_features, cmd_synth, cmd_train, ModelKind, RunConfig};
use mgmu::synth::Split;

fn main() -> mgmu::Result<()> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/tiny.json")
    });
    let cfg = RunConfig::load(&path)?;
    let dir = tempfile::tempdir()?;
    let root = dir.path().join("cohort");

    let manifest = cmd_synth(&cfg, &root)?;
    println!("{} sessions, split hash {}", manifest.sessions.len(), &manifest.split_hash[..12]);
    let summary = cmd_features(&root, &cfg, false)?;
    println!("{} audio segments", summary.audio_segments);

    let run = cmd_train(&root, ModelKind::Audio, &cfg, None)?;
    for stage in &run.logs {
        let best = stage.log.best_epoch().expect("at least one epoch");
        println!("{:<8} {} epochs, best val loss {:.4} at {}", stage.stage, stage.log.epochs.len(), best.val_loss, best.epoch);
    }
    let report = cmd_eval(&run.installed, &root, Split::Test, &cfg)?;
    print!("{}", EvalReport::table(&[report]));
    Ok(())
}
