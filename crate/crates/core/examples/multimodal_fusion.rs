//! The full staged pipeline: unimodal models first, then the intermediate
//! fusion network on their frozen audio and video stacks.

use std::path::Path;

use mgmu::metrics::EvalReport;
use mgmu::pipeline::{cmd_eval, cmd_features, cmd_synth, cmd_train, ModelKind, RunConfig};
use mgmu::synth::Split;

fn main() -> mgmu::Result<()> {
    let cfg = RunConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/tiny.json"))?;
    let dir = tempfile::tempdir()?;
    let root = dir.path().join("cohort");
    cmd_synth(&cfg, &root)?;
    cmd_features(&root, &cfg, false)?;

    let mut reports = Vec::new();
    for kind in [ModelKind::Audio, ModelKind::Video, ModelKind::Text, ModelKind::Multimodal] {
        let run = cmd_train(&root, kind, &cfg, None)?;
        reports.push(cmd_eval(&run.installed, &root, Split::Test, &cfg)?);
    }
    print!("{}", EvalReport::table(&reports));
    Ok(())
}
