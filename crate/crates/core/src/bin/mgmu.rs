use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use mgmu::metrics::EvalReport;
use mgmu::models::MgmuVariant;
use mgmu::pipeline::{
    cmd_ablate, cmd_eval, cmd_features, cmd_grid, cmd_metrics, cmd_params, cmd_synth, cmd_train, split_name,
    write_reports, Dataset, ModelKind, RunConfig,
};
use mgmu::synth::Split;

#[derive(Parser)]
#[command(name = "mgmu", version, about = "Multimodal fusion pipeline over a synthetic cohort")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run config; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override `max_epochs` of every training stage.
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    variant: Option<MgmuVariant>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort into `--out`.
    Synth {
        /// Total subjects, spread evenly over the three classes.
        #[arg(long)]
        subjects: Option<usize>,
    },
    /// Segment the series and compute correlation features and text grids.
    Features {
        dataset: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Train one model and install its checkpoint in the dataset.
    Train { dataset: PathBuf, model: ModelKind },
    /// Evaluate an installed (or explicit) checkpoint on one split.
    Eval {
        dataset: PathBuf,
        model: ModelKind,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Late vs intermediate fusion, with and without gated units.
    Ablate { dataset: PathBuf },
    /// Grid search over optimiser settings.
    Grid { dataset: PathBuf, model: ModelKind },
    /// Per-class and weighted F1 of a confusion matrix such as "[[6,2,0],[2,5,2],[1,1,4]]".
    Metrics { matrix: String },
    /// Trainable parameter counts of every model.
    Params,
    /// Print the fully resolved config.
    Config,
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
        None => RunConfig::default(),
    };
    if let Some(e) = common.epochs {
        cfg.train.set_max_epochs(e);
    }
    if let Some(v) = common.variant {
        cfg.model.fusion.variant = v;
    }
    Ok(cfg)
}

fn main() -> std::process::ExitCode {
    match run(Cli::parse()) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let c = &cli.common;
    let mut cfg = load_config(c)?;
    let out = c.out.as_deref();
    match cli.command {
        Command::Synth { subjects } => {
            if let Some(seed) = c.seed {
                cfg.data.cohort.seed = seed;
            }
            if let Some(n) = subjects {
                cfg.data.cohort = cfg.data.cohort.with_subject_total(n);
            }
            let out = out.context("synth needs --out <dir>")?;
            let m = cmd_synth(&cfg, out)?;
            println!(
                "{} subjects, {} sessions -> {} (split {}/{}/{}, hash {})",
                m.subjects.len(),
                m.sessions.len(),
                out.display(),
                m.splits.train.len(),
                m.splits.val.len(),
                m.splits.test.len(),
                &m.split_hash[..12]
            );
        }
        Command::Features { dataset, force } => {
            let s = cmd_features(&dataset, &cfg, force)?;
            let what = if s.computed { "computed" } else { "up to date" };
            println!("{what}: {} sessions, {} audio and {} video segments", s.sessions, s.audio_segments, s.video_segments);
        }
        Command::Train { dataset, model } => {
            if let Some(seed) = c.seed {
                cfg.train.seed = seed;
            }
            let run = cmd_train(&dataset, model, &cfg, out)?;
            for l in &run.logs {
                let best = l.log.best_epoch().map(|r| (r.epoch, r.val_loss));
                println!("{}: {} epochs, best {:?}", l.stage, l.log.epochs.len(), best);
            }
            println!("run: {}\ncheckpoint: {}", run.run_dir.display(), run.installed.display());
        }
        Command::Eval { dataset, model, split, checkpoint } => {
            if let Some(seed) = c.seed {
                cfg.eval.seed = seed;
            }
            let ds = Dataset::open(&dataset)?;
            let ckpt = checkpoint.unwrap_or_else(|| ds.checkpoint_dir(model.as_str()));
            let report = cmd_eval(&ckpt, &dataset, split, &cfg)?;
            let dir = out.map(Path::to_path_buf).unwrap_or_else(|| dataset.join("reports"));
            write_reports(&dir, &format!("eval-{}-{}", model.as_str(), split_name(split)), &[report.clone()])?;
            print!("{}", EvalReport::table(&[report]));
        }
        Command::Ablate { dataset } => {
            if let Some(seed) = c.seed {
                cfg.ablation.seeds = vec![seed];
            }
            print!("{}", cmd_ablate(&dataset, &cfg, out)?.table());
        }
        Command::Grid { dataset, model } => {
            if let Some(seed) = c.seed {
                cfg.train.seed = seed;
            }
            for row in cmd_grid(&dataset, model, &cfg, out)?.iter().take(5) {
                println!(
                    "#{} lr={} patience={} stop={} factor={} seg={:?}: F1 {:.4}, loss {:.4}",
                    row.rank,
                    row.cell.lr,
                    row.cell.lr_patience,
                    row.cell.early_stop,
                    row.cell.factor,
                    row.cell.segment_seconds,
                    row.val_weighted_f1,
                    row.val_loss
                );
            }
        }
        Command::Metrics { matrix } => print!("{}", cmd_metrics(&matrix)?),
        Command::Config => println!("{}", cfg.to_json()),
        Command::Params => {
            for (name, n) in cmd_params(&cfg) {
                println!("{name:<18} {n:>9}");
            }
        }
    }
    Ok(())
}
