//! The pipeline commands: synth, features, train, eval, ablate, grid and
//! metrics. Each returns its primary artifact and writes it to disk.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::dataset::{split_hash, Dataset, FeatureSummary, Manifest, Needs, SessionFeatures};
use super::stages::{train_late_mgmu, train_multimodal, train_unimodal, ModelKind, StageLog, Trained};
use crate::error::{Error, Result};
use crate::features::Modality;
use crate::metrics::{per_class, weighted_f1, ConfusionMatrix, EvalReport, CLASS_NAMES};
use crate::models::{late_mean, predict_proba, FusionKind};
use crate::synth::{Split, Splits};
use crate::tensor::Tensor;
use crate::train::{grid_search, write_grid_csv, GridRow};

pub fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let manifest = super::dataset::synthesize(&cfg.data, out)?;
    fs::write(out.join("config.json"), cfg.to_json() + "\n")?;
    Ok(manifest)
}

pub fn cmd_features(dataset: &Path, cfg: &RunConfig, force: bool) -> Result<FeatureSummary> {
    Dataset::open(dataset)?.extract_features(&cfg.features, force)
}

/// Artifacts of one `train` invocation.
#[derive(Clone, Debug)]
pub struct TrainRun {
    pub run_dir: PathBuf,
    pub installed: PathBuf,
    pub trained: Trained,
    pub logs: Vec<StageLog>,
}

fn timestamp_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

fn fresh_run_dir(parent: &Path, stem: &str) -> Result<PathBuf> {
    let ts = timestamp_ms();
    for k in 0.. {
        let dir = parent.join(if k == 0 { format!("{stem}-{ts}") } else { format!("{stem}-{ts}-{k}") });
        if !dir.exists() {
            fs::create_dir_all(&dir)?;
            return Ok(dir);
        }
    }
    unreachable!()
}

fn load_checkpoint(ds: &Dataset, kind: ModelKind) -> Result<Trained> {
    let dir = ds.checkpoint_dir(kind.as_str());
    if !dir.join("manifest.json").exists() {
        return Err(Error::Missing(format!(
            "{} checkpoint at {}; run `train {}` first",
            kind.as_str(),
            dir.display(),
            kind.as_str()
        )));
    }
    Trained::load(&dir)
}

fn needs(kind: ModelKind) -> Needs {
    match kind {
        ModelKind::Audio => Needs { audio: true, ..Needs::default() },
        ModelKind::Video => Needs { video: true, ..Needs::default() },
        ModelKind::Text => Needs { text: true, ..Needs::default() },
        ModelKind::Multimodal => Needs::ALL,
    }
}

/// Trains one model kind, writes a timestamped run directory under `out`
/// (default `<dataset>/runs`) with the resolved config, per-stage logs and
/// the checkpoint, and installs the checkpoint as
/// `<dataset>/checkpoints/<kind>`.
pub fn cmd_train(dataset: &Path, kind: ModelKind, cfg: &RunConfig, out: Option<&Path>) -> Result<TrainRun> {
    cfg.validate()?;
    let ds = Dataset::open(dataset)?;
    let frozen = if kind == ModelKind::Multimodal {
        Some((load_checkpoint(&ds, ModelKind::Audio)?, load_checkpoint(&ds, ModelKind::Video)?))
    } else {
        None
    };
    let train_set = ds.load_features(Split::Train, needs(kind))?;
    let val_set = ds.load_features(Split::Val, needs(kind))?;
    let (trained, logs) = match &frozen {
        Some((a, v)) => train_multimodal(cfg, FusionKind::Mgmu, a, v, &train_set, &val_set)?,
        None => train_unimodal(kind, cfg, &train_set, &val_set)?,
    };
    let parent = out.map(Path::to_path_buf).unwrap_or_else(|| ds.root.join("runs"));
    let run_dir = fresh_run_dir(&parent, kind.as_str())?;
    fs::write(run_dir.join("config.json"), cfg.to_json() + "\n")?;
    for l in &logs {
        l.log.write_jsonl(run_dir.join(format!("log-{}.jsonl", l.stage)))?;
    }
    trained.save(&run_dir.join("checkpoint"))?;
    let installed = ds.checkpoint_dir(kind.as_str());
    trained.save(&installed)?;
    Ok(TrainRun { run_dir, installed, trained, logs })
}

fn truth(sessions: &[SessionFeatures]) -> Vec<usize> {
    sessions.iter().map(|s| s.record.label()).collect()
}

/// Evaluates a checkpoint directory on one split.
pub fn cmd_eval(checkpoint: &Path, dataset: &Path, split: Split, cfg: &RunConfig) -> Result<EvalReport> {
    let ds = Dataset::open(dataset)?;
    let trained = Trained::load(checkpoint)?;
    let sessions = ds.load_features(split, needs(trained.meta().kind))?;
    if sessions.is_empty() {
        return Err(Error::Missing(format!("sessions in the {split:?} split")));
    }
    let probs = trained.predict(&sessions)?;
    EvalReport::build(
        trained.meta().kind.as_str(),
        split_name(split),
        &truth(&sessions),
        &probs,
        trained.meta().config.model.classes,
        &cfg.eval,
    )
}

pub fn split_name(split: Split) -> &'static str {
    match split {
        Split::Train => "train",
        Split::Val => "val",
        Split::Test => "test",
    }
}

/// Writes `<stem>.json` and `<stem>.txt` (Table-2 layout) into `dir`.
pub fn write_reports(dir: &Path, stem: &str, reports: &[EvalReport]) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(reports)? + "\n")?;
    fs::write(dir.join(format!("{stem}.txt")), EvalReport::table(reports))?;
    Ok(())
}

/// One configuration of the fusion ablation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub model: String,
    /// Median over the training seeds.
    pub weighted_f1: f64,
    pub weighted_auc: f64,
    /// CI of the seed whose F1 is the (lower) median.
    pub ci: [f64; 2],
    pub per_seed_f1: Vec<f64>,
    pub split_hash: String,
    pub reports: Vec<EvalReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

pub const ABLATION_ROWS: [&str; 4] = ["L-F without mGMU", "L-F with mGMU", "I-F without mGMU", "I-F with mGMU"];

fn median_index(values: &[f64]) -> usize {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx[(values.len() - 1) / 2]
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Subject partition actually handed to a run.
fn used_split_hash(parts: [&[SessionFeatures]; 3]) -> String {
    let ids = |p: &[SessionFeatures]| {
        let mut v: Vec<String> = p.iter().map(|s| s.record.subject.clone()).collect();
        v.sort();
        v.dedup();
        v
    };
    split_hash(&Splits { train: ids(parts[0]), val: ids(parts[1]), test: ids(parts[2]) })
}

impl AblationReport {
    pub fn table(&self) -> String {
        let mut out = format!("{:<20} {:>11} {:>17} {:>8}\n", "Fusion", "Weighted F1", "95% CI for F1", "AUC-ROC");
        for r in &self.rows {
            out.push_str(&format!(
                "{:<20} {:>11.4} {:>17} {:>8.4}\n",
                r.model,
                r.weighted_f1,
                format!("[{:.4},{:.4}]", r.ci[0], r.ci[1]),
                r.weighted_auc
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["model", "weighted_f1", "ci_low", "ci_high", "weighted_auc", "seeds", "split_hash"])?;
        for r in &self.rows {
            w.write_record([
                r.model.clone(),
                format!("{:.6}", r.weighted_f1),
                format!("{:.6}", r.ci[0]),
                format!("{:.6}", r.ci[1]),
                format!("{:.6}", r.weighted_auc),
                r.per_seed_f1.len().to_string(),
                r.split_hash.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Rank of `model` by weighted F1 (1 = best; ties share the better rank).
    pub fn rank_of(&self, model: &str) -> Option<usize> {
        let f1 = self.rows.iter().find(|r| r.model == model)?.weighted_f1;
        Some(1 + self.rows.iter().filter(|r| r.weighted_f1 > f1).count())
    }
}

/// Late and intermediate fusion, each with and without gated units, on
/// identical splits. Requires the audio, video and text checkpoints.
pub fn cmd_ablate(dataset: &Path, cfg: &RunConfig, out: Option<&Path>) -> Result<AblationReport> {
    cfg.validate()?;
    let ds = Dataset::open(dataset)?;
    let audio = load_checkpoint(&ds, ModelKind::Audio)?;
    let video = load_checkpoint(&ds, ModelKind::Video)?;
    let text = load_checkpoint(&ds, ModelKind::Text)?;
    let train_set = ds.load_features(Split::Train, Needs::ALL)?;
    let val_set = ds.load_features(Split::Val, Needs::ALL)?;
    let test_set = ds.load_features(Split::Test, Needs::ALL)?;
    let hash = used_split_hash([&train_set, &val_set, &test_set]);
    let test_truth = truth(&test_set);
    let k = cfg.model.classes;

    let unimodal = |sessions: &[SessionFeatures]| -> Result<Vec<[Tensor; 3]>> {
        let [a, v, t] = [&audio, &video, &text].map(|m| m.predict(sessions));
        let (a, v, t) = (a?, v?, t?);
        Ok((0..sessions.len())
            .map(|i| [Tensor::vector(a[i].clone()), Tensor::vector(v[i].clone()), Tensor::vector(t[i].clone())])
            .collect())
    };
    let val_preds = unimodal(&val_set)?;
    let test_preds = unimodal(&test_set)?;

    let mut reports: Vec<Vec<EvalReport>> = vec![Vec::new(); 4];
    for &seed in &cfg.ablation.seeds {
        let mut run_cfg = cfg.clone();
        run_cfg.train.seed = seed;
        let eval = |name: &str, probs: &[Vec<f64>]| EvalReport::build(name, "test", &test_truth, probs, k, &cfg.eval);

        let mean: Vec<Vec<f64>> = test_preds.iter().map(|p| Ok(late_mean(p)?.data().to_vec())).collect::<Result<_>>()?;
        reports[0].push(eval(ABLATION_ROWS[0], &mean)?);

        let (net, params, _) = train_late_mgmu(&run_cfg, &val_preds, &val_set)?;
        let gated: Vec<Vec<f64>> = test_preds.iter().map(|p| predict_proba(&net, &params, p)).collect::<Result<_>>()?;
        reports[1].push(eval(ABLATION_ROWS[1], &gated)?);

        for (row, fusion) in [(2, FusionKind::Concat), (3, FusionKind::Mgmu)] {
            let (model, _) = train_multimodal(&run_cfg, fusion, &audio, &video, &train_set, &val_set)?;
            reports[row].push(eval(ABLATION_ROWS[row], &model.predict(&test_set)?)?);
        }
    }
    let rows = reports
        .into_iter()
        .zip(ABLATION_ROWS)
        .map(|(reps, name)| {
            let f1: Vec<f64> = reps.iter().map(|r| r.weighted_f1).collect();
            let auc: Vec<f64> = reps.iter().map(|r| r.weighted_auc).collect();
            AblationRow {
                model: name.to_string(),
                weighted_f1: median(&f1),
                weighted_auc: median(&auc),
                ci: reps[median_index(&f1)].ci,
                per_seed_f1: f1,
                split_hash: hash.clone(),
                reports: reps,
            }
        })
        .collect();
    let report = AblationReport { rows };
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| ds.root.join("ablation"));
    fs::create_dir_all(&dir)?;
    report.write_csv(&dir.join("ablation.csv"))?;
    fs::write(dir.join("ablation.txt"), report.table())?;
    fs::write(dir.join("ablation.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    Ok(report)
}

/// Grid search over the optimiser settings (and, for the segment models,
/// the window length), ranked by validation weighted F1.
pub fn cmd_grid(dataset: &Path, kind: ModelKind, cfg: &RunConfig, out: Option<&Path>) -> Result<Vec<GridRow>> {
    cfg.validate()?;
    let ds = Dataset::open(dataset)?;
    let modality = kind.modality();
    let spec = if modality.is_some() { cfg.train.grid.clone() } else { cfg.train.grid.without_segments() };
    let frozen = if kind == ModelKind::Multimodal {
        Some((load_checkpoint(&ds, ModelKind::Audio)?, load_checkpoint(&ds, ModelKind::Video)?))
    } else {
        None
    };
    let stored_train = ds.load_features(Split::Train, needs(kind))?;
    let stored_val = ds.load_features(Split::Val, needs(kind))?;
    let k = cfg.model.classes;

    let rows = grid_search(&spec, &cfg.train.session, |cell, _| {
        let mut run_cfg = cfg.clone();
        for stage in [
            &mut run_cfg.train.segment,
            &mut run_cfg.train.session,
            &mut run_cfg.train.text,
            &mut run_cfg.train.multimodal,
        ] {
            *stage = cell.apply(stage);
        }
        let (train_set, val_set) = match (modality, cell.segment_seconds) {
            (Some(m), Some(window)) => {
                let resegment = |sessions: &[SessionFeatures]| -> Result<Vec<SessionFeatures>> {
                    sessions
                        .iter()
                        .map(|s| {
                            let mut spec = match m {
                                Modality::Audio => cfg.features.audio.clone(),
                                Modality::Video => cfg.features.video.clone(),
                            };
                            spec.window_s = window;
                            let segs = ds.segment_fvtcs(&s.record, m, &spec, cfg.features.estimator)?;
                            let mut s = s.clone();
                            match m {
                                Modality::Audio => s.audio = segs,
                                Modality::Video => s.video = segs,
                            }
                            Ok(s)
                        })
                        .collect()
                };
                (resegment(&stored_train)?, resegment(&stored_val)?)
            }
            _ => (stored_train.clone(), stored_val.clone()),
        };
        let trained = match &frozen {
            Some((a, v)) => train_multimodal(&run_cfg, FusionKind::Mgmu, a, v, &train_set, &val_set)?.0,
            None => train_unimodal(kind, &run_cfg, &train_set, &val_set)?.0,
        };
        let probs = trained.predict(&val_set)?;
        let report = EvalReport::build(kind.as_str(), "val", &truth(&val_set), &probs, k, &crate::metrics::EvalOptions {
            bootstrap_replicates: 1,
            ..cfg.eval.clone()
        })?;
        let loss = probs
            .iter()
            .zip(&val_set)
            .map(|(p, s)| -p[s.record.label()].max(f64::MIN_POSITIVE).ln())
            .sum::<f64>()
            / probs.len().max(1) as f64;
        Ok((report.weighted_f1, loss))
    })?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| ds.root.join("grid"));
    fs::create_dir_all(&dir)?;
    write_grid_csv(&rows, dir.join(format!("grid-{}.csv", kind.as_str())))?;
    Ok(rows)
}

/// Per-class precision, recall and F1 plus the weighted F1 of a
/// bracket-format confusion matrix.
pub fn cmd_metrics(matrix: &str) -> Result<String> {
    let m = ConfusionMatrix::parse(matrix)?;
    let (_, wf1) = weighted_f1(&m)?;
    let mut out = format!("{:<8} {:>9} {:>9} {:>9} {:>8}\n", "Class", "Precision", "Recall", "F1", "Support");
    for (i, c) in per_class(&m).iter().enumerate() {
        let name = CLASS_NAMES.get(i).map(|s| s.to_string()).unwrap_or_else(|| format!("class{i}"));
        out.push_str(&format!("{:<8} {:>9.4} {:>9.4} {:>9.4} {:>8}\n", name, c.precision, c.recall, c.f1, c.support));
    }
    out.push_str(&format!("Weighted F1: {wf1:.4}\n"));
    Ok(out)
}

/// Trainable parameters of every model under `cfg`, for the default
/// channel counts, delays and word-vector width.
pub fn cmd_params(cfg: &RunConfig) -> Vec<(String, usize)> {
    use crate::models::{LateMgmuNet, MultimodalNet, StsCnn, TextNet};
    let mut rng = crate::rng::derived(0, "params.report");
    let f = &cfg.features;
    let sts = |m: Modality, d: usize, rng: &mut crate::rng::SeededRng| {
        let c = m.default_channels();
        StsCnn::new(&cfg.model, c * c, d + 1, rng).1.parameter_count()
    };
    let dim = cfg.data.cohort.embedding_dim;
    vec![
        ("audio".into(), sts(Modality::Audio, f.audio.max_delay, &mut rng)),
        ("video".into(), sts(Modality::Video, f.video.max_delay, &mut rng)),
        ("text".into(), TextNet::new(&cfg.model.text, dim, cfg.model.classes, &mut rng).1.parameter_count()),
        (
            "multimodal".into(),
            MultimodalNet::new(&cfg.model, FusionKind::Mgmu, cfg.model.segment.embedding, dim, &mut rng)
                .1
                .parameter_count(),
        ),
        (
            "multimodal-concat".into(),
            MultimodalNet::new(&cfg.model, FusionKind::Concat, cfg.model.segment.embedding, dim, &mut rng)
                .1
                .parameter_count(),
        ),
        (
            "late-mgmu".into(),
            LateMgmuNet::new(cfg.model.classes, cfg.model.fusion.late_d_h, cfg.model.fusion.variant, &mut rng)
                .1
                .parameter_count(),
        ),
    ]
}
