//! Training stages and checkpoints for the unimodal, multimodal and
//! late-fusion models.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::dataset::SessionFeatures;
use crate::error::{Error, Result};
use crate::features::Modality;
use crate::models::{
    predict_proba, FusionKind, LateMgmuNet, MultimodalInput, MultimodalNet, SegmentStack, StsCnn, TextNet,
};
use crate::nn::{CheckpointManifest, ModelParams};
use crate::rng::derived;
use crate::tensor::Tensor;
use crate::train::{class_weights, train, Example, TrainConfig, TrainLog};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Audio,
    Video,
    Text,
    Multimodal,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Audio => "audio",
            ModelKind::Video => "video",
            ModelKind::Text => "text",
            ModelKind::Multimodal => "multimodal",
        }
    }

    pub fn modality(self) -> Option<Modality> {
        match self {
            ModelKind::Audio => Some(Modality::Audio),
            ModelKind::Video => Some(Modality::Video),
            _ => None,
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "audio" => Ok(ModelKind::Audio),
            "video" => Ok(ModelKind::Video),
            "text" => Ok(ModelKind::Text),
            "multimodal" => Ok(ModelKind::Multimodal),
            _ => Err(format!("unknown model `{s}` (expected audio, video, text or multimodal)")),
        }
    }
}

/// What a checkpoint needs to rebuild its network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub kind: ModelKind,
    pub fusion: Option<FusionKind>,
    /// `C²` and `D+1` of the correlation input, or zero.
    pub in_channels: usize,
    pub delays: usize,
    pub text_dim: usize,
    pub config: RunConfig,
}

/// A trained network with its parameters.
#[derive(Clone, Debug)]
pub enum Trained {
    Sts {
        modality: Modality,
        net: StsCnn,
        params: ModelParams,
        meta: CheckpointMeta,
    },
    Text {
        net: TextNet,
        params: ModelParams,
        meta: CheckpointMeta,
    },
    Multimodal {
        net: MultimodalNet,
        params: ModelParams,
        meta: CheckpointMeta,
        audio: Box<Trained>,
        video: Box<Trained>,
    },
}

fn segments(s: &SessionFeatures, modality: Modality) -> &[Tensor] {
    match modality {
        Modality::Audio => &s.audio,
        Modality::Video => &s.video,
    }
}

fn grid(s: &SessionFeatures) -> Result<&crate::features::TextGrid> {
    s.text.as_ref().ok_or_else(|| Error::Missing(format!("text grid of session {}", s.record.id)))
}

fn weights_for(labels: impl Iterator<Item = usize>, classes: usize) -> Result<Tensor> {
    let mut counts = vec![0; classes];
    for l in labels {
        counts[l] += 1;
    }
    class_weights(&counts)
}

fn weights_of<I>(examples: &[Example<I>], classes: usize) -> Result<Tensor> {
    weights_for(examples.iter().map(|e| e.label), classes)
}

impl Trained {
    pub fn meta(&self) -> &CheckpointMeta {
        match self {
            Trained::Sts { meta, .. } | Trained::Text { meta, .. } | Trained::Multimodal { meta, .. } => meta,
        }
    }

    pub fn params(&self) -> &ModelParams {
        match self {
            Trained::Sts { params, .. } | Trained::Text { params, .. } | Trained::Multimodal { params, .. } => params,
        }
    }

    /// Stacked frozen segment embeddings of one session (`N × E`).
    pub fn embed_session(&self, s: &SessionFeatures) -> Result<Tensor> {
        match self {
            Trained::Sts { modality, net, params, .. } => Ok(net.stack(params, segments(s, *modality))?.embeddings),
            _ => Err(Error::invalid("only segment models produce session embeddings")),
        }
    }

    fn multimodal_input(audio: &Trained, video: &Trained, s: &SessionFeatures) -> Result<MultimodalInput> {
        Ok(MultimodalInput {
            audio: audio.embed_session(s)?,
            video: video.embed_session(s)?,
            text: grid(s)?.clone(),
        })
    }

    /// Class probabilities per session.
    pub fn predict(&self, sessions: &[SessionFeatures]) -> Result<Vec<Vec<f64>>> {
        sessions
            .iter()
            .map(|s| match self {
                Trained::Sts { net, params, .. } => {
                    predict_proba(&net.session, params, &SegmentStack::new(self.embed_session(s)?)?)
                }
                Trained::Text { net, params, .. } => predict_proba(net, params, grid(s)?),
                Trained::Multimodal { net, params, audio, video, .. } => {
                    predict_proba(net, params, &Self::multimodal_input(audio, video, s)?)
                }
            })
            .collect()
    }

    /// Writes the parameters and metadata; a multimodal checkpoint also
    /// carries copies of its frozen audio and video models.
    pub fn save(&self, dir: &Path) -> Result<()> {
        if dir.exists() {
            fs::remove_dir_all(dir)?;
        }
        let meta = self.meta();
        let variant = Some(meta.config.model.fusion.variant.as_str().to_string());
        let manifest = CheckpointManifest::new(serde_json::to_value(meta)?, variant, meta.config.train.seed);
        self.params().save_checkpoint(dir, &manifest)?;
        if let Trained::Multimodal { audio, video, .. } = self {
            audio.save(&dir.join("audio"))?;
            video.save(&dir.join("video"))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let (loaded, manifest) = ModelParams::load_checkpoint(dir)?;
        let meta: CheckpointMeta = serde_json::from_value(manifest.config)?;
        let cfg = &meta.config.model;
        let mut rng = derived(0, "checkpoint.rebuild");
        Ok(match meta.kind {
            ModelKind::Audio | ModelKind::Video => {
                let (net, mut params) = StsCnn::new(cfg, meta.in_channels, meta.delays, &mut rng);
                params.load_values_from(&loaded)?;
                let modality = meta.kind.modality().expect("segment model");
                Trained::Sts { modality, net, params, meta }
            }
            ModelKind::Text => {
                let (net, mut params) = TextNet::new(&cfg.text, meta.text_dim, cfg.classes, &mut rng);
                params.load_values_from(&loaded)?;
                Trained::Text { net, params, meta }
            }
            ModelKind::Multimodal => {
                let audio = Box::new(Self::load(&dir.join("audio"))?);
                let video = Box::new(Self::load(&dir.join("video"))?);
                let kind = meta.fusion.unwrap_or_default();
                let embedding = cfg.segment.embedding;
                let (net, mut params) = MultimodalNet::new(cfg, kind, embedding, meta.text_dim, &mut rng);
                params.load_values_from(&loaded)?;
                Trained::Multimodal { net, params, meta, audio, video }
            }
        })
    }
}

/// Log of one optimisation stage.
#[derive(Clone, Debug)]
pub struct StageLog {
    pub stage: &'static str,
    pub log: TrainLog,
}

fn session_examples<I>(sessions: &[SessionFeatures], input: impl Fn(&SessionFeatures) -> Result<I>) -> Result<Vec<Example<I>>> {
    sessions
        .iter()
        .map(|s| Ok(Example { input: input(s)?, label: s.record.label(), subject: s.record.subject.clone() }))
        .collect()
}

fn fit<M: crate::models::Classifier>(
    stage: &'static str,
    model: &M,
    params: &mut ModelParams,
    train_set: &[Example<M::Input>],
    val_set: &[Example<M::Input>],
    classes: usize,
    cfg: &TrainConfig,
    logs: &mut Vec<StageLog>,
) -> Result<()> {
    let weights = weights_of(train_set, classes)?;
    let out = train(model, params, train_set, val_set, &weights, cfg)?;
    logs.push(StageLog { stage, log: out.log });
    Ok(())
}

/// Trains an audio, video or text model on the given sessions.
pub fn train_unimodal(
    kind: ModelKind,
    cfg: &RunConfig,
    train_set: &[SessionFeatures],
    val_set: &[SessionFeatures],
) -> Result<(Trained, Vec<StageLog>)> {
    let classes = cfg.model.classes;
    let mut rng = derived(cfg.train.seed, &format!("init.{}", kind.as_str()));
    let mut logs = Vec::new();
    let base = cfg.clone();
    match kind {
        ModelKind::Audio | ModelKind::Video => {
            let modality = kind.modality().expect("segment model");
            let first = train_set
                .iter()
                .find_map(|s| segments(s, modality).first())
                .ok_or_else(|| Error::invalid(format!("no {} segments in the training split", kind.as_str())))?;
            let (in_channels, delays) = (first.shape()[0], first.shape()[1]);
            let (net, mut params) = StsCnn::new(&cfg.model, in_channels, delays, &mut rng);

            let seg_examples = |sessions: &[SessionFeatures]| -> Vec<Example<Tensor>> {
                sessions
                    .iter()
                    .flat_map(|s| {
                        segments(s, modality).iter().map(|t| Example {
                            input: t.clone(),
                            label: s.record.label(),
                            subject: s.record.subject.clone(),
                        })
                    })
                    .collect()
            };
            let stage = cfg.train.stage(&cfg.train.segment, &format!("{}.segment", kind.as_str()));
            fit("segment", &net.segment, &mut params, &seg_examples(train_set), &seg_examples(val_set), classes, &stage, &mut logs)?;

            let stacks = |sessions: &[SessionFeatures]| session_examples(sessions, |s| net.stack(&params, segments(s, modality)));
            let (tr, va) = (stacks(train_set)?, stacks(val_set)?);
            let stage = cfg.train.stage(&cfg.train.session, &format!("{}.session", kind.as_str()));
            fit("session", &net.session, &mut params, &tr, &va, classes, &stage, &mut logs)?;
            let meta = CheckpointMeta { kind, fusion: None, in_channels, delays, text_dim: 0, config: base };
            Ok((Trained::Sts { modality, net, params, meta }, logs))
        }
        ModelKind::Text => {
            let tr = session_examples(train_set, |s| grid(s).cloned())?;
            let va = session_examples(val_set, |s| grid(s).cloned())?;
            let dim = tr.first().ok_or_else(|| Error::invalid("training split is empty"))?.input.dim;
            let (net, mut params) = TextNet::new(&cfg.model.text, dim, classes, &mut rng);
            let stage = cfg.train.stage(&cfg.train.text, "text");
            fit("text", &net, &mut params, &tr, &va, classes, &stage, &mut logs)?;
            let meta = CheckpointMeta { kind, fusion: None, in_channels: 0, delays: 0, text_dim: dim, config: base };
            Ok((Trained::Text { net, params, meta }, logs))
        }
        ModelKind::Multimodal => Err(Error::invalid("multimodal training needs the frozen audio and video models")),
    }
}

/// Trains the fusion network on frozen audio and video segment models.
pub fn train_multimodal(
    cfg: &RunConfig,
    fusion: FusionKind,
    audio: &Trained,
    video: &Trained,
    train_set: &[SessionFeatures],
    val_set: &[SessionFeatures],
) -> Result<(Trained, Vec<StageLog>)> {
    let input = |s: &SessionFeatures| Trained::multimodal_input(audio, video, s);
    let tr = session_examples(train_set, input)?;
    let va = session_examples(val_set, input)?;
    let first = tr.first().ok_or_else(|| Error::invalid("training split is empty"))?;
    let (embedding, text_dim) = (first.input.audio.shape()[1], first.input.text.dim);
    let mut rng = derived(cfg.train.seed, "init.multimodal");
    let (net, mut params) = MultimodalNet::new(&cfg.model, fusion, embedding, text_dim, &mut rng);
    let mut logs = Vec::new();
    let stage = cfg.train.stage(&cfg.train.multimodal, "multimodal");
    fit("multimodal", &net, &mut params, &tr, &va, cfg.model.classes, &stage, &mut logs)?;
    let meta = CheckpointMeta {
        kind: ModelKind::Multimodal,
        fusion: Some(fusion),
        in_channels: 0,
        delays: 0,
        text_dim,
        config: cfg.clone(),
    };
    let trained = Trained::Multimodal {
        net,
        params,
        meta,
        audio: Box::new(audio.clone()),
        video: Box::new(video.clone()),
    };
    Ok((trained, logs))
}

/// Late fusion by three gated units over the unimodal probabilities,
/// fitted on validation-split predictions.
pub fn train_late_mgmu(
    cfg: &RunConfig,
    preds: &[[Tensor; 3]],
    sessions: &[SessionFeatures],
) -> Result<(LateMgmuNet, ModelParams, TrainLog)> {
    let classes = cfg.model.classes;
    let examples: Vec<Example<[Tensor; 3]>> = preds
        .iter()
        .zip(sessions)
        .map(|(p, s)| Example { input: p.clone(), label: s.record.label(), subject: s.record.subject.clone() })
        .collect();
    let mut rng = derived(cfg.train.seed, "init.late");
    let (net, mut params) = LateMgmuNet::new(classes, cfg.model.fusion.late_d_h, cfg.model.fusion.variant, &mut rng);
    let stage = cfg.train.stage(&cfg.train.late, "late");
    let out = train(&net, &mut params, &examples, &[], &weights_of(&examples, classes)?, &stage)?;
    Ok((net, params, out.log))
}
