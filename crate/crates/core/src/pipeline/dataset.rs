use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{DataConfig, FeatureConfig, SegmentSpec};
use crate::error::{Error, Result};
use crate::features::sidecar::{read_fvtc, read_series, read_text_grid, write_fvtc, write_series, write_text_grid};
use crate::features::{
    compute_fvtc, default_stopwords, embed_text, segment_series, tokenize, ChannelSeries, CorrelationEstimator,
    EmbeddingTable, Modality, TextGrid, DEFAULT_PUNCTUATION,
};
use crate::synth::{embedding_table, generate_cohort, generate_session, split_subjects, Class, CohortSpec, Split, Splits, SubjectProfile};
use crate::tensor::Tensor;

pub const MANIFEST: &str = "manifest.json";
const FEATURE_STAMP: &str = "features/checksum.sha256";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub subject: String,
    pub class: Class,
    pub duration_s: f64,
    pub split: Split,
}

impl SessionRecord {
    pub fn label(&self) -> usize {
        self.class.index()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub spec: CohortSpec,
    pub split_ratios: [f64; 3],
    pub subjects: Vec<SubjectProfile>,
    pub sessions: Vec<SessionRecord>,
    pub splits: Splits,
    /// SHA-256 of the canonical JSON of `splits`.
    pub split_hash: String,
    pub embedding_words: String,
    pub embedding_vectors: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn split_hash(splits: &Splits) -> String {
    sha256_hex(serde_json::to_string(splits).expect("splits serialise").as_bytes())
}

/// Generates the cohort and writes it under `root`:
/// `manifest.json`, `embeddings/`, and `<subject>/<session>/{audio.tnsr,
/// video.tnsr, text.txt}`.
pub fn synthesize(cfg: &DataConfig, root: &Path) -> Result<Manifest> {
    let cohort = generate_cohort(&cfg.cohort)?;
    let roster: Vec<(String, Class)> = cohort.subjects.iter().map(|s| (s.id.clone(), s.class)).collect();
    let splits = split_subjects(&roster, cfg.split_ratios, cfg.cohort.seed)?;
    fs::create_dir_all(root).map_err(|e| Error::invalid(format!("cannot create {}: {e}", root.display())))?;

    let table = embedding_table(&cfg.cohort)?;
    fs::create_dir_all(root.join("embeddings"))?;
    fs::write(root.join("embeddings/words.txt"), table.words().join("\n") + "\n")?;
    table.vectors().save(root.join("embeddings/vectors.tnsr"))?;

    let mut sessions = Vec::with_capacity(cohort.sessions.len());
    for meta in &cohort.sessions {
        let data = generate_session(&cfg.cohort, meta)?;
        let dir = root.join(&meta.subject).join(&meta.id);
        fs::create_dir_all(&dir)?;
        for (modality, values) in [(Modality::Audio, data.audio), (Modality::Video, data.video)] {
            let series = ChannelSeries::with_defaults(modality, modality.default_frame_rate(), values)?;
            write_series(&dir.join(format!("{}.tnsr", modality.as_str())), &series)?;
        }
        fs::write(dir.join("text.txt"), data.text + "\n")?;
        sessions.push(SessionRecord {
            id: meta.id.clone(),
            subject: meta.subject.clone(),
            class: meta.class,
            duration_s: meta.duration_s,
            split: splits.split_of(&meta.subject).expect("every subject is split"),
        });
    }
    let manifest = Manifest {
        seed: cfg.cohort.seed,
        spec: cfg.cohort.clone(),
        split_ratios: cfg.split_ratios,
        subjects: cohort.subjects,
        sessions,
        split_hash: split_hash(&splits),
        splits,
        embedding_words: "embeddings/words.txt".into(),
        embedding_vectors: "embeddings/vectors.tnsr".into(),
    };
    fs::write(root.join(MANIFEST), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

/// An on-disk cohort.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: Manifest,
}

/// Features of one session as the models consume them.
#[derive(Clone, Debug)]
pub struct SessionFeatures {
    pub record: SessionRecord,
    pub audio: Vec<Tensor>,
    pub video: Vec<Tensor>,
    pub text: Option<TextGrid>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Needs {
    pub audio: bool,
    pub video: bool,
    pub text: bool,
}

impl Needs {
    pub const ALL: Needs = Needs { audio: true, video: true, text: true };
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureSummary {
    /// `false` when the checksum matched and nothing was recomputed.
    pub computed: bool,
    pub sessions: usize,
    pub audio_segments: usize,
    pub video_segments: usize,
}

impl Dataset {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let path = root.join(MANIFEST);
        if !path.exists() {
            return Err(Error::Missing(format!("dataset manifest {}", path.display())));
        }
        let manifest = serde_json::from_slice(&fs::read(&path)?)?;
        Ok(Self { root, manifest })
    }

    pub fn session_dir(&self, s: &SessionRecord) -> PathBuf {
        self.root.join(&s.subject).join(&s.id)
    }

    pub fn feature_dir(&self, s: &SessionRecord) -> PathBuf {
        self.root.join("features").join(&s.subject).join(&s.id)
    }

    pub fn checkpoint_dir(&self, kind: &str) -> PathBuf {
        self.root.join("checkpoints").join(kind)
    }

    pub fn sessions(&self, split: Split) -> Vec<&SessionRecord> {
        self.manifest.sessions.iter().filter(|s| s.split == split).collect()
    }

    pub fn embeddings(&self) -> Result<EmbeddingTable> {
        let words = fs::read_to_string(self.root.join(&self.manifest.embedding_words))?;
        let vectors = Tensor::load(self.root.join(&self.manifest.embedding_vectors))?;
        EmbeddingTable::new(words.lines().map(str::to_string).collect(), vectors)
    }

    fn raw_series(&self, s: &SessionRecord, modality: Modality) -> Result<ChannelSeries> {
        let path = self.session_dir(s).join(format!("{}.tnsr", modality.as_str()));
        if !path.exists() {
            return Err(Error::Missing(format!("{} file {}", modality.as_str(), path.display())));
        }
        read_series(&path)
    }

    /// Correlation structures of one session's windows, computed in memory.
    pub fn segment_fvtcs(&self, s: &SessionRecord, modality: Modality, spec: &SegmentSpec, estimator: CorrelationEstimator) -> Result<Vec<Tensor>> {
        let series = self.raw_series(s, modality)?;
        segment_series(&series, spec.window_s, spec.overlap_s)?
            .iter()
            .map(|seg| Ok(compute_fvtc(seg, spec.max_delay, estimator)?.values))
            .collect()
    }

    fn text_grid(&self, s: &SessionRecord, table: &EmbeddingTable, cfg: &FeatureConfig) -> Result<TextGrid> {
        let path = self.session_dir(s).join("text.txt");
        if !path.exists() {
            return Err(Error::Missing(format!("text file {}", path.display())));
        }
        let sentences = tokenize(&fs::read_to_string(path)?, &default_stopwords(), DEFAULT_PUNCTUATION);
        Ok(embed_text(&sentences, table, cfg.s_max, cfg.w_max))
    }

    fn feature_checksum(&self, cfg: &FeatureConfig) -> Result<String> {
        let mut bytes = fs::read(self.root.join(MANIFEST))?;
        bytes.extend_from_slice(serde_json::to_string(cfg)?.as_bytes());
        Ok(sha256_hex(&bytes))
    }

    /// Writes per-segment correlation files and text grids with sidecars.
    /// Skips the work when the stored checksum of manifest and feature
    /// config matches, unless `force` is set.
    pub fn extract_features(&self, cfg: &FeatureConfig, force: bool) -> Result<FeatureSummary> {
        let checksum = self.feature_checksum(cfg)?;
        let stamp = self.root.join(FEATURE_STAMP);
        let mut summary = FeatureSummary {
            computed: false,
            sessions: self.manifest.sessions.len(),
            audio_segments: 0,
            video_segments: 0,
        };
        if !force && fs::read_to_string(&stamp).ok().as_deref() == Some(checksum.as_str()) {
            for s in &self.manifest.sessions {
                summary.audio_segments += count_files(&self.feature_dir(s).join("audio"))?;
                summary.video_segments += count_files(&self.feature_dir(s).join("video"))?;
            }
            return Ok(summary);
        }
        let _ = fs::remove_file(&stamp);
        let features = self.root.join("features");
        if features.exists() {
            fs::remove_dir_all(&features)?;
        }
        let table = self.embeddings()?;
        for s in &self.manifest.sessions {
            let dir = self.feature_dir(s);
            for (modality, spec) in [(Modality::Audio, &cfg.audio), (Modality::Video, &cfg.video)] {
                let series = self.raw_series(s, modality)?;
                let sub = dir.join(modality.as_str());
                fs::create_dir_all(&sub)?;
                let segments = segment_series(&series, spec.window_s, spec.overlap_s)?;
                for (k, seg) in segments.iter().enumerate() {
                    let fvtc = compute_fvtc(seg, spec.max_delay, cfg.estimator)?;
                    write_fvtc(&sub.join(format!("{k:03}.tnsr")), &fvtc, modality, series.frame_rate, &series.channel_names)?;
                }
                match modality {
                    Modality::Audio => summary.audio_segments += segments.len(),
                    Modality::Video => summary.video_segments += segments.len(),
                }
            }
            write_text_grid(&dir.join("text.tnsr"), &self.text_grid(s, &table, cfg)?)?;
        }
        fs::write(&stamp, &checksum)?;
        summary.computed = true;
        Ok(summary)
    }

    /// Loads stored features of the sessions in `split`.
    pub fn load_features(&self, split: Split, needs: Needs) -> Result<Vec<SessionFeatures>> {
        if !self.root.join(FEATURE_STAMP).exists() {
            return Err(Error::Missing(format!(
                "features for {}; run the features command first",
                self.root.display()
            )));
        }
        self.sessions(split)
            .into_iter()
            .map(|s| {
                let dir = self.feature_dir(s);
                let segments = |m: Modality| -> Result<Vec<Tensor>> {
                    let sub = dir.join(m.as_str());
                    (0..count_files(&sub)?).map(|k| Ok(read_fvtc(&sub.join(format!("{k:03}.tnsr")))?.values)).collect()
                };
                Ok(SessionFeatures {
                    record: s.clone(),
                    audio: if needs.audio { segments(Modality::Audio)? } else { Vec::new() },
                    video: if needs.video { segments(Modality::Video)? } else { Vec::new() },
                    text: if needs.text { Some(read_text_grid(&dir.join("text.tnsr"))?) } else { None },
                })
            })
            .collect()
    }
}

/// Number of `.tnsr` files in a segment directory.
fn count_files(dir: &Path) -> Result<usize> {
    if !dir.exists() {
        return Err(Error::Missing(format!("feature directory {}", dir.display())));
    }
    let mut n = 0;
    for entry in fs::read_dir(dir)? {
        if entry?.path().extension().is_some_and(|e| e == "tnsr") {
            n += 1;
        }
    }
    Ok(n)
}
