//! Synthetic cohort: BPRS-derived labels, VAR(1) audio/video channels with
//! class-dependent coupling, marker-token transcripts and subject-grouped
//! splits.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{EmbeddingTable, Modality, AUDIO_CHANNELS, VIDEO_CHANNELS};
use crate::rng::{derive_seed, derived, seeded, tag, SeededRng};
use crate::tensor::Tensor;

pub const BPRS_ITEMS: usize = 18;
/// Unusual thought content, conceptual disorganization, hallucinatory
/// behavior, grandiosity (0-based positions in the 18-item form).
pub const POSITIVE_ITEMS: [usize; 4] = [14, 3, 11, 7];
/// Blunted affect, emotional withdrawal, motor retardation.
pub const NEGATIVE_ITEMS: [usize; 3] = [15, 2, 12];
pub const SYMPTOM_THRESHOLD: f64 = 3.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Class {
    #[serde(rename = "HC")]
    Hc,
    #[serde(rename = "M-SZ")]
    MSz,
    #[serde(rename = "P-SZ")]
    PSz,
}

impl Class {
    pub const ALL: [Class; 3] = [Class::Hc, Class::MSz, Class::PSz];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        ["HC", "M-SZ", "P-SZ"][self as usize]
    }
}

fn item_mean(scores: &[u8; BPRS_ITEMS], items: &[usize]) -> f64 {
    items.iter().map(|&i| scores[i] as f64).sum::<f64>() / items.len() as f64
}

/// Healthy subjects are HC. Diagnosed subjects are P-SZ when the positive
/// items average at least 3.5 and the negative items do not; every other
/// diagnosed subject is M-SZ.
pub fn assign_class(healthy: bool, scores: &[u8; BPRS_ITEMS]) -> Result<Class> {
    if let Some(i) = scores.iter().position(|s| !(1..=7).contains(s)) {
        return Err(Error::invalid(format!("BPRS item {} has score {} outside 1..=7", i + 1, scores[i])));
    }
    if healthy {
        return Ok(Class::Hc);
    }
    let positive = item_mean(scores, &POSITIVE_ITEMS) >= SYMPTOM_THRESHOLD;
    let negative = item_mean(scores, &NEGATIVE_ITEMS) >= SYMPTOM_THRESHOLD;
    Ok(if positive && !negative { Class::PSz } else { Class::MSz })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub id: String,
    pub healthy: bool,
    pub bprs: [u8; BPRS_ITEMS],
    pub class: Class,
    pub sessions: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSpec {
    /// Subjects per class in the order HC, M-SZ, P-SZ.
    pub subjects: [usize; 3],
    pub sessions: [usize; 3],
    /// Coupling strength δ: scales the class-specific cross-channel links.
    /// Zero gives every class the same dynamics.
    pub separation: f64,
    /// Text counterpart of δ in [0, 1]: zero spreads marker tokens evenly
    /// over the classes, one uses only the session's own markers.
    pub marker_separation: f64,
    /// Standard deviation of the VAR innovation.
    pub noise: f64,
    /// Half-width of the per-subject uniform perturbation of the coupling.
    pub subject_jitter: f64,
    /// Probability that a word is a marker token.
    pub marker_rate: f64,
    pub duration_min: [f64; 2],
    pub sentences_per_minute: f64,
    pub vocabulary: usize,
    pub markers_per_class: usize,
    pub embedding_dim: usize,
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self {
            subjects: [14, 16, 10],
            sessions: [54, 56, 30],
            separation: 0.5,
            marker_separation: 0.5,
            noise: 1.0,
            subject_jitter: 0.05,
            marker_rate: 0.2,
            duration_min: [4.0, 12.0],
            sentences_per_minute: 3.0,
            vocabulary: 400,
            markers_per_class: 12,
            embedding_dim: 100,
            seed: 0,
        }
    }
}

impl CohortSpec {
    /// Nine subjects, short sessions; for smoke runs.
    pub fn tiny() -> Self {
        Self {
            subjects: [3, 3, 3],
            sessions: [6, 6, 6],
            duration_min: [1.0, 1.5],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for c in 0..3 {
            let (n, s) = (self.subjects[c], self.sessions[c]);
            if n == 0 || s < n || s > 5 * n {
                return Err(Error::invalid(format!(
                    "class {}: {s} sessions cannot be spread over {n} subjects with 1 to 5 each",
                    Class::ALL[c].name()
                )));
            }
        }
        let [lo, hi] = self.duration_min;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::invalid("duration range must be positive and ordered"));
        }
        let unit = 0.0..=1.0;
        if !unit.contains(&self.marker_rate) || !unit.contains(&self.marker_separation) {
            return Err(Error::invalid("marker_rate and marker_separation must lie in [0,1]"));
        }
        if self.separation < 0.0 || self.noise <= 0.0 || self.subject_jitter < 0.0 {
            return Err(Error::invalid("separation and subject_jitter must be ≥ 0, noise > 0"));
        }
        if self.vocabulary == 0 || self.embedding_dim == 0 {
            return Err(Error::invalid("vocabulary and embedding_dim must be positive"));
        }
        Ok(())
    }

    /// Restricts the cohort to `n` subjects spread evenly over the classes,
    /// keeping the per-subject session ratio.
    pub fn with_subject_total(&self, n: usize) -> Self {
        let base = n / 3;
        let subjects = [base + usize::from(!n.is_multiple_of(3)), base + usize::from(n % 3 > 1), base];
        let sessions = std::array::from_fn(|c| {
            let per = self.sessions[c] as f64 / self.subjects[c].max(1) as f64;
            ((per * subjects[c] as f64).round() as usize).clamp(subjects[c], 5 * subjects[c])
        });
        Self { subjects, sessions, ..self.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub id: String,
    pub subject: String,
    pub class: Class,
    pub duration_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub spec: CohortSpec,
    pub subjects: Vec<SubjectProfile>,
    pub sessions: Vec<SessionMeta>,
}

/// Draws BPRS scores until they produce the wanted class.
fn sample_profile(rng: &mut SeededRng, class: Class) -> [u8; BPRS_ITEMS] {
    loop {
        let mut s = [1u8; BPRS_ITEMS];
        for v in s.iter_mut() {
            *v = rng.random_range(1..=3);
        }
        match class {
            Class::Hc => {}
            Class::PSz => {
                for &i in &POSITIVE_ITEMS {
                    s[i] = rng.random_range(3..=7);
                }
            }
            Class::MSz => {
                for &i in &POSITIVE_ITEMS {
                    s[i] = rng.random_range(1..=5);
                }
                for &i in &NEGATIVE_ITEMS {
                    s[i] = rng.random_range(1..=6);
                }
            }
        }
        if assign_class(class == Class::Hc, &s).expect("scores in range") == class {
            return s;
        }
    }
}

/// Spreads `total` sessions over `n` subjects, 1 to 5 each.
fn spread_sessions(rng: &mut SeededRng, n: usize, total: usize) -> Vec<usize> {
    let mut counts = vec![1; n];
    for _ in n..total {
        let open: Vec<usize> = (0..n).filter(|&i| counts[i] < 5).collect();
        counts[open[rng.random_range(0..open.len())]] += 1;
    }
    counts
}

/// Subjects, labels and session metadata. Signals are drawn lazily per
/// session by [`generate_session`].
pub fn generate_cohort(spec: &CohortSpec) -> Result<Cohort> {
    spec.validate()?;
    let mut rng = derived(spec.seed, "cohort.subjects");
    let mut subjects = Vec::new();
    let mut sessions = Vec::new();
    for class in Class::ALL {
        let c = class.index();
        let counts = spread_sessions(&mut rng, spec.subjects[c], spec.sessions[c]);
        for (i, &n) in counts.iter().enumerate() {
            let id = format!("{}{:02}", ["hc", "msz", "psz"][c], i + 1);
            let bprs = sample_profile(&mut rng, class);
            for k in 0..n {
                let minutes = rng.random_range(spec.duration_min[0]..=spec.duration_min[1]);
                sessions.push(SessionMeta {
                    id: format!("{id}_s{}", k + 1),
                    subject: id.clone(),
                    class,
                    duration_s: (minutes * 60.0).round(),
                });
            }
            subjects.push(SubjectProfile { id, healthy: class == Class::Hc, bprs, class, sessions: n });
        }
    }
    Ok(Cohort { spec: spec.clone(), subjects, sessions })
}

fn matmul_sq(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

/// Upper estimate of the spectral radius by Gelfand's formula
/// `ρ(A) ≤ ‖A^k‖_F^{1/k}` at `k = 2^10`, using renormalised squaring.
pub fn spectral_radius_bound(a: &[f64], n: usize) -> f64 {
    let mut m = a.to_vec();
    let mut log_scale = 0.0;
    let mut k = 1.0;
    for _ in 0..10 {
        m = matmul_sq(&m, &m, n);
        log_scale *= 2.0;
        k *= 2.0;
        let norm = m.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        m.iter_mut().for_each(|v| *v /= norm);
        log_scale += norm.ln();
    }
    (log_scale / k).exp()
}

pub const MAX_SPECTRAL_RADIUS: f64 = 0.95;

fn uniform_matrix(rng: &mut SeededRng, n: usize, half: f64) -> Vec<f64> {
    (0..n * n).map(|_| rng.random_range(-half..=half)).collect()
}

/// Shared base dynamics: moderate self-persistence plus weak coupling.
fn base_matrix(seed: u64, modality: Modality, n: usize) -> Vec<f64> {
    let mut rng = derived(seed, &format!("var.base.{modality:?}"));
    let mut m = uniform_matrix(&mut rng, n, 0.08);
    for i in 0..n {
        m[i * n + i] = 0.55;
    }
    m
}

/// Weight of one class-specific link at δ = 1.
pub const CLASS_LINK: f64 = 0.1;

/// Class coupling pattern: a few directed cross-channel links.
fn class_pattern(seed: u64, modality: Modality, class: Class, n: usize) -> Vec<f64> {
    let mut rng = derived(seed, &format!("var.class.{modality:?}.{}", class.name()));
    let mut m = vec![0.0; n * n];
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).collect();
    pairs.shuffle(&mut rng);
    for &(i, j) in pairs.iter().take(n) {
        m[i * n + j] = if rng.random_bool(0.5) { CLASS_LINK } else { -CLASS_LINK };
    }
    m
}

/// Coupling matrix of one subject: base + δ·class pattern + jitter,
/// resampling the jitter until the process is stable.
pub fn coupling_matrix(spec: &CohortSpec, modality: Modality, class: Class, subject: &str) -> Result<Vec<f64>> {
    let n = match modality {
        Modality::Audio => AUDIO_CHANNELS.len(),
        Modality::Video => VIDEO_CHANNELS.len(),
    };
    let base = base_matrix(spec.seed, modality, n);
    let pattern = class_pattern(spec.seed, modality, class, n);
    let mut rng = derived(spec.seed, &format!("var.subject.{modality:?}.{subject}"));
    for _ in 0..1000 {
        let jitter = uniform_matrix(&mut rng, n, spec.subject_jitter);
        let a: Vec<f64> = (0..n * n).map(|i| base[i] + spec.separation * pattern[i] + jitter[i]).collect();
        if spectral_radius_bound(&a, n) < MAX_SPECTRAL_RADIUS {
            return Ok(a);
        }
    }
    Err(Error::invalid(format!(
        "no stable coupling found for {} {modality:?}; reduce separation or jitter",
        class.name()
    )))
}

/// `x(t+1) = A·x(t) + η` after a burn-in, as a `C × T` tensor.
pub fn simulate_var(a: &[f64], n: usize, frames: usize, noise: f64, rng: &mut SeededRng) -> Tensor {
    const BURN_IN: usize = 200;
    let normal = Normal::new(0.0, noise).expect("noise > 0");
    let mut x = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut out = vec![0.0; n * frames];
    for t in 0..BURN_IN + frames {
        for i in 0..n {
            let row = &a[i * n..(i + 1) * n];
            next[i] = row.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>() + normal.sample(rng);
        }
        std::mem::swap(&mut x, &mut next);
        if t >= BURN_IN {
            for i in 0..n {
                out[i * frames + t - BURN_IN] = x[i];
            }
        }
    }
    Tensor::new(vec![n, frames], out).expect("series shape")
}

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "tr", "pl", "gr"];
const NUCLEI: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];

/// Deterministic pseudo-words: the first `vocabulary` are common words,
/// followed by `markers_per_class` markers for each class in class order.
pub fn vocabulary(spec: &CohortSpec) -> Vec<String> {
    let syllables: Vec<String> = ONSETS.iter().flat_map(|o| NUCLEI.iter().map(move |n| format!("{o}{n}"))).collect();
    let s = syllables.len();
    let total = spec.vocabulary + 3 * spec.markers_per_class;
    // Stride through the two-syllable words so neighbours differ.
    (0..total)
        .map(|i| {
            let j = (i * 37) % (s * s);
            format!("{}{}", syllables[j / s], syllables[j % s])
        })
        .collect()
}

/// Random unit-norm word vectors for the whole vocabulary.
pub fn embedding_table(spec: &CohortSpec) -> Result<EmbeddingTable> {
    let words = vocabulary(spec);
    let mut rng = derived(spec.seed, "embeddings");
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let e = spec.embedding_dim;
    let mut data = Vec::with_capacity(words.len() * e);
    for _ in 0..words.len() {
        let v: Vec<f64> = (0..e).map(|_| normal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        data.extend(v.iter().map(|x| x / norm));
    }
    EmbeddingTable::new(words, Tensor::new(vec![data.len() / e, e], data)?)
}

const FILLERS: &[&str] = &["the", "and", "i", "was", "it", "so"];

/// A transcript whose marker tokens lean towards the session's class.
pub fn generate_text(spec: &CohortSpec, class: Class, duration_s: f64, rng: &mut SeededRng) -> String {
    let words = vocabulary(spec);
    let (common, markers) = words.split_at(spec.vocabulary);
    let sentences = ((duration_s / 60.0) * spec.sentences_per_minute).round().max(1.0) as usize;
    let own = (1.0 + 2.0 * spec.marker_separation) / 3.0;
    let mut text = String::new();
    for _ in 0..sentences {
        let len = rng.random_range(4..=14);
        let mut sentence = Vec::with_capacity(len);
        for _ in 0..len {
            if rng.random_bool(0.1) {
                sentence.push(FILLERS[rng.random_range(0..FILLERS.len())].to_string());
            } else if rng.random_bool(spec.marker_rate) {
                let c = if rng.random_bool(own) {
                    class.index()
                } else {
                    let others: Vec<usize> = (0..3).filter(|&k| k != class.index()).collect();
                    others[rng.random_range(0..2)]
                };
                let m = rng.random_range(0..spec.markers_per_class);
                sentence.push(markers[c * spec.markers_per_class + m].clone());
            } else {
                sentence.push(common[rng.random_range(0..common.len())].clone());
            }
        }
        let mut s = sentence.join(" ");
        if let Some(first) = s.get(0..1) {
            s.replace_range(0..1, &first.to_uppercase());
        }
        text.push_str(&s);
        text.push_str(". ");
    }
    text.trim_end().to_string()
}

/// Raw signals of one session.
#[derive(Clone, Debug)]
pub struct SessionData {
    pub audio: Tensor,
    pub video: Tensor,
    pub text: String,
}

pub fn generate_session(spec: &CohortSpec, meta: &SessionMeta) -> Result<SessionData> {
    let seed = derive_seed(spec.seed, tag(&format!("session.{}", meta.id)));
    let signal = |modality: Modality, channels: usize, rate: f64| -> Result<Tensor> {
        let a = coupling_matrix(spec, modality, meta.class, &meta.subject)?;
        let mut rng = seeded(derive_seed(seed, tag(&format!("{modality:?}"))));
        Ok(simulate_var(&a, channels, (meta.duration_s * rate).round() as usize, spec.noise, &mut rng))
    };
    let audio = signal(Modality::Audio, AUDIO_CHANNELS.len(), Modality::Audio.default_frame_rate())?;
    let video = signal(Modality::Video, VIDEO_CHANNELS.len(), Modality::Video.default_frame_rate())?;
    let mut rng = seeded(derive_seed(seed, tag("text")));
    let text = generate_text(spec, meta.class, meta.duration_s, &mut rng);
    Ok(SessionData { audio, video, text })
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(format!("unknown split `{s}` (expected train, val or test)")),
        }
    }
}

impl Splits {
    pub fn get(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn split_of(&self, subject: &str) -> Option<Split> {
        [Split::Train, Split::Val, Split::Test]
            .into_iter()
            .find(|&s| self.get(s).iter().any(|x| x == subject))
    }
}

/// Largest-remainder apportionment of `total` over `weights`, at least one
/// per entry.
fn apportion(total: usize, weights: &[usize]) -> Vec<usize> {
    let sum: usize = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|&w| total as f64 * w as f64 / sum as f64).collect();
    let mut out: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b)));
    let mut left = total - out.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        out[i] += 1;
        left -= 1;
    }
    // Lift empty entries by taking from the largest.
    while let Some(z) = out.iter().position(|&v| v == 0) {
        let donor = (0..out.len()).max_by_key(|&i| (out[i], usize::MAX - i)).expect("non-empty");
        out[donor] -= 1;
        out[z] += 1;
    }
    out
}

/// Subject-level stratified split. Validation and test each get
/// `max(⌊r·n⌋, K)` subjects apportioned over classes with at least one per
/// class; train keeps the remainder.
pub fn split_subjects(subjects: &[(String, Class)], ratios: [f64; 3], seed: u64) -> Result<Splits> {
    let mut by_class: BTreeMap<Class, Vec<String>> = BTreeMap::new();
    for (id, c) in subjects {
        by_class.entry(*c).or_default().push(id.clone());
    }
    let k = by_class.len();
    if let Some((c, ids)) = by_class.iter().find(|(_, ids)| ids.len() < 3) {
        return Err(Error::invalid(format!(
            "class {} has {} subjects; every class needs at least 3 to populate train, val and test",
            c.name(),
            ids.len()
        )));
    }
    if (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 || ratios.iter().any(|&r| r <= 0.0) {
        return Err(Error::invalid("split ratios must be positive and sum to 1"));
    }
    let n = subjects.len();
    let held = |r: f64| ((r * n as f64 + 1e-9).floor() as usize).max(k);
    let sizes: Vec<usize> = by_class.values().map(Vec::len).collect();
    let val = apportion(held(ratios[1]), &sizes);
    let test = apportion(held(ratios[2]), &sizes);
    let mut out = Splits::default();
    for (i, (c, ids)) in by_class.iter().enumerate() {
        if val[i] + test[i] >= ids.len() {
            return Err(Error::invalid(format!("class {} is too small for the held-out splits", c.name())));
        }
        let mut ids = ids.clone();
        ids.sort();
        ids.shuffle(&mut derived(seed, &format!("split.{}", c.name())));
        out.val.extend_from_slice(&ids[..val[i]]);
        out.test.extend_from_slice(&ids[val[i]..val[i] + test[i]]);
        out.train.extend_from_slice(&ids[val[i] + test[i]..]);
    }
    for list in [&mut out.train, &mut out.val, &mut out.test] {
        list.sort();
    }
    Ok(out)
}
