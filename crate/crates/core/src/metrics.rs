//! Confusion matrices, weighted F1 with a percentile bootstrap interval, and
//! support-weighted one-vs-rest AUC.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};

pub const CLASS_NAMES: [&str; 3] = ["HC", "M-SZ", "P-SZ"];

/// Rows are true labels, columns predictions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(k: usize) -> Self {
        Self { counts: vec![vec![0; k]; k] }
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Row sums.
    pub fn support(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Parses the bracket form `[[6,2,0],[2,5,2],[1,1,4]]`.
    pub fn parse(text: &str) -> Result<Self> {
        BracketParser { s: text.as_bytes(), pos: 0 }.matrix()
    }
}

/// Bracket form, e.g. `[[6,2,0],[2,5,2],[1,1,4]]`.
impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, row) in self.counts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            write!(f, "[{}]", cells.join(","))?;
        }
        write!(f, "]")
    }
}

struct BracketParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl BracketParser<'_> {
    fn err<T>(&self, reason: impl Into<String>) -> Result<T> {
        Err(Error::Parse { position: self.pos, reason: reason.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        self.skip_ws();
        if self.s.get(self.pos) == Some(&c) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{}`", c as char))
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn number(&mut self) -> Result<u64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected a non-negative integer");
        }
        std::str::from_utf8(&self.s[start..self.pos])
            .expect("ascii digits")
            .parse()
            .or_else(|_| {
                self.pos = start;
                self.err("integer out of range")
            })
    }

    fn list<T>(&mut self, mut item: impl FnMut(&mut Self) -> Result<T>) -> Result<Vec<T>> {
        self.expect(b'[')?;
        let mut out = vec![item(self)?];
        loop {
            match self.peek() {
                Some(b',') => {
                    self.pos += 1;
                    out.push(item(self)?);
                }
                Some(b']') => {
                    self.pos += 1;
                    return Ok(out);
                }
                _ => return self.err("expected `,` or `]`"),
            }
        }
    }

    fn matrix(mut self) -> Result<ConfusionMatrix> {
        let mut rows: Vec<Vec<u64>> = Vec::new();
        let mut k = None;
        self.expect(b'[')?;
        loop {
            let row_start = {
                self.skip_ws();
                self.pos
            };
            let row = self.list(|p| p.number())?;
            let want = *k.get_or_insert(row.len());
            if row.len() != want {
                self.pos = row_start;
                return self.err(format!("row has {} entries, expected {want}", row.len()));
            }
            rows.push(row);
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b']') => {
                    self.pos += 1;
                    break;
                }
                _ => return self.err("expected `,` or `]`"),
            }
        }
        if self.peek().is_some() {
            return self.err("trailing characters");
        }
        if rows.len() != rows[0].len() {
            return self.err(format!("matrix is {}×{}, expected square", rows.len(), rows[0].len()));
        }
        Ok(ConfusionMatrix { counts: rows })
    }
}

pub fn confusion(truth: &[usize], predicted: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "{} true labels but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut m = ConfusionMatrix::zeros(k);
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= k || p >= k {
            return Err(Error::invalid(format!("label pair ({t}, {p}) out of range for {k} classes")));
        }
        m.counts[t][p] += 1;
    }
    Ok(m)
}

/// One-vs-rest scores for one class; zero where a denominator vanishes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Set when precision or recall had a zero denominator.
    pub undefined: bool,
}

pub fn per_class(m: &ConfusionMatrix) -> Vec<ClassScores> {
    let k = m.classes();
    (0..k)
        .map(|c| {
            let tp = m.counts[c][c] as f64;
            let predicted: u64 = (0..k).map(|r| m.counts[r][c]).sum();
            let support: u64 = m.counts[c].iter().sum();
            let ratio = |num: f64, den: u64| if den == 0 { 0.0 } else { num / den as f64 };
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
            ClassScores { precision, recall, f1, support, undefined: predicted == 0 || support == 0 }
        })
        .collect()
}

/// Per-class F1 and the support-weighted mean.
pub fn weighted_f1(m: &ConfusionMatrix) -> Result<(Vec<f64>, f64)> {
    let total = m.total();
    if total == 0 {
        return Err(Error::invalid("confusion matrix is all zero"));
    }
    let scores = per_class(m);
    let weighted = scores.iter().map(|s| s.support as f64 * s.f1).sum::<f64>() / total as f64;
    Ok((scores.iter().map(|s| s.f1).collect(), weighted))
}

fn weighted_f1_of(truth: &[usize], predicted: &[usize], k: usize) -> f64 {
    let m = confusion(truth, predicted, k).expect("validated labels");
    weighted_f1(&m).expect("non-empty").1
}

/// Linear-interpolation percentile of sorted data, `q ∈ [0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile bootstrap of weighted F1. Replicate `b` draws from its own
/// substream, so the result does not depend on evaluation order.
pub fn bootstrap_ci(truth: &[usize], predicted: &[usize], k: usize, replicates: usize, alpha: f64, seed: u64) -> Result<[f64; 2]> {
    let n = truth.len();
    if n < 2 {
        return Err(Error::invalid(format!("bootstrap needs at least 2 samples, got {n}")));
    }
    confusion(truth, predicted, k)?;
    if replicates == 0 || !(0.0..1.0).contains(&alpha) {
        return Err(Error::invalid("bootstrap needs replicates > 0 and alpha in [0, 1)"));
    }
    let mut stats: Vec<f64> = (0..replicates)
        .map(|b| {
            let mut rng = seeded(derive_seed(seed, b as u64));
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let t: Vec<usize> = idx.iter().map(|&i| truth[i]).collect();
            let p: Vec<usize> = idx.iter().map(|&i| predicted[i]).collect();
            weighted_f1_of(&t, &p, k)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    Ok([percentile(&stats, alpha / 2.0), percentile(&stats, 1.0 - alpha / 2.0)])
}

/// Binary AUC by the rank statistic with midranks for ties. `None` when
/// either class is absent.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks are 1-based; tied block i..=j shares the mean rank.
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = mid;
        }
        i = j + 1;
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let rank_sum: f64 = (0..n).filter(|&i| positive[i]).map(|i| ranks[i]).sum();
    let np = n_pos as f64;
    Some((rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AucReport {
    /// `None` for classes absent from the labels.
    pub per_class: Vec<Option<f64>>,
    pub weighted: f64,
    pub warnings: Vec<String>,
}

/// One-vs-rest AUC per class, averaged with true-class supports as weights.
pub fn ovr_auc(probs: &[Vec<f64>], truth: &[usize], k: usize) -> Result<AucReport> {
    if probs.len() != truth.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    for (i, row) in probs.iter().enumerate() {
        let s: f64 = row.iter().sum();
        if row.len() != k || (s - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("score row {i} is not a {k}-class probability vector")));
        }
    }
    let mut per_class = Vec::with_capacity(k);
    let mut warnings = Vec::new();
    let (mut num, mut den) = (0.0, 0.0);
    for c in 0..k {
        let col: Vec<f64> = probs.iter().map(|r| r[c]).collect();
        let pos: Vec<bool> = truth.iter().map(|&t| t == c).collect();
        let support = pos.iter().filter(|&&p| p).count() as f64;
        let auc = binary_auc(&col, &pos);
        match auc {
            Some(a) => {
                num += support * a;
                den += support;
            }
            None => warnings.push(format!("AUC undefined for class {c}: one side of the one-vs-rest split is empty")),
        }
        per_class.push(auc);
    }
    let weighted = if den > 0.0 { num / den } else { f64::NAN };
    Ok(AucReport { per_class, weighted, warnings })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub bootstrap_replicates: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { bootstrap_replicates: 1000, alpha: 0.05, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub split: String,
    pub sessions: usize,
    pub confusion: ConfusionMatrix,
    pub confusion_text: String,
    pub per_class: Vec<ClassScores>,
    pub weighted_f1: f64,
    pub ci: [f64; 2],
    pub auc_per_class: Vec<Option<f64>>,
    pub weighted_auc: f64,
    pub support: Vec<u64>,
    pub warnings: Vec<String>,
}

impl EvalReport {
    pub fn build(
        model: &str,
        split: &str,
        truth: &[usize],
        probs: &[Vec<f64>],
        k: usize,
        opts: &EvalOptions,
    ) -> Result<Self> {
        let predicted: Vec<usize> = probs.iter().map(|p| argmax(p)).collect();
        let m = confusion(truth, &predicted, k)?;
        let (_, wf1) = weighted_f1(&m)?;
        let ci = bootstrap_ci(truth, &predicted, k, opts.bootstrap_replicates, opts.alpha, opts.seed)?;
        let auc = ovr_auc(probs, truth, k)?;
        Ok(Self {
            model: model.to_string(),
            split: split.to_string(),
            sessions: truth.len(),
            confusion_text: m.to_string(),
            per_class: per_class(&m),
            support: m.support(),
            confusion: m,
            weighted_f1: wf1,
            ci,
            auc_per_class: auc.per_class,
            weighted_auc: auc.weighted,
            warnings: auc.warnings,
        })
    }

    /// Table-2 style rows: model, weighted F1, CI, AUC-ROC, confusion matrix.
    pub fn table(reports: &[EvalReport]) -> String {
        let mut out = format!(
            "{:<24} {:>11} {:>17} {:>8}  {}\n",
            "Model", "Weighted F1", "95% CI for F1", "AUC-ROC", "Confusion matrix"
        );
        for r in reports {
            out.push_str(&format!(
                "{:<24} {:>11.4} {:>17} {:>8.4}  {}\n",
                r.model,
                r.weighted_f1,
                format!("[{:.4},{:.4}]", r.ci[0], r.ci[1]),
                r.weighted_auc,
                r.confusion_text
            ));
        }
        out
    }
}

/// Index of the largest entry; the first wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
