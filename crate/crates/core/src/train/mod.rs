//! Class-weighted training with Adam, a plateau schedule, early stopping and
//! best-checkpoint restore; plus the grid-search harness.

mod grid;
mod optim;
mod schedule;

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use grid::{grid_search, write_grid_csv, GridCell, GridRow, GridSpec};
pub use optim::Adam;
pub use schedule::{EarlyStop, PlateauScheduler};

use crate::error::{Error, Result};
use crate::models::{Classifier, Mode};
use crate::nn::ModelParams;
use crate::rng::derived;
use crate::tensor::{Tape, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr_patience: usize,
    pub lr_factor: f64,
    pub early_stop_patience: usize,
    /// Examples whose gradients are averaged into one step.
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 300,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr_patience: 25,
            lr_factor: 0.5,
            early_stop_patience: 50,
            batch_size: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr_patience == 0 || self.early_stop_patience == 0 {
            return Err(Error::invalid("patience values must be positive"));
        }
        if !(self.lr_factor > 0.0 && self.lr_factor < 1.0) {
            return Err(Error::invalid(format!("lr_factor {} must lie in (0, 1)", self.lr_factor)));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.lr <= 0.0 {
            return Err(Error::invalid("batch_size, max_epochs and lr must be positive"));
        }
        Ok(())
    }
}

/// Balanced inverse-frequency weights `N / (K·N_c)`.
pub fn class_weights(counts: &[usize]) -> Result<Tensor> {
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::invalid(format!("class {c} has no examples")));
    }
    let n: usize = counts.iter().sum();
    let k = counts.len() as f64;
    Ok(Tensor::vector(counts.iter().map(|&c| n as f64 / (k * c as f64)).collect()))
}

/// One labelled example and the subject it came from.
#[derive(Clone, Debug)]
pub struct Example<I> {
    pub input: I,
    pub label: usize,
    pub subject: String,
}

/// Refuses splits that share a subject.
pub fn check_disjoint<I>(splits: &[(&str, &[Example<I>])]) -> Result<()> {
    let sets: Vec<BTreeSet<&str>> = splits
        .iter()
        .map(|(_, xs)| xs.iter().map(|e| e.subject.as_str()).collect())
        .collect();
    for a in 0..sets.len() {
        for b in a + 1..sets.len() {
            if let Some(s) = sets[a].intersection(&sets[b]).next() {
                return Err(Error::Leakage(format!(
                    "subject {s} appears in both {} and {}",
                    splits[a].0, splits[b].0
                )));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Event {
    LrDrop,
    EarlyStop,
    BestCheckpoint,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
    pub wall_time_s: f64,
    pub events: Vec<Event>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn best_epoch(&self) -> Option<&EpochRecord> {
        self.epochs.iter().rev().find(|r| r.events.contains(&Event::BestCheckpoint))
    }

    pub fn stopped_early(&self) -> bool {
        self.epochs.last().is_some_and(|r| r.events.contains(&Event::EarlyStop))
    }

    /// Equality of every logged number except wall time.
    pub fn same_trajectory(&self, other: &TrainLog) -> bool {
        self.epochs.len() == other.epochs.len()
            && self.epochs.iter().zip(&other.epochs).all(|(a, b)| {
                a.epoch == b.epoch
                    && a.train_loss.to_bits() == b.train_loss.to_bits()
                    && a.val_loss.to_bits() == b.val_loss.to_bits()
                    && a.lr.to_bits() == b.lr.to_bits()
                    && a.events == b.events
            })
    }

    /// One JSON object per epoch.
    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for r in &self.epochs {
            serde_json::to_writer(&mut f, r)?;
            f.write_all(b"\n")?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let epochs = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { epochs })
    }
}

/// Mean unweighted cross-entropy under frozen parameters.
pub fn evaluate_loss<M: Classifier>(model: &M, params: &ModelParams, data: &[Example<M::Input>]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty split"));
    }
    let mut total = 0.0;
    for ex in data {
        let tape = Tape::new();
        let p = params.bind_frozen(&tape);
        let logits = model.logits(&tape, &p, &ex.input, &mut Mode::Eval)?;
        let k = logits.shape()[0];
        total += tape.weighted_cross_entropy(logits, ex.label, &Tensor::full(&[k], 1.0))?.to_tensor().item();
    }
    Ok(total / data.len() as f64)
}

/// Class probabilities for every example.
pub fn predict_all<M: Classifier>(model: &M, params: &ModelParams, data: &[Example<M::Input>]) -> Result<Vec<Vec<f64>>> {
    data.iter().map(|ex| crate::models::predict_proba(model, params, &ex.input)).collect()
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub log: TrainLog,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

/// Trains `params` in place and leaves them at the best validation epoch.
pub fn train<M: Classifier>(
    model: &M,
    params: &mut ModelParams,
    train_set: &[Example<M::Input>],
    val_set: &[Example<M::Input>],
    weights: &Tensor,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_disjoint(&[("train", train_set), ("val", val_set)])?;
    if train_set.is_empty() {
        return Err(Error::invalid("training split is empty"));
    }
    let start = Instant::now();
    let mut adam = Adam::new(cfg.beta1, cfg.beta2, cfg.eps);
    let mut sched = PlateauScheduler::new(cfg.lr, cfg.lr_patience, cfg.lr_factor);
    let mut stop = EarlyStop::new(cfg.early_stop_patience);
    let mut best = params.clone();
    let mut log = TrainLog::default();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut shuffle_rng = derived(cfg.seed, "train.shuffle");
    let mut dropout_rng = derived(cfg.seed, "train.dropout");

    for epoch in 0..cfg.max_epochs {
        let lr = sched.lr();
        order.shuffle(&mut shuffle_rng);
        let mut train_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            params.zero_grad();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let ex = &train_set[i];
                let tape = Tape::new();
                let p = params.bind(&tape);
                let logits = model.logits(&tape, &p, &ex.input, &mut Mode::Train(&mut dropout_rng))?;
                let loss = tape.weighted_cross_entropy(logits, ex.label, weights)?;
                train_loss += loss.to_tensor().item();
                tape.backward(loss.scale(scale))?;
                params.accumulate_grads(&tape, &p);
            }
            adam.step(params, lr)?;
        }
        train_loss /= train_set.len() as f64;
        let val_loss = if val_set.is_empty() { train_loss } else { evaluate_loss(model, params, val_set)? };

        let mut events = Vec::new();
        let (improved, halt) = stop.observe(epoch, val_loss);
        if improved {
            best = params.clone();
            events.push(Event::BestCheckpoint);
        }
        if sched.observe(epoch, val_loss).is_some() {
            events.push(Event::LrDrop);
        }
        if halt {
            events.push(Event::EarlyStop);
        }
        log.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr,
            wall_time_s: start.elapsed().as_secs_f64(),
            events,
        });
        if halt {
            break;
        }
    }
    *params = best;
    Ok(TrainOutcome { log, best_epoch: stop.best_epoch(), best_val_loss: stop.best_loss() })
}
