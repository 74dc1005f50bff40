use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub lr: Vec<f64>,
    pub lr_patience: Vec<usize>,
    pub early_stop: Vec<usize>,
    pub factor: Vec<f64>,
    /// Segment lengths in seconds; empty when the model has no segments.
    pub segment_seconds: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lr: vec![1e-3, 5e-4, 1e-4],
            lr_patience: vec![20, 25, 30],
            early_stop: vec![40, 50, 60],
            factor: vec![0.75, 0.5, 0.25],
            segment_seconds: vec![20.0, 30.0, 40.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub index: usize,
    pub lr: f64,
    pub lr_patience: usize,
    pub early_stop: usize,
    pub factor: f64,
    pub segment_seconds: Option<f64>,
}

impl GridCell {
    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            lr_patience: self.lr_patience,
            early_stop_patience: self.early_stop,
            lr_factor: self.factor,
            ..base.clone()
        }
    }
}

impl GridSpec {
    /// Cartesian product with the last listed axis varying fastest.
    pub fn cells(&self) -> Vec<GridCell> {
        let segs: Vec<Option<f64>> = if self.segment_seconds.is_empty() {
            vec![None]
        } else {
            self.segment_seconds.iter().map(|&s| Some(s)).collect()
        };
        let mut out = Vec::new();
        for &lr in &self.lr {
            for &lr_patience in &self.lr_patience {
                for &early_stop in &self.early_stop {
                    for &factor in &self.factor {
                        for &segment_seconds in &segs {
                            out.push(GridCell { index: out.len(), lr, lr_patience, early_stop, factor, segment_seconds });
                        }
                    }
                }
            }
        }
        out
    }

    /// The same grid without the segment-length axis.
    pub fn without_segments(&self) -> Self {
        Self { segment_seconds: Vec::new(), ..self.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub rank: usize,
    #[serde(flatten)]
    pub cell: GridCell,
    pub val_weighted_f1: f64,
    pub val_loss: f64,
}

/// Runs every cell through `run` (which returns validation weighted F1 and
/// validation loss) and ranks: higher F1, then lower loss, then enumeration
/// order.
pub fn grid_search(
    spec: &GridSpec,
    base: &TrainConfig,
    mut run: impl FnMut(&GridCell, &TrainConfig) -> Result<(f64, f64)>,
) -> Result<Vec<GridRow>> {
    let cells = spec.cells();
    if cells.is_empty() {
        return Err(Error::invalid("grid is empty"));
    }
    let mut rows = Vec::with_capacity(cells.len());
    for cell in cells {
        let cfg = cell.apply(base);
        let (f1, loss) = run(&cell, &cfg)?;
        rows.push(GridRow { rank: 0, cell, val_weighted_f1: f1, val_loss: loss });
    }
    rows.sort_by(|a, b| {
        b.val_weighted_f1
            .total_cmp(&a.val_weighted_f1)
            .then(a.val_loss.total_cmp(&b.val_loss))
            .then(a.cell.index.cmp(&b.cell.index))
    });
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(rows)
}

pub fn write_grid_csv(rows: &[GridRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "rank",
        "index",
        "lr",
        "lr_patience",
        "early_stop",
        "factor",
        "segment_seconds",
        "val_weighted_f1",
        "val_loss",
    ])?;
    for r in rows {
        let c = &r.cell;
        w.write_record([
            r.rank.to_string(),
            c.index.to_string(),
            c.lr.to_string(),
            c.lr_patience.to_string(),
            c.early_stop.to_string(),
            c.factor.to_string(),
            c.segment_seconds.map(|s| s.to_string()).unwrap_or_default(),
            format!("{:.6}", r.val_weighted_f1),
            format!("{:.6}", r.val_loss),
        ])?;
    }
    w.flush()?;
    Ok(())
}
