//! Validation-loss monitors. Improvement always means strictly lower loss.

/// Multiplies the learning rate by `factor` whenever `patience` epochs pass
/// without improvement; the waiting window restarts after each drop.
#[derive(Clone, Debug)]
pub struct PlateauScheduler {
    pub patience: usize,
    pub factor: f64,
    lr: f64,
    best: f64,
    reference: usize,
}

impl PlateauScheduler {
    pub fn new(lr: f64, patience: usize, factor: f64) -> Self {
        assert!(patience >= 1, "patience must be positive");
        assert!(factor > 0.0 && factor < 1.0, "factor must lie in (0, 1)");
        Self { patience, factor, lr, best: f64::INFINITY, reference: 0 }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Feeds the loss of `epoch`; returns the new rate when it dropped.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> Option<f64> {
        if loss < self.best {
            self.best = loss;
            self.reference = epoch;
            return None;
        }
        if epoch - self.reference >= self.patience {
            self.lr *= self.factor;
            self.reference = epoch;
            return Some(self.lr);
        }
        None
    }
}

/// Stops once `patience` epochs have passed since the best loss.
#[derive(Clone, Debug)]
pub struct EarlyStop {
    pub patience: usize,
    best: f64,
    best_epoch: usize,
}

impl EarlyStop {
    pub fn new(patience: usize) -> Self {
        assert!(patience >= 1, "patience must be positive");
        Self { patience, best: f64::INFINITY, best_epoch: 0 }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }

    /// Returns `(improved, stop)`.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> (bool, bool) {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            return (true, false);
        }
        (false, epoch - self.best_epoch >= self.patience)
    }
}
