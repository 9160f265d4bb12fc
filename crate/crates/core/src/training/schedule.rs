use super::{TrainConfig, TrainError};

/// Tracks the best dev loss and counts epochs without strict improvement.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            stale: 0,
        }
    }

    /// Record an epoch's dev loss. Returns true when it is a new best.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> bool {
        match self.best {
            Some((_, best)) if loss >= best => {
                self.stale += 1;
                false
            }
            _ => {
                self.best = Some((epoch, loss));
                self.stale = 0;
                true
            }
        }
    }

    pub fn should_stop(&self) -> bool {
        self.stale >= self.patience
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}

/// One training epoch plus the ability to snapshot the current weights.
pub trait EpochRunner {
    type Snapshot;

    /// Train for one (1-based) epoch at `lr` and return the dev loss.
    fn run_epoch(&mut self, epoch: usize, lr: f64) -> Result<f64, TrainError>;

    fn snapshot(&self) -> Self::Snapshot;
}

#[derive(Clone, Debug)]
pub struct ScheduleOutcome<S> {
    pub best_epoch: usize,
    pub best_loss: f64,
    pub best: S,
    pub epochs_run: usize,
    pub learning_rates: Vec<f64>,
    pub dev_losses: Vec<f64>,
}

/// Run epochs with the learning-rate schedule until `max_epochs` or until
/// `patience` consecutive epochs bring no improvement, keeping a snapshot of
/// the best epoch.
pub fn run_schedule<R: EpochRunner>(
    config: &TrainConfig,
    runner: &mut R,
) -> Result<ScheduleOutcome<R::Snapshot>, TrainError> {
    let mut stopping = EarlyStopping::new(config.patience);
    let mut best = None;
    let mut learning_rates = Vec::new();
    let mut dev_losses = Vec::new();

    for epoch in 1..=config.max_epochs {
        let lr = config.learning_rate(epoch);
        let loss = runner.run_epoch(epoch, lr)?;
        learning_rates.push(lr);
        dev_losses.push(loss);
        if stopping.observe(epoch, loss) {
            best = Some(runner.snapshot());
        }
        if stopping.should_stop() {
            break;
        }
    }

    let (best_epoch, best_loss) = stopping.best().ok_or_else(|| TrainError::Config("no epochs run".into()))?;
    Ok(ScheduleOutcome {
        best_epoch,
        best_loss,
        best: best.expect("a best epoch implies a snapshot"),
        epochs_run: dev_losses.len(),
        learning_rates,
        dev_losses,
    })
}
