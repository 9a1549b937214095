use std::fmt::Write as _;

use log::debug;
use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{mse_grad, mse_loss, Adam, AdamConfig, Network, NnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Consecutive non-improving epochs tolerated; 0 behaves like 1.
    pub early_stop_patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 256,
            max_epochs: 500,
            early_stop_patience: 40,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(NnError::Config(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(NnError::Config("batch_size and max_epochs must be >= 1".into()));
        }
        Ok(())
    }
}

/// Scaled inputs and targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(NnError::LengthMismatch {
                left: x.nrows(),
                right: y.len(),
            });
        }
        if y.is_empty() {
            return Err(NnError::EmptyInput);
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Per-epoch losses of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    /// Mean per-sample training loss over each epoch's mini-batches.
    pub train_mse: Vec<f64>,
    pub val_mse: Vec<f64>,
    /// Zero-based epoch whose parameters were returned.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl History {
    pub fn epochs(&self) -> usize {
        self.val_mse.len()
    }

    pub fn best_val_mse(&self) -> f64 {
        self.val_mse[self.best_epoch]
    }

    /// `epoch,train_mse,val_mse` with one-based epochs.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_mse,val_mse\n");
        for (i, (t, v)) in self.train_mse.iter().zip(&self.val_mse).enumerate() {
            let _ = writeln!(out, "{},{t},{v}", i + 1);
        }
        out
    }
}

/// Mini-batch Adam on MSE with per-epoch shuffling, early stopping on the
/// validation loss, and restoration of the best-validation parameters.
pub fn train(
    mut net: Network,
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
) -> Result<(Network, History)> {
    cfg.validate()?;
    for d in [train_set, val_set] {
        if d.x.ncols() != net.fan_in() {
            return Err(NnError::Shape {
                layer: 0,
                what: "input columns",
                expected: net.fan_in(),
                got: d.x.ncols(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(
        &net,
        AdamConfig {
            learning_rate: cfg.learning_rate,
            ..AdamConfig::default()
        },
    );
    let patience = cfg.early_stop_patience.max(1);
    let n = train_set.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut best = (f64::INFINITY, 0usize, net.clone());
    let mut stale = 0;
    let mut history = History {
        train_mse: Vec::new(),
        val_mse: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
    };

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let x = train_set.x.select(Axis(0), batch);
            let y = train_set.y.select(Axis(0), batch);
            let (pred, cache) = net.forward(x.view())?;
            let loss = mse_loss(&pred, &y)?;
            if !loss.is_finite() {
                return Err(NnError::Divergence { epoch: epoch + 1 });
            }
            total += loss * batch.len() as f64;
            let grads = net.backward(&cache, &mse_grad(&pred, &y)?)?;
            adam.step(&mut net, &grads)?;
        }
        let val = mse_loss(&net.predict(val_set.x.view())?, &val_set.y)?;
        if !val.is_finite() {
            return Err(NnError::Divergence { epoch: epoch + 1 });
        }
        history.train_mse.push(total / n as f64);
        history.val_mse.push(val);
        debug!("epoch {}: train {:.6e} val {val:.6e}", epoch + 1, total / n as f64);

        if val < best.0 {
            best = (val, epoch, net.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    history.best_epoch = best.1;
    Ok((best.2, history))
}
