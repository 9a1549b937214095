//! Random, grid and per-branch greedy search over layer counts, widths and
//! activations, selecting by validation loss.

mod space;

pub use space::{SearchSpace, StackSpace};

use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{train, Dataset, NnError, TrainConfig};
use crate::zoo::{Arch, ModelSpec, ZooError};

#[derive(Debug, Error)]
pub enum TuningError {
    #[error("budget must be >= 1")]
    ZeroBudget,
    #[error("budget {budget} exceeds the {size} configurations available")]
    BudgetExceedsGrid { budget: u64, size: u64 },
    #[error("invalid search space: {0}")]
    Space(String),
    #[error("spec lies outside the search space: {0}")]
    OutsideSpace(String),
    #[error("every trial failed; last error: {0}")]
    AllTrialsFailed(String),
    #[error(transparent)]
    Zoo(#[from] ZooError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("trial log {path}: {source}")]
    Log {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("thread pool: {0}")]
    Pool(String),
}

pub type Result<T> = std::result::Result<T, TuningError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Random,
    Grid,
    Greedy,
}

impl std::str::FromStr for Strategy {
    type Err = TuningError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Strategy::Random),
            "grid" => Ok(Strategy::Grid),
            "greedy" => Ok(Strategy::Greedy),
            other => Err(TuningError::Space(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial_index: usize,
    pub spec: ModelSpec,
    pub seed: u64,
    pub val_mse: f64,
    pub epochs: usize,
    pub param_count: usize,
    /// Wall-clock training time.
    pub seconds: f64,
}

/// Search settings shared by every trial.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub arch: Arch,
    pub budget: u64,
    pub strategy: Strategy,
    pub seed: u64,
    /// Base training settings; each trial replaces the seed with its own.
    pub train: TrainConfig,
    /// Concurrent trials; `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

/// Deterministic per-trial seed.
pub fn trial_seed(search_seed: u64, trial_index: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(splitmix(search_seed) ^ trial_index)
}

fn rank(results: &mut [TrialResult]) {
    results.sort_by(|a, b| {
        a.val_mse
            .total_cmp(&b.val_mse)
            .then(a.param_count.cmp(&b.param_count))
            .then(a.trial_index.cmp(&b.trial_index))
    });
}

fn run_trial(
    index: usize,
    spec: ModelSpec,
    cfg: &SearchConfig,
    train_set: &Dataset,
    val_set: &Dataset,
) -> Result<TrialResult> {
    let seed = trial_seed(cfg.seed, index as u64);
    let start = Instant::now();
    let net = spec.build(seed)?;
    let param_count = net.param_count();
    let tc = TrainConfig { seed, ..cfg.train };
    let (_, history) = train(net, train_set, val_set, &tc)?;
    Ok(TrialResult {
        trial_index: index,
        spec,
        seed,
        val_mse: history.best_val_mse(),
        epochs: history.epochs(),
        param_count,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn run_batch(
    trials: Vec<(usize, ModelSpec)>,
    cfg: &SearchConfig,
    train_set: &Dataset,
    val_set: &Dataset,
) -> Vec<Result<TrialResult>> {
    let go = || {
        trials
            .into_par_iter()
            .map(|(i, spec)| {
                let r = run_trial(i, spec, cfg, train_set, val_set);
                match &r {
                    Ok(t) => info!("trial {i}: val_mse {:.6e} after {} epochs", t.val_mse, t.epochs),
                    Err(e) => warn!("trial {i} failed: {e}"),
                }
                r
            })
            .collect()
    };
    match cfg.workers {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(go),
            Err(e) => vec![Err(TuningError::Pool(e.to_string()))],
        },
        None => go(),
    }
}

fn keep_successes(results: Vec<Result<TrialResult>>) -> Result<Vec<TrialResult>> {
    let mut ok = Vec::with_capacity(results.len());
    let mut last_err = None;
    for r in results {
        match r {
            Ok(t) => ok.push(t),
            Err(e) => last_err = Some(e.to_string()),
        }
    }
    if ok.is_empty() {
        return Err(TuningError::AllTrialsFailed(last_err.unwrap_or_default()));
    }
    Ok(ok)
}

/// Picks `count` distinct indices below `size`, in draw order.
fn sample_indices(rng: &mut ChaCha8Rng, size: u64, count: u64) -> Vec<u64> {
    rand::seq::index::sample(rng, size as usize, count as usize)
        .into_iter()
        .map(|i| i as u64)
        .collect()
}

/// Runs the search and returns successful trials ranked by validation MSE,
/// then parameter count, then trial index.
pub fn run_search(
    space: &SearchSpace,
    cfg: &SearchConfig,
    train_set: &Dataset,
    val_set: &Dataset,
) -> Result<Vec<TrialResult>> {
    space.validate()?;
    if cfg.budget == 0 {
        return Err(TuningError::ZeroBudget);
    }
    let size = space.size(cfg.arch);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut results = match cfg.strategy {
        Strategy::Grid | Strategy::Random => {
            if cfg.budget > size {
                return Err(TuningError::BudgetExceedsGrid {
                    budget: cfg.budget,
                    size,
                });
            }
            let indices: Vec<u64> = if cfg.strategy == Strategy::Grid {
                (0..cfg.budget).collect()
            } else {
                sample_indices(&mut rng, size, cfg.budget)
            };
            let trials = indices
                .into_iter()
                .enumerate()
                .map(|(i, code)| Ok((i, space.decode(cfg.arch, code)?)))
                .collect::<Result<Vec<_>>>()?;
            keep_successes(run_batch(trials, cfg, train_set, val_set))?
        }
        Strategy::Greedy => greedy(space, cfg, &mut rng, train_set, val_set)?,
    };
    rank(&mut results);
    Ok(results)
}

/// Tunes one stage at a time (each branch, then the head) with the other
/// stages held at their current best, starting from the default spec.
fn greedy(
    space: &SearchSpace,
    cfg: &SearchConfig,
    rng: &mut ChaCha8Rng,
    train_set: &Dataset,
    val_set: &Dataset,
) -> Result<Vec<TrialResult>> {
    let stages = space.stages(cfg.arch);
    let mut current = space.default_spec(cfg.arch);
    let total: u64 = stages.iter().map(|s| s.size()).sum();
    if cfg.budget > total {
        return Err(TuningError::BudgetExceedsGrid {
            budget: cfg.budget,
            size: total,
        });
    }
    let n = stages.len() as u64;
    let mut all = Vec::new();
    let mut next_index = 0;
    for (stage, stack_space) in stages.iter().enumerate() {
        let share = cfg.budget / n + u64::from((stage as u64) < cfg.budget % n);
        let share = share.min(stack_space.size());
        if share == 0 {
            continue;
        }
        let trials: Vec<(usize, ModelSpec)> = sample_indices(rng, stack_space.size(), share)
            .into_iter()
            .map(|code| {
                let spec = space.with_stage(&current, stage, stack_space.decode(code));
                next_index += 1;
                (next_index - 1, spec)
            })
            .collect();
        let mut stage_results = keep_successes(run_batch(trials, cfg, train_set, val_set))?;
        rank(&mut stage_results);
        current = stage_results[0].spec.clone();
        all.extend(stage_results);
    }
    Ok(all)
}

/// Writes `trial_index,spec_json,val_mse,epochs,seconds` in trial order.
pub fn write_trial_log(path: impl AsRef<Path>, results: &[TrialResult]) -> Result<()> {
    let path = path.as_ref();
    let err = |source| TuningError::Log {
        path: path.display().to_string(),
        source,
    };
    let mut sorted: Vec<&TrialResult> = results.iter().collect();
    sorted.sort_by_key(|t| t.trial_index);
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["trial_index", "spec_json", "val_mse", "epochs", "seconds"])
        .map_err(err)?;
    for t in sorted {
        let spec = serde_json::to_string(&t.spec).expect("spec serializes");
        w.write_record([
            t.trial_index.to_string(),
            spec,
            t.val_mse.to_string(),
            t.epochs.to_string(),
            format!("{:.3}", t.seconds),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| err(e.into()))?;
    Ok(())
}
