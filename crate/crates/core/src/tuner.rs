//! Joint lag/hyperparameter search for the dense regressor.
//!
//! For every candidate lag a seeded random pool of configurations is run
//! through single-bracket successive halving; the best (lag, configuration)
//! pair then has its batch size refined by full refits.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::nn::mlp::{
    mlp_fit, mlp_init, mlp_predict, MlpConfig, MlpModel, DROPOUT_GRID, LEARNING_RATE_RANGE, UNIT_GRID,
};
use crate::rng::{self, StageRng};
use crate::series::Series;
use crate::supervised::{lag_embed, SupervisedSet};

/// Minimum training rows a lag must leave.
pub const MIN_TRAIN_ROWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunerConfig {
    pub lag_grid: Vec<usize>,
    pub n_candidates: usize,
    /// Epoch budget per rung, strictly increasing.
    pub halving_rungs: Vec<usize>,
    pub keep_fraction: f64,
    pub batch_grid: Vec<usize>,
    /// Batch size used during the search itself.
    pub search_batch_size: usize,
    pub patience: usize,
    /// Epoch budget for the batch-size refits.
    pub final_max_epochs: usize,
    pub seed: u64,
    #[serde(skip, default)]
    pub exec: Exec,
}

impl Default for TunerConfig {
    fn default() -> Self {
        TunerConfig {
            lag_grid: vec![1, 5, 10, 20, 60],
            n_candidates: 16,
            halving_rungs: vec![10, 30, 90],
            keep_fraction: 1.0 / 3.0,
            batch_grid: vec![16, 32, 64, 128],
            search_batch_size: 32,
            patience: 10,
            final_max_epochs: 200,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

impl TunerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.lag_grid.is_empty() || self.lag_grid.windows(2).any(|w| w[0] >= w[1]) || self.lag_grid[0] == 0 {
            return bad("lag grid must be non-empty, positive and strictly increasing");
        }
        if self.n_candidates == 0 {
            return bad("at least one candidate is required");
        }
        if self.halving_rungs.is_empty()
            || self.halving_rungs[0] == 0
            || self.halving_rungs.windows(2).any(|w| w[0] >= w[1])
        {
            return bad("halving rungs must be positive and strictly increasing");
        }
        if !(self.keep_fraction > 0.0 && self.keep_fraction < 1.0) {
            return bad("keep fraction must lie in (0, 1)");
        }
        if self.batch_grid.is_empty() || self.batch_grid.contains(&0) {
            return bad("batch grid must be non-empty and positive");
        }
        if self.search_batch_size == 0 || self.patience == 0 || self.final_max_epochs == 0 {
            return bad("search batch size, patience and final epochs must be positive");
        }
        Ok(())
    }

    /// Survivors entering each rung for a pool of `n_candidates`.
    pub fn survivors_per_rung(&self) -> Vec<usize> {
        let mut alive = self.n_candidates;
        self.halving_rungs
            .iter()
            .map(|_| {
                let now = alive;
                alive = keep_count(alive, self.keep_fraction);
                now
            })
            .collect()
    }

    /// Total epoch budget spent by the search at one lag.
    pub fn budget_per_lag(&self) -> usize {
        self.survivors_per_rung()
            .iter()
            .zip(&self.halving_rungs)
            .map(|(s, e)| s * e)
            .sum()
    }
}

fn keep_count(alive: usize, keep_fraction: f64) -> usize {
    ((alive as f64 * keep_fraction).ceil() as usize).clamp(1, alive)
}

/// Draws one configuration from the search space.
pub fn sample_config(
    rng: &mut StageRng,
    batch_size: usize,
    max_epochs: usize,
    patience: usize,
    seed: u64,
) -> MlpConfig {
    let (lo, hi) = LEARNING_RATE_RANGE;
    let lr = (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp();
    MlpConfig {
        n_hidden_layers: rng.random_range(1..=6),
        units_per_layer: UNIT_GRID[rng.random_range(0..UNIT_GRID.len())],
        dropout_rate: DROPOUT_GRID[rng.random_range(0..DROPOUT_GRID.len())],
        batch_norm: rng.random::<bool>(),
        learning_rate: lr.clamp(lo, hi),
        batch_size,
        max_epochs,
        patience,
        seed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub lag: usize,
    pub candidate_id: usize,
    pub config: MlpConfig,
    /// 0-based rung index.
    pub rung: usize,
    pub epoch_budget: usize,
    pub epochs_run: usize,
    /// `None` when training diverged.
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LagOutcome {
    Searched { best_candidate: usize, best_val_loss: f64 },
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagSummary {
    pub lag: usize,
    pub outcome: LagOutcome,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TunerResult {
    pub best_lag: usize,
    /// Winning configuration, with the refined batch size.
    pub best_config: MlpConfig,
    /// Best final-rung validation loss of the search.
    pub best_validation_loss: f64,
    pub refined_batch_size: usize,
    pub refined_validation_loss: f64,
    /// Validation loss of each batch-size refit (`None` if it failed).
    pub batch_losses: Vec<(usize, Option<f64>)>,
    pub leaderboard: Vec<LeaderboardEntry>,
    pub lags: Vec<LagSummary>,
    pub trained_model: MlpModel,
    /// Embedding at the selected lag, holding the test rows.
    pub supervised: SupervisedSet,
}

impl TunerResult {
    /// Test-segment forecasts in series units.
    pub fn test_predictions(&self) -> Result<Vec<f64>> {
        let z = mlp_predict(&self.trained_model, self.supervised.scaled_test_features().view())?;
        Ok(z.into_iter()
            .map(|v| self.supervised.target_scaler.unscale(v))
            .collect())
    }
}

fn fit_on(set: &SupervisedSet, config: &MlpConfig) -> Result<MlpModel> {
    let model = mlp_init(config, set.lag)?;
    mlp_fit(model, set.scaled_train_features().view(), &set.scaled_train_targets())
}

/// Successive halving at one lag. Returns the leaderboard rows and the index
/// and loss of the winner.
fn search_lag(set: &SupervisedSet, cfg: &TunerConfig, lag_seed: u64) -> (Vec<LeaderboardEntry>, Option<(usize, f64)>) {
    let mut pool_rng = rng::from_seed(lag_seed);
    let pool: Vec<MlpConfig> = (0..cfg.n_candidates)
        .map(|i| {
            sample_config(
                &mut pool_rng,
                cfg.search_batch_size,
                cfg.halving_rungs[0],
                cfg.patience,
                rng::child_seed(lag_seed, i as u64),
            )
        })
        .collect();

    let mut alive: Vec<usize> = (0..pool.len()).collect();
    let mut board = Vec::new();
    let mut last: Vec<(usize, Option<f64>)> = Vec::new();
    for (rung, &epochs) in cfg.halving_rungs.iter().enumerate() {
        let results: Vec<(usize, Option<f64>, usize)> = cfg.exec.map(&alive, |&id| {
            let config = MlpConfig {
                max_epochs: epochs,
                ..pool[id].clone()
            };
            match fit_on(set, &config) {
                Ok(m) => {
                    let h = m.history.as_ref().expect("fitted");
                    (id, Some(h.best_val_loss), h.epochs_run())
                }
                Err(_) => (id, None, 0),
            }
        });
        for (id, loss, run) in &results {
            board.push(LeaderboardEntry {
                lag: set.lag,
                candidate_id: *id,
                config: MlpConfig {
                    max_epochs: epochs,
                    ..pool[*id].clone()
                },
                rung,
                epoch_budget: epochs,
                epochs_run: *run,
                val_loss: *loss,
            });
        }
        let mut ranked: Vec<(usize, Option<f64>)> = results.iter().map(|(id, l, _)| (*id, *l)).collect();
        ranked.sort_by(|a, b| {
            let la = a.1.unwrap_or(f64::INFINITY);
            let lb = b.1.unwrap_or(f64::INFINITY);
            la.total_cmp(&lb).then(a.0.cmp(&b.0))
        });
        last = ranked.clone();
        if rung + 1 < cfg.halving_rungs.len() {
            let keep = keep_count(alive.len(), cfg.keep_fraction);
            alive = ranked.iter().take(keep).map(|(id, _)| *id).collect();
            alive.sort_unstable();
        }
    }
    let winner = last.first().and_then(|(id, l)| l.map(|loss| (*id, loss)));
    (board, winner)
}

/// Fits once per batch size and returns the fitted models in grid order.
fn refit_batches(set: &SupervisedSet, config: &MlpConfig, batch_grid: &[usize], exec: Exec) -> Vec<Result<MlpModel>> {
    exec.map(batch_grid, |&b| {
        fit_on(
            set,
            &MlpConfig {
                batch_size: b,
                ..config.clone()
            },
        )
    })
}

fn pick_batch(batch_grid: &[usize], fits: &[Result<MlpModel>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, fit) in fits.iter().enumerate() {
        let Ok(m) = fit else { continue };
        let loss = m.history.as_ref().expect("fitted").best_val_loss;
        let better = match best {
            None => true,
            Some((j, l)) => loss < l || (loss == l && batch_grid[i] < batch_grid[j]),
        };
        if better {
            best = Some((i, loss));
        }
    }
    best.map(|(i, _)| i)
}

/// Full refit per batch size; returns the batch size with the lowest
/// validation loss (ties go to the smaller batch) and that loss.
pub fn refine_batch_size(set: &SupervisedSet, config: &MlpConfig, batch_grid: &[usize]) -> Result<(usize, f64)> {
    refine_batch_size_with(set, config, batch_grid, Exec::default())
}

pub fn refine_batch_size_with(
    set: &SupervisedSet,
    config: &MlpConfig,
    batch_grid: &[usize],
    exec: Exec,
) -> Result<(usize, f64)> {
    let fits = refit_batches(set, config, batch_grid, exec);
    let i = pick_batch(batch_grid, &fits).ok_or(Error::AllBatchSizesFailed)?;
    let loss = fits[i]
        .as_ref()
        .expect("picked a success")
        .history
        .as_ref()
        .expect("fitted")
        .best_val_loss;
    Ok((batch_grid[i], loss))
}

pub fn tune(series: &Series, cfg: &TunerConfig, test_fraction: f64) -> Result<TunerResult> {
    cfg.validate()?;
    let mut leaderboard = Vec::new();
    let mut lags = Vec::new();
    let mut best: Option<(usize, MlpConfig, f64, SupervisedSet)> = None;

    for &lag in &cfg.lag_grid {
        let set = match lag_embed(series, lag, test_fraction) {
            Ok(set) if set.split_index >= MIN_TRAIN_ROWS => set,
            Ok(set) => {
                lags.push(LagSummary {
                    lag,
                    outcome: LagOutcome::Skipped {
                        reason: format!("only {} training rows", set.split_index),
                    },
                });
                continue;
            }
            Err(e) => {
                lags.push(LagSummary {
                    lag,
                    outcome: LagOutcome::Skipped { reason: e.to_string() },
                });
                continue;
            }
        };
        let lag_seed = rng::child_seed(cfg.seed, lag as u64);
        let (board, winner) = search_lag(&set, cfg, lag_seed);
        match winner {
            Some((id, loss)) => {
                let config = board
                    .iter()
                    .find(|e| e.candidate_id == id)
                    .expect("winner on board")
                    .config
                    .clone();
                lags.push(LagSummary {
                    lag,
                    outcome: LagOutcome::Searched {
                        best_candidate: id,
                        best_val_loss: loss,
                    },
                });
                if best.as_ref().is_none_or(|(_, _, l, _)| loss < *l) {
                    best = Some((lag, config, loss, set));
                }
            }
            None => lags.push(LagSummary {
                lag,
                outcome: LagOutcome::Skipped {
                    reason: "every candidate diverged".into(),
                },
            }),
        }
        leaderboard.extend(board);
    }

    let (best_lag, config, best_loss, set) = best.ok_or(Error::AllLagsSkipped)?;
    let config = MlpConfig {
        max_epochs: cfg.final_max_epochs,
        ..config
    };
    let fits = refit_batches(&set, &config, &cfg.batch_grid, cfg.exec);
    let batch_losses = fits
        .iter()
        .zip(&cfg.batch_grid)
        .map(|(f, b)| {
            (
                *b,
                f.as_ref()
                    .ok()
                    .map(|m| m.history.as_ref().expect("fitted").best_val_loss),
            )
        })
        .collect();
    let i = pick_batch(&cfg.batch_grid, &fits).ok_or(Error::AllBatchSizesFailed)?;
    let trained_model = fits.into_iter().nth(i).expect("index in range")?;
    let refined_validation_loss = trained_model.history.as_ref().expect("fitted").best_val_loss;

    Ok(TunerResult {
        best_lag,
        best_config: trained_model.config.clone(),
        best_validation_loss: best_loss,
        refined_batch_size: cfg.batch_grid[i],
        refined_validation_loss,
        batch_losses,
        leaderboard,
        lags,
        trained_model,
        supervised: set,
    })
}

pub const LEADERBOARD_HEADER: [&str; 13] = [
    "lag",
    "candidate_id",
    "n_hidden_layers",
    "units_per_layer",
    "dropout_rate",
    "batch_norm",
    "learning_rate",
    "batch_size",
    "rung",
    "epoch_budget",
    "epochs_run",
    "val_loss",
    "seed",
];

/// Leaderboard as CSV rows (header first).
pub fn leaderboard_rows(entries: &[LeaderboardEntry]) -> Vec<Vec<String>> {
    let mut rows = vec![LEADERBOARD_HEADER.iter().map(|s| s.to_string()).collect()];
    for e in entries {
        rows.push(vec![
            e.lag.to_string(),
            e.candidate_id.to_string(),
            e.config.n_hidden_layers.to_string(),
            e.config.units_per_layer.to_string(),
            crate::report::fmt_float(e.config.dropout_rate),
            e.config.batch_norm.to_string(),
            crate::report::fmt_float(e.config.learning_rate),
            e.config.batch_size.to_string(),
            e.rung.to_string(),
            e.epoch_budget.to_string(),
            e.epochs_run.to_string(),
            e.val_loss.map(crate::report::fmt_float).unwrap_or_default(),
            e.config.seed.to_string(),
        ]);
    }
    rows
}

pub fn write_leaderboard(entries: &[LeaderboardEntry], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    for row in leaderboard_rows(entries) {
        w.write_record(&row).map_err(|e| Error::io(path, e.into()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
