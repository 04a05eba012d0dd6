//! Mini-batch training with a chronological validation hold-out, MAE loss,
//! Adam and early stopping that restores the best-validation parameters.
//! Shared by the dense and convolutional regressors.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use crate::error::{Error, Result};
use crate::rng::StageRng;

/// Fraction of training rows held out, taken from the end.
pub const VALIDATION_FRACTION: f64 = 0.2;

/// Mean absolute error.
pub fn mae(predictions: &[f64], targets: &[f64]) -> f64 {
    predictions.iter().zip(targets).map(|(p, y)| (p - y).abs()).sum::<f64>() / predictions.len() as f64
}

/// Subgradient of [`mae`] with respect to the predictions; zero at an exact
/// zero residual.
pub fn mae_grad(predictions: &[f64], targets: &[f64]) -> Vec<f64> {
    let n = predictions.len() as f64;
    predictions
        .iter()
        .zip(targets)
        .map(|(p, y)| {
            let e = p - y;
            if e > 0.0 {
                1.0 / n
            } else if e < 0.0 {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect()
}

/// A scalar regressor the trainer can drive.
pub trait Trainable: Clone {
    type Data: ?Sized;

    fn forward_train(&mut self, data: &Self::Data, rows: &[usize], rng: &mut StageRng) -> Vec<f64>;
    /// Back-propagates d(loss)/d(output) through the last training forward.
    fn backward(&mut self, grad: &[f64]);
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [f64], &[f64]));
    fn predict_rows(&self, data: &Self::Data, rows: &[usize]) -> Vec<f64>;
    fn all_finite(&self) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of the mini-batch losses seen during the epoch.
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were restored.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    /// Inference-mode MAE on the fitting rows with the restored parameters.
    pub best_train_loss: f64,
    pub stopped_early: bool,
    pub n_fit_rows: usize,
    pub n_val_rows: usize,
}

impl History {
    pub fn epochs_run(&self) -> usize {
        self.epochs.len()
    }
}

/// Number of leading rows used for fitting when `n` rows are available.
pub fn fit_rows(n: usize) -> usize {
    (n as f64 * (1.0 - VALIDATION_FRACTION)).floor() as usize
}

pub fn train<M: Trainable>(
    model: &mut M,
    data: &M::Data,
    targets: &[f64],
    opts: &TrainOptions,
    rng: &mut StageRng,
) -> Result<History> {
    let n = targets.len();
    let n_fit = fit_rows(n);
    if n_fit == 0 || n_fit == n {
        return Err(Error::TooFewObservations { needed: 5, got: n });
    }
    if opts.batch_size == 0 || opts.max_epochs == 0 {
        return Err(Error::InvalidConfig(
            "batch size and epoch budget must be positive".into(),
        ));
    }
    let val_rows: Vec<usize> = (n_fit..n).collect();
    let val_targets = &targets[n_fit..];
    let mut order: Vec<usize> = (0..n_fit).collect();
    let mut adam = Adam::new(opts.learning_rate);

    let mut epochs = Vec::new();
    let mut best: Option<(M, f64, usize)> = None;
    let mut since_best = 0usize;
    let mut stopped_early = false;
    let mut batch_targets = Vec::with_capacity(opts.batch_size);

    for epoch in 1..=opts.max_epochs {
        order.shuffle(rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(opts.batch_size) {
            batch_targets.clear();
            batch_targets.extend(batch.iter().map(|&i| targets[i]));
            let preds = model.forward_train(data, batch, rng);
            let loss = mae(&preds, &batch_targets);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            loss_sum += loss * batch.len() as f64;
            model.backward(&mae_grad(&preds, &batch_targets));
            adam.step(|f| model.visit_params(f));
        }
        if !model.all_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        let val_loss = mae(&model.predict_rows(data, &val_rows), val_targets);
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n_fit as f64,
            val_loss,
        });
        let improved = best.as_ref().is_none_or(|(_, b, _)| val_loss < *b);
        if improved {
            best = Some((model.clone(), val_loss, epoch));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= opts.patience {
                stopped_early = epoch < opts.max_epochs;
                break;
            }
        }
    }

    let (best_model, best_val_loss, best_epoch) = best.expect("at least one epoch ran");
    *model = best_model;
    let fit_idx: Vec<usize> = (0..n_fit).collect();
    let best_train_loss = mae(&model.predict_rows(data, &fit_idx), &targets[..n_fit]);
    Ok(History {
        epochs,
        best_epoch,
        best_val_loss,
        best_train_loss,
        stopped_early,
        n_fit_rows: n_fit,
        n_val_rows: n - n_fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mae_subgradient() {
        let p = [1.0, 2.0, 3.0, 4.0];
        let y = [0.0, 2.0, 5.0, 4.5];
        assert_eq!(mae(&p, &y), (1.0 + 0.0 + 2.0 + 0.5) / 4.0);
        assert_eq!(mae_grad(&p, &y), vec![0.25, 0.0, -0.25, -0.25]);
    }

    #[test]
    fn fit_rows_is_chronological_prefix() {
        assert_eq!(fit_rows(100), 80);
        assert_eq!(fit_rows(51), 40);
    }
}
