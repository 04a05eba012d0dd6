//! Feed-forward regressor: `[Dense → (BatchNorm) → ReLU → (Dropout)] × K → Dense(1)`.

use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::layers::{BatchNorm, Dense, Dropout, Layer, Relu};
use super::train::{self, History, TrainOptions, Trainable};
use crate::error::{Error, Result};
use crate::rng::{self, StageRng};

pub const UNIT_GRID: [usize; 5] = [16, 32, 64, 128, 256];
pub const DROPOUT_GRID: [f64; 4] = [0.0, 0.1, 0.2, 0.3];
pub const MAX_HIDDEN_LAYERS: usize = 6;
pub const LEARNING_RATE_RANGE: (f64, f64) = (1e-4, 5e-3);
pub const MIN_TRAINING_ROWS: usize = 50;

const INIT_STREAM: u64 = 0;
const FIT_STREAM: u64 = 1;
const FORWARD_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub n_hidden_layers: usize,
    pub units_per_layer: usize,
    pub dropout_rate: f64,
    pub batch_norm: bool,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            n_hidden_layers: 2,
            units_per_layer: 64,
            dropout_rate: 0.0,
            batch_norm: false,
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 200,
            patience: 10,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(1..=MAX_HIDDEN_LAYERS).contains(&self.n_hidden_layers) {
            return bad(format!("hidden layers must be 1..=6, got {}", self.n_hidden_layers));
        }
        if !UNIT_GRID.contains(&self.units_per_layer) {
            return bad(format!(
                "units per layer must be one of {UNIT_GRID:?}, got {}",
                self.units_per_layer
            ));
        }
        if !DROPOUT_GRID.iter().any(|r| (r - self.dropout_rate).abs() < 1e-12) {
            return bad(format!(
                "dropout must be one of {DROPOUT_GRID:?}, got {}",
                self.dropout_rate
            ));
        }
        let (lo, hi) = LEARNING_RATE_RANGE;
        if !(self.learning_rate >= lo * (1.0 - 1e-12) && self.learning_rate <= hi * (1.0 + 1e-12)) {
            return bad(format!(
                "learning rate must lie in [{lo}, {hi}], got {}",
                self.learning_rate
            ));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return bad("batch size, max epochs and patience must be positive".into());
        }
        Ok(())
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpModel {
    pub config: MlpConfig,
    pub input_dim: usize,
    pub layers: Vec<Layer>,
    pub history: Option<History>,
    #[serde(skip)]
    forward_rng: Option<StageRng>,
}

impl MlpModel {
    /// Wraps an arbitrary layer stack. The stack must end in a single output.
    pub fn from_layers(config: MlpConfig, input_dim: usize, layers: Vec<Layer>) -> MlpModel {
        MlpModel {
            config,
            input_dim,
            layers,
            history: None,
            forward_rng: None,
        }
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Layer::n_params).sum()
    }

    pub fn is_fitted(&self) -> bool {
        self.history.is_some()
    }

    fn check_dim(&self, x: &ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.ncols(),
            });
        }
        Ok(())
    }

    fn infer(&self, x: Array2<f64>) -> Vec<f64> {
        let out = self.layers.iter().fold(x, |h, l| l.infer(&h));
        out.column(0).to_vec()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<MlpModel> {
        let mut model: MlpModel = serde_json::from_str(text)?;
        model.forward_rng = None;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<MlpModel> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        MlpModel::from_json(&text)
    }
}

impl Trainable for MlpModel {
    type Data = Array2<f64>;

    fn forward_train(&mut self, data: &Array2<f64>, rows: &[usize], rng: &mut StageRng) -> Vec<f64> {
        let x = data.select(Axis(0), rows);
        let out = self.layers.iter_mut().fold(x, |h, l| l.forward(h, rng));
        out.column(0).to_vec()
    }

    fn backward(&mut self, grad: &[f64]) {
        let g = Array2::from_shape_vec((grad.len(), 1), grad.to_vec()).expect("column vector");
        self.layers.iter_mut().rev().fold(g, |g, l| l.backward(&g));
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [f64], &[f64])) {
        for l in &mut self.layers {
            l.visit_params(f);
        }
    }

    fn predict_rows(&self, data: &Array2<f64>, rows: &[usize]) -> Vec<f64> {
        self.infer(data.select(Axis(0), rows))
    }

    fn all_finite(&self) -> bool {
        self.layers.iter().all(Layer::all_finite)
    }
}

/// Builds a fresh network with fan-in-scaled uniform weights and zero biases.
pub fn mlp_init(config: &MlpConfig, input_dim: usize) -> Result<MlpModel> {
    config.validate()?;
    if input_dim == 0 {
        return Err(Error::InvalidConfig("input dimension must be at least 1".into()));
    }
    let mut rng = rng::from_seed(rng::child_seed(config.seed, INIT_STREAM));
    let mut layers = Vec::new();
    let mut width = input_dim;
    for _ in 0..config.n_hidden_layers {
        layers.push(Layer::Dense(Dense::init(width, config.units_per_layer, 6.0, &mut rng)));
        if config.batch_norm {
            layers.push(Layer::BatchNorm(BatchNorm::new(config.units_per_layer)));
        }
        layers.push(Layer::Relu(Relu::default()));
        if config.dropout_rate > 0.0 {
            layers.push(Layer::Dropout(Dropout::new(config.dropout_rate)));
        }
        width = config.units_per_layer;
    }
    layers.push(Layer::Dense(Dense::init(width, 1, 3.0, &mut rng)));
    Ok(MlpModel::from_layers(config.clone(), input_dim, layers))
}

/// One forward pass. Training mode samples dropout masks from the model's own
/// stream and updates batch-norm running statistics.
pub fn mlp_forward(model: &mut MlpModel, batch: ArrayView2<'_, f64>, training: bool) -> Result<Vec<f64>> {
    model.check_dim(&batch)?;
    if !training {
        return Ok(model.infer(batch.to_owned()));
    }
    let mut rng = model
        .forward_rng
        .take()
        .unwrap_or_else(|| rng::from_seed(rng::child_seed(model.config.seed, FORWARD_STREAM)));
    let out = model
        .layers
        .iter_mut()
        .fold(batch.to_owned(), |h, l| l.forward(h, &mut rng));
    model.forward_rng = Some(rng);
    Ok(out.column(0).to_vec())
}

/// Trains with MAE loss and Adam. The last 20% of rows (chronologically) are
/// held out for early stopping, and the best-validation parameters are kept.
pub fn mlp_fit(mut model: MlpModel, features: ArrayView2<'_, f64>, targets: &[f64]) -> Result<MlpModel> {
    model.config.validate()?;
    model.check_dim(&features)?;
    if features.nrows() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: features.nrows(),
            got: targets.len(),
        });
    }
    if targets.len() < MIN_TRAINING_ROWS {
        return Err(Error::TooFewObservations {
            needed: MIN_TRAINING_ROWS,
            got: targets.len(),
        });
    }
    let mut rng = rng::from_seed(rng::child_seed(model.config.seed, FIT_STREAM));
    let data = features.to_owned();
    let opts = model.config.train_options();
    let history = train::train(&mut model, &data, targets, &opts, &mut rng)?;
    model.history = Some(history);
    Ok(model)
}

/// Inference-mode predictions, one per row.
pub fn mlp_predict(model: &MlpModel, features: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    if features.nrows() == 0 {
        return Ok(Vec::new());
    }
    model.check_dim(&features)?;
    Ok(model.infer(features.to_owned()))
}
