//! Lag embedding, chronological splitting, train-only scaling, the naive
//! persistence benchmark and the forecast metric suite.

use chrono::NaiveDate;
use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::Series;

pub const DEFAULT_TEST_FRACTION: f64 = 0.20;

/// Per-column standardisation fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    /// Population standard deviations of the training columns.
    pub std_devs: Vec<f64>,
    /// Columns with zero training spread; these are centred only.
    pub degenerate: Vec<bool>,
}

impl Scaler {
    pub fn fit(rows: ArrayView2<'_, f64>) -> Scaler {
        let n = rows.nrows() as f64;
        let mut means = Vec::with_capacity(rows.ncols());
        let mut std_devs = Vec::with_capacity(rows.ncols());
        for col in rows.columns() {
            let m = col.sum() / n;
            let v = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
            means.push(m);
            std_devs.push(v.sqrt());
        }
        let degenerate = std_devs.iter().map(|s| *s == 0.0).collect();
        Scaler {
            means,
            std_devs,
            degenerate,
        }
    }

    pub fn transform(&self, rows: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if rows.ncols() != self.means.len() {
            return Err(Error::DimensionMismatch {
                expected: self.means.len(),
                got: rows.ncols(),
            });
        }
        let mut out = rows.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (m, sd) = (self.means[j], self.std_devs[j]);
            if self.degenerate[j] {
                col.mapv_inplace(|x| x - m);
            } else {
                col.mapv_inplace(|x| (x - m) / sd);
            }
        }
        Ok(out)
    }

    pub fn any_degenerate(&self) -> bool {
        self.degenerate.iter().any(|d| *d)
    }
}

/// Affine map of the targets onto unit scale, fitted on training targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScaler {
    pub mean: f64,
    pub std_dev: f64,
}

impl TargetScaler {
    pub fn fit(targets: &[f64]) -> TargetScaler {
        let n = targets.len() as f64;
        let mean = targets.iter().sum::<f64>() / n;
        let var = targets.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        TargetScaler {
            mean,
            std_dev: if sd > 0.0 { sd } else { 1.0 },
        }
    }

    pub fn scale(&self, y: f64) -> f64 {
        (y - self.mean) / self.std_dev
    }

    pub fn unscale(&self, z: f64) -> f64 {
        z * self.std_dev + self.mean
    }
}

/// A lag-embedded series: row `t` holds `[y_{t-1}, …, y_{t-L}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisedSet {
    pub features: Array2<f64>,
    pub targets: Vec<f64>,
    pub target_dates: Vec<NaiveDate>,
    pub lag: usize,
    /// First test row.
    pub split_index: usize,
    pub scaler: Scaler,
    pub target_scaler: TargetScaler,
}

impl SupervisedSet {
    pub fn n_rows(&self) -> usize {
        self.targets.len()
    }

    pub fn train_features(&self) -> ArrayView2<'_, f64> {
        self.features.slice(s![..self.split_index, ..])
    }

    pub fn test_features(&self) -> ArrayView2<'_, f64> {
        self.features.slice(s![self.split_index.., ..])
    }

    pub fn train_targets(&self) -> &[f64] {
        &self.targets[..self.split_index]
    }

    pub fn test_targets(&self) -> &[f64] {
        &self.targets[self.split_index..]
    }

    pub fn test_dates(&self) -> &[NaiveDate] {
        &self.target_dates[self.split_index..]
    }

    /// Standardised training features.
    pub fn scaled_train_features(&self) -> Array2<f64> {
        self.scaler
            .transform(self.train_features())
            .expect("scaler fitted on these columns")
    }

    pub fn scaled_test_features(&self) -> Array2<f64> {
        self.scaler
            .transform(self.test_features())
            .expect("scaler fitted on these columns")
    }

    pub fn scaled_train_targets(&self) -> Vec<f64> {
        self.train_targets()
            .iter()
            .map(|y| self.target_scaler.scale(*y))
            .collect()
    }
}

pub fn split_point(n_rows: usize, test_fraction: f64) -> usize {
    (n_rows as f64 * (1.0 - test_fraction)).floor() as usize
}

pub fn lag_embed(s: &Series, lag: usize, test_fraction: f64) -> Result<SupervisedSet> {
    if lag == 0 {
        return Err(Error::InvalidConfig("lag must be at least 1".into()));
    }
    if !(test_fraction > 0.0 && test_fraction <= 0.5) {
        return Err(Error::InvalidConfig(format!(
            "test fraction must lie in (0, 0.5], got {test_fraction}"
        )));
    }
    let y = s.values();
    let n = y.len();
    if n <= lag + 10 {
        return Err(Error::SeriesTooShort {
            needed: lag + 10,
            got: n,
        });
    }
    let rows = n - lag;
    let features = Array2::from_shape_fn((rows, lag), |(i, j)| y[i + lag - 1 - j]);
    let targets = y[lag..].to_vec();
    let target_dates = s.timestamps()[lag..].to_vec();
    let split_index = split_point(rows, test_fraction);
    let scaler = Scaler::fit(features.slice(s![..split_index, ..]));
    let target_scaler = TargetScaler::fit(&targets[..split_index]);
    Ok(SupervisedSet {
        features,
        targets,
        target_dates,
        lag,
        split_index,
        scaler,
        target_scaler,
    })
}

/// Scales `rows` with the training scaler of `set`.
pub fn apply_scaler(set: &SupervisedSet, rows: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    set.scaler.transform(rows)
}

/// Persistence forecast `ŷ_t = y_{t-1}` for every test row.
pub fn naive_forecast(set: &SupervisedSet) -> Vec<f64> {
    set.test_features().column(0).to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model_label: String,
    pub n_test: usize,
    pub mae: f64,
    pub rmse: f64,
    /// Absent when the actuals have no variance.
    pub r_squared: Option<f64>,
    /// Absent when either side has no variance.
    pub pearson: Option<f64>,
}

pub fn evaluate(predictions: &[f64], actuals: &[f64], label: &str) -> Result<ModelReport> {
    if predictions.len() != actuals.len() {
        return Err(Error::DimensionMismatch {
            expected: actuals.len(),
            got: predictions.len(),
        });
    }
    let n = actuals.len();
    if n < 2 {
        return Err(Error::TooFewObservations { needed: 2, got: n });
    }
    let nf = n as f64;
    let mae = predictions.iter().zip(actuals).map(|(p, a)| (a - p).abs()).sum::<f64>() / nf;
    let sse: f64 = predictions.iter().zip(actuals).map(|(p, a)| (a - p) * (a - p)).sum();
    let rmse = (sse / nf).sqrt();

    let mean_a = actuals.iter().sum::<f64>() / nf;
    let mean_p = predictions.iter().sum::<f64>() / nf;
    let sst: f64 = actuals.iter().map(|a| (a - mean_a) * (a - mean_a)).sum();
    let spp: f64 = predictions.iter().map(|p| (p - mean_p) * (p - mean_p)).sum();
    let spa: f64 = predictions
        .iter()
        .zip(actuals)
        .map(|(p, a)| (p - mean_p) * (a - mean_a))
        .sum();
    let r_squared = (sst > 0.0).then(|| 1.0 - sse / sst);
    let pearson = (sst > 0.0 && spp > 0.0).then(|| (spa / (sst.sqrt() * spp.sqrt())).clamp(-1.0, 1.0));

    Ok(ModelReport {
        model_label: label.to_string(),
        n_test: n,
        mae,
        rmse,
        r_squared,
        pearson,
    })
}
