//! Dense-network building blocks with hand-derived gradients.
//!
//! Each layer caches what its backward pass needs during a training forward
//! pass. `infer` is the read-only inference path.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::rng::StageRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active, batch statistics in batch norm.
    Train,
    /// Dropout off, running statistics in batch norm.
    Infer,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Dense {
    /// `in × out`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    #[serde(skip)]
    pub grad_weights: Array2<f64>,
    #[serde(skip)]
    pub grad_bias: Array1<f64>,
    #[serde(skip)]
    input: Option<Array2<f64>>,
}

impl Dense {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>) -> Dense {
        Dense {
            grad_weights: Array2::zeros(weights.raw_dim()),
            grad_bias: Array1::zeros(bias.raw_dim()),
            weights,
            bias,
            input: None,
        }
    }

    /// Uniform init with limit `sqrt(gain / fan_in)`; zero bias.
    pub fn init(inputs: usize, outputs: usize, gain: f64, rng: &mut StageRng) -> Dense {
        let limit = (gain / inputs as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
        let w = Array2::from_shape_simple_fn((inputs, outputs), || dist.sample(rng));
        Dense::new(w, Array1::zeros(outputs))
    }

    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn infer(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weights) + &self.bias
    }

    pub fn forward(&mut self, x: Array2<f64>) -> Array2<f64> {
        let out = self.infer(&x);
        self.input = Some(x);
        out
    }

    pub fn backward(&mut self, grad: &Array2<f64>) -> Array2<f64> {
        let x = self.input.as_ref().expect("forward before backward");
        // the product of a transposed view can come back column-major
        self.grad_weights = x.t().dot(grad).as_standard_layout().into_owned();
        self.grad_bias = grad.sum_axis(Axis(0));
        grad.dot(&self.weights.t())
    }

    pub fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(&mut [f64], &[f64])) {
        f(
            self.weights.as_slice_mut().expect("standard layout"),
            self.grad_weights.as_slice().expect("standard layout"),
        );
        f(
            self.bias.as_slice_mut().expect("contiguous"),
            self.grad_bias.as_slice().expect("contiguous"),
        );
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Relu {
    #[serde(skip)]
    active: Option<Array2<bool>>,
}

impl Relu {
    pub fn infer(&self, x: &Array2<f64>) -> Array2<f64> {
        x.mapv(|v| v.max(0.0))
    }

    pub fn forward(&mut self, x: Array2<f64>) -> Array2<f64> {
        self.active = Some(x.mapv(|v| v > 0.0));
        x.mapv_into(|v| v.max(0.0))
    }

    pub fn backward(&mut self, grad: &Array2<f64>) -> Array2<f64> {
        let active = self.active.as_ref().expect("forward before backward");
        let mut g = grad.clone();
        g.zip_mut_with(active, |g, a| {
            if !*a {
                *g = 0.0;
            }
        });
        g
    }
}

/// Inverted dropout: kept units are scaled by `1 / (1 - rate)` in training.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Dropout {
    pub rate: f64,
    #[serde(skip)]
    mask: Option<Array2<f64>>,
}

impl Dropout {
    pub fn new(rate: f64) -> Dropout {
        Dropout { rate, mask: None }
    }

    pub fn forward(&mut self, x: Array2<f64>, rng: &mut StageRng) -> Array2<f64> {
        if self.rate == 0.0 {
            self.mask = None;
            return x;
        }
        let keep = 1.0 - self.rate;
        let mask = Array2::from_shape_simple_fn(
            x.raw_dim(),
            || {
                if rng.random::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            },
        );
        let out = &x * &mask;
        self.mask = Some(mask);
        out
    }

    pub fn backward(&mut self, grad: &Array2<f64>) -> Array2<f64> {
        match &self.mask {
            Some(m) => grad * m,
            None => grad.clone(),
        }
    }
}

/// Per-feature batch normalisation with learned scale and shift.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub momentum: f64,
    pub eps: f64,
    #[serde(skip)]
    pub grad_gamma: Array1<f64>,
    #[serde(skip)]
    pub grad_beta: Array1<f64>,
    #[serde(skip)]
    cache: Option<(Array2<f64>, Array1<f64>)>,
}

pub const BN_MOMENTUM: f64 = 0.99;
pub const BN_EPS: f64 = 1e-3;

impl BatchNorm {
    pub fn new(features: usize) -> BatchNorm {
        BatchNorm {
            gamma: Array1::ones(features),
            beta: Array1::zeros(features),
            running_mean: Array1::zeros(features),
            running_var: Array1::ones(features),
            momentum: BN_MOMENTUM,
            eps: BN_EPS,
            grad_gamma: Array1::zeros(features),
            grad_beta: Array1::zeros(features),
            cache: None,
        }
    }

    pub fn infer(&self, x: &Array2<f64>) -> Array2<f64> {
        let inv = self.running_var.mapv(|v| 1.0 / (v + self.eps).sqrt());
        (x - &self.running_mean) * &(inv * &self.gamma) + &self.beta
    }

    /// Normalises with batch statistics and folds them into the running ones.
    pub fn forward(&mut self, x: Array2<f64>) -> Array2<f64> {
        let n = x.nrows() as f64;
        let mean = x.sum_axis(Axis(0)) / n;
        let centered = x - &mean;
        let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) / n;
        let inv_std = var.mapv(|v| 1.0 / (v + self.eps).sqrt());
        let xhat = centered * &inv_std;
        let out = &xhat * &self.gamma + &self.beta;

        let m = self.momentum;
        self.running_mean = &self.running_mean * m + &mean * (1.0 - m);
        self.running_var = &self.running_var * m + &var * (1.0 - m);
        self.cache = Some((xhat, inv_std));
        out
    }

    pub fn backward(&mut self, grad: &Array2<f64>) -> Array2<f64> {
        let (xhat, inv_std) = self.cache.as_ref().expect("forward before backward");
        let n = grad.nrows() as f64;
        self.grad_beta = grad.sum_axis(Axis(0));
        self.grad_gamma = (grad * xhat).sum_axis(Axis(0));
        let dxhat = grad * &self.gamma;
        let sum_dxhat = dxhat.sum_axis(Axis(0));
        let sum_dxhat_xhat = (&dxhat * xhat).sum_axis(Axis(0));
        let mut dx = dxhat * n - &sum_dxhat - &(xhat * &sum_dxhat_xhat);
        dx *= &(inv_std / n);
        dx
    }

    pub fn n_params(&self) -> usize {
        self.gamma.len() + self.beta.len()
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(&mut [f64], &[f64])) {
        f(
            self.gamma.as_slice_mut().expect("contiguous"),
            self.grad_gamma.as_slice().expect("contiguous"),
        );
        f(
            self.beta.as_slice_mut().expect("contiguous"),
            self.grad_beta.as_slice().expect("contiguous"),
        );
    }
}

/// One stage of a dense network.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layer {
    Dense(Dense),
    BatchNorm(BatchNorm),
    Relu(Relu),
    Dropout(Dropout),
}

impl Layer {
    pub fn infer(&self, x: &Array2<f64>) -> Array2<f64> {
        match self {
            Layer::Dense(l) => l.infer(x),
            Layer::BatchNorm(l) => l.infer(x),
            Layer::Relu(l) => l.infer(x),
            Layer::Dropout(_) => x.clone(),
        }
    }

    pub fn forward(&mut self, x: Array2<f64>, rng: &mut StageRng) -> Array2<f64> {
        match self {
            Layer::Dense(l) => l.forward(x),
            Layer::BatchNorm(l) => l.forward(x),
            Layer::Relu(l) => l.forward(x),
            Layer::Dropout(l) => l.forward(x, rng),
        }
    }

    pub fn backward(&mut self, grad: &Array2<f64>) -> Array2<f64> {
        match self {
            Layer::Dense(l) => l.backward(grad),
            Layer::BatchNorm(l) => l.backward(grad),
            Layer::Relu(l) => l.backward(grad),
            Layer::Dropout(l) => l.backward(grad),
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            Layer::Dense(l) => l.n_params(),
            Layer::BatchNorm(l) => l.n_params(),
            _ => 0,
        }
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(&mut [f64], &[f64])) {
        match self {
            Layer::Dense(l) => l.visit_params(f),
            Layer::BatchNorm(l) => l.visit_params(f),
            _ => {}
        }
    }

    pub fn all_finite(&self) -> bool {
        match self {
            Layer::Dense(l) => l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()),
            Layer::BatchNorm(l) => l
                .gamma
                .iter()
                .chain(l.beta.iter())
                .chain(l.running_mean.iter())
                .chain(l.running_var.iter())
                .all(|v| v.is_finite()),
            _ => true,
        }
    }
}
