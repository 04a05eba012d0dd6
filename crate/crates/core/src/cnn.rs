//! Small convolutional regressor over GAF images:
//! `[Conv3×3 → ReLU → MaxPool2×2] × n → Flatten → Dense → ReLU → Dense(1)`.

use ndarray::{s, Array1, Array2, Array4, Axis};
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaf::GafImage;
use crate::nn::layers::{Dense, Layer, Relu};
use crate::nn::train::{self, History, TrainOptions, Trainable};
use crate::rng::{self, StageRng};
use crate::supervised::TargetScaler;

pub const MIN_TRAINING_IMAGES: usize = 50;

/// Valid (unpadded), stride-1 2-D convolution.
type Shape4 = (usize, usize, usize, usize);

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Conv2d {
    pub in_channels: usize,
    pub kernel: usize,
    /// `out_channels × (in_channels · kernel · kernel)`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    #[serde(skip)]
    pub grad_weights: Array2<f64>,
    #[serde(skip)]
    pub grad_bias: Array1<f64>,
    #[serde(skip)]
    cache: Option<(Vec<Array2<f64>>, Shape4)>,
}

impl Conv2d {
    pub fn new(in_channels: usize, kernel: usize, weights: Array2<f64>, bias: Array1<f64>) -> Conv2d {
        assert_eq!(weights.ncols(), in_channels * kernel * kernel);
        assert_eq!(weights.nrows(), bias.len());
        Conv2d {
            in_channels,
            kernel,
            grad_weights: Array2::zeros(weights.raw_dim()),
            grad_bias: Array1::zeros(bias.raw_dim()),
            weights,
            bias,
            cache: None,
        }
    }

    pub fn init(in_channels: usize, out_channels: usize, kernel: usize, rng: &mut StageRng) -> Conv2d {
        let fan_in = in_channels * kernel * kernel;
        let limit = (6.0 / fan_in as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
        let w = Array2::from_shape_simple_fn((out_channels, fan_in), || dist.sample(rng));
        Conv2d::new(in_channels, kernel, w, Array1::zeros(out_channels))
    }

    pub fn out_channels(&self) -> usize {
        self.weights.nrows()
    }

    fn im2col(&self, x: &Array4<f64>, b: usize) -> Array2<f64> {
        let (_, c, h, w) = x.dim();
        let k = self.kernel;
        let (ho, wo) = (h + 1 - k, w + 1 - k);
        let mut cols = Array2::zeros((c * k * k, ho * wo));
        for ci in 0..c {
            for ki in 0..k {
                for kj in 0..k {
                    let row = (ci * k + ki) * k + kj;
                    let mut dst = cols.row_mut(row);
                    for oi in 0..ho {
                        for oj in 0..wo {
                            dst[oi * wo + oj] = x[[b, ci, oi + ki, oj + kj]];
                        }
                    }
                }
            }
        }
        cols
    }

    fn apply(&self, x: &Array4<f64>, keep_cols: bool) -> (Array4<f64>, Vec<Array2<f64>>) {
        let (n, c, h, w) = x.dim();
        assert_eq!(c, self.in_channels, "channel mismatch");
        let k = self.kernel;
        let (ho, wo) = (h + 1 - k, w + 1 - k);
        let o = self.out_channels();
        let mut out = Array4::zeros((n, o, ho, wo));
        let mut kept = Vec::new();
        for b in 0..n {
            let cols = self.im2col(x, b);
            let mut y = self.weights.dot(&cols);
            y += &self.bias.view().insert_axis(Axis(1));
            out.slice_mut(s![b, .., .., ..])
                .assign(&y.to_shape((o, ho, wo)).expect("conv output shape"));
            if keep_cols {
                kept.push(cols);
            }
        }
        (out, kept)
    }

    pub fn infer(&self, x: &Array4<f64>) -> Array4<f64> {
        self.apply(x, false).0
    }

    pub fn forward(&mut self, x: &Array4<f64>) -> Array4<f64> {
        let (out, cols) = self.apply(x, true);
        self.cache = Some((cols, x.dim()));
        out
    }

    pub fn backward(&mut self, grad: &Array4<f64>) -> Array4<f64> {
        let (cols, (n, c, h, w)) = self.cache.as_ref().expect("forward before backward");
        let k = self.kernel;
        let (_, o, ho, wo) = grad.dim();
        let mut gw = Array2::zeros(self.weights.raw_dim());
        let mut gb = Array1::zeros(o);
        let mut dx = Array4::zeros((*n, *c, *h, *w));
        for b in 0..*n {
            let g = grad
                .slice(s![b, .., .., ..])
                .to_shape((o, ho * wo))
                .expect("grad shape")
                .into_owned();
            gw += &g.dot(&cols[b].t());
            gb += &g.sum_axis(Axis(1));
            let dcols = self.weights.t().dot(&g);
            for ci in 0..*c {
                for ki in 0..k {
                    for kj in 0..k {
                        let src = dcols.row((ci * k + ki) * k + kj);
                        for oi in 0..ho {
                            for oj in 0..wo {
                                dx[[b, ci, oi + ki, oj + kj]] += src[oi * wo + oj];
                            }
                        }
                    }
                }
            }
        }
        self.grad_weights = gw;
        self.grad_bias = gb;
        dx
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

/// 2×2, stride-2 max pooling; odd trailing rows/columns are dropped.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MaxPool2d {
    #[serde(skip)]
    cache: Option<(Array4<usize>, Shape4)>,
}

impl MaxPool2d {
    fn apply(x: &Array4<f64>) -> (Array4<f64>, Array4<usize>) {
        let (n, c, h, w) = x.dim();
        let (ho, wo) = (h / 2, w / 2);
        let mut out = Array4::zeros((n, c, ho, wo));
        let mut arg = Array4::zeros((n, c, ho, wo));
        for b in 0..n {
            for ch in 0..c {
                for i in 0..ho {
                    for j in 0..wo {
                        let mut best = f64::NEG_INFINITY;
                        let mut at = 0;
                        for di in 0..2 {
                            for dj in 0..2 {
                                let (r, q) = (2 * i + di, 2 * j + dj);
                                let v = x[[b, ch, r, q]];
                                if v > best {
                                    best = v;
                                    at = r * w + q;
                                }
                            }
                        }
                        out[[b, ch, i, j]] = best;
                        arg[[b, ch, i, j]] = at;
                    }
                }
            }
        }
        (out, arg)
    }

    pub fn infer(&self, x: &Array4<f64>) -> Array4<f64> {
        Self::apply(x).0
    }

    pub fn forward(&mut self, x: &Array4<f64>) -> Array4<f64> {
        let (out, arg) = Self::apply(x);
        self.cache = Some((arg, x.dim()));
        out
    }

    /// Routes each incoming gradient to the position that won the max.
    pub fn backward(&mut self, grad: &Array4<f64>) -> Array4<f64> {
        let (arg, (n, c, h, w)) = self.cache.as_ref().expect("forward before backward");
        let mut dx = Array4::zeros((*n, *c, *h, *w));
        for ((b, ch, i, j), g) in grad.indexed_iter() {
            let at = arg[[b, ch, i, j]];
            dx[[b, ch, at / w, at % w]] += g;
        }
        dx
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct ConvBlock {
    conv: Conv2d,
    pool: MaxPool2d,
    #[serde(skip)]
    active: Option<Array4<bool>>,
}

impl ConvBlock {
    fn infer(&self, x: &Array4<f64>) -> Array4<f64> {
        let h = self.conv.infer(x).mapv_into(|v| v.max(0.0));
        self.pool.infer(&h)
    }

    fn forward(&mut self, x: &Array4<f64>) -> Array4<f64> {
        let h = self.conv.forward(x);
        self.active = Some(h.mapv(|v| v > 0.0));
        let h = h.mapv_into(|v| v.max(0.0));
        self.pool.forward(&h)
    }

    fn backward(&mut self, grad: &Array4<f64>) -> Array4<f64> {
        let mut g = self.pool.backward(grad);
        let active = self.active.as_ref().expect("forward before backward");
        g.zip_mut_with(active, |g, a| {
            if !*a {
                *g = 0.0;
            }
        });
        self.conv.backward(&g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub filters: usize,
    pub kernel: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub conv_layers: Vec<ConvSpec>,
    pub dense_units: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            conv_layers: vec![ConvSpec { filters: 8, kernel: 3 }, ConvSpec { filters: 16, kernel: 3 }],
            dense_units: 32,
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 100,
            patience: 10,
            seed: 0,
        }
    }
}

impl CnnConfig {
    /// Side length after every conv/pool stage, or an error if it collapses.
    pub fn output_side(&self, image_size: usize) -> Result<usize> {
        if self.conv_layers.is_empty() {
            return Err(Error::InvalidConfig("at least one conv layer is required".into()));
        }
        let mut side = image_size;
        for spec in &self.conv_layers {
            if spec.filters == 0 || spec.kernel == 0 || spec.kernel > side {
                return Err(Error::InvalidConfig(format!(
                    "conv layer {spec:?} does not fit a {side}×{side} map"
                )));
            }
            side = (side + 1 - spec.kernel) / 2;
            if side == 0 {
                return Err(Error::InvalidConfig(format!(
                    "feature map collapses to zero for {image_size}×{image_size} inputs"
                )));
            }
        }
        Ok(side)
    }

    pub fn validate(&self, image_size: usize) -> Result<()> {
        self.output_side(image_size)?;
        if self.dense_units == 0 || self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::InvalidConfig(
                "dense units, batch size, max epochs and patience must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        Ok(())
    }

    fn train_options(&self) -> TrainOptions {
        TrainOptions {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CnnModel {
    pub config: CnnConfig,
    pub image_size: usize,
    blocks: Vec<ConvBlock>,
    head: Vec<Layer>,
    pub target_scaler: TargetScaler,
    pub history: Option<History>,
}

/// Stacks images into an `(n, 1, W, W)` tensor.
pub fn images_to_tensor(images: &[GafImage]) -> Result<Array4<f64>> {
    let w = images.first().map_or(0, GafImage::size);
    let mut t = Array4::zeros((images.len(), 1, w, w));
    for (i, img) in images.iter().enumerate() {
        if img.size() != w {
            return Err(Error::DimensionMismatch {
                expected: w,
                got: img.size(),
            });
        }
        t.slice_mut(s![i, 0, .., ..]).assign(&img.matrix);
    }
    Ok(t)
}

impl CnnModel {
    pub fn init(config: &CnnConfig, image_size: usize) -> Result<CnnModel> {
        config.validate(image_size)?;
        let side = config.output_side(image_size)?;
        let mut rng = rng::from_seed(rng::child_seed(config.seed, 0));
        let mut channels = 1;
        let blocks = config
            .conv_layers
            .iter()
            .map(|spec| {
                let conv = Conv2d::init(channels, spec.filters, spec.kernel, &mut rng);
                channels = spec.filters;
                ConvBlock {
                    conv,
                    ..ConvBlock::default()
                }
            })
            .collect();
        let flat = channels * side * side;
        let head = vec![
            Layer::Dense(Dense::init(flat, config.dense_units, 6.0, &mut rng)),
            Layer::Relu(Relu::default()),
            Layer::Dense(Dense::init(config.dense_units, 1, 3.0, &mut rng)),
        ];
        Ok(CnnModel {
            config: config.clone(),
            image_size,
            blocks,
            head,
            target_scaler: TargetScaler {
                mean: 0.0,
                std_dev: 1.0,
            },
            history: None,
        })
    }

    pub fn n_params(&self) -> usize {
        self.blocks.iter().map(|b| b.conv.n_params()).sum::<usize>()
            + self.head.iter().map(Layer::n_params).sum::<usize>()
    }

    fn flatten(x: Array4<f64>) -> Array2<f64> {
        let n = x.dim().0;
        let rest = x.len() / n.max(1);
        x.to_shape((n, rest)).expect("flatten").into_owned()
    }

    /// Outputs on the training (scaled-target) scale.
    fn infer_scaled(&self, x: &Array4<f64>) -> Vec<f64> {
        let mut h = x.clone();
        for b in &self.blocks {
            h = b.infer(&h);
        }
        let out = self.head.iter().fold(Self::flatten(h), |z, l| l.infer(&z));
        out.column(0).to_vec()
    }

    /// Predictions in original target units.
    pub fn predict_tensor(&self, x: &Array4<f64>) -> Result<Vec<f64>> {
        let (n, c, h, w) = x.dim();
        if n == 0 {
            return Ok(Vec::new());
        }
        if c != 1 || h != self.image_size || w != self.image_size {
            return Err(Error::DimensionMismatch {
                expected: self.image_size,
                got: h.max(w),
            });
        }
        Ok(self
            .infer_scaled(x)
            .into_iter()
            .map(|z| self.target_scaler.unscale(z))
            .collect())
    }
}

impl Trainable for CnnModel {
    type Data = Array4<f64>;

    fn forward_train(&mut self, data: &Array4<f64>, rows: &[usize], rng: &mut StageRng) -> Vec<f64> {
        let mut h = data.select(Axis(0), rows);
        for b in &mut self.blocks {
            h = b.forward(&h);
        }
        let out = self.head.iter_mut().fold(Self::flatten(h), |z, l| l.forward(z, rng));
        out.column(0).to_vec()
    }

    fn backward(&mut self, grad: &[f64]) {
        let g = Array2::from_shape_vec((grad.len(), 1), grad.to_vec()).expect("column vector");
        let g = self.head.iter_mut().rev().fold(g, |g, l| l.backward(&g));
        let last = self.blocks.last().expect("at least one block");
        let c = last.conv.out_channels();
        let side = (g.ncols() / c).isqrt();
        // `to_shape` copies when the head hands back a column-major gradient
        let mut g4 = g
            .to_shape((grad.len(), c, side, side))
            .expect("flattened block output")
            .into_owned();
        for b in self.blocks.iter_mut().rev() {
            g4 = b.backward(&g4);
        }
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [f64], &[f64])) {
        for b in &mut self.blocks {
            b.conv.visit_params(f);
        }
        for l in &mut self.head {
            l.visit_params(f);
        }
    }

    fn predict_rows(&self, data: &Array4<f64>, rows: &[usize]) -> Vec<f64> {
        self.infer_scaled(&data.select(Axis(0), rows))
    }

    fn all_finite(&self) -> bool {
        self.blocks
            .iter()
            .all(|b| b.conv.weights.iter().chain(b.conv.bias.iter()).all(|v| v.is_finite()))
            && self.head.iter().all(Layer::all_finite)
    }
}

/// Trains on `images` → `targets` (original units; standardised internally
/// with training statistics) under the same early-stopping contract as the
/// dense regressor.
pub fn cnn_fit(config: &CnnConfig, images: &[GafImage], targets: &[f64]) -> Result<CnnModel> {
    if images.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: images.len(),
            got: targets.len(),
        });
    }
    if images.len() < MIN_TRAINING_IMAGES {
        return Err(Error::TooFewObservations {
            needed: MIN_TRAINING_IMAGES,
            got: images.len(),
        });
    }
    let tensor = images_to_tensor(images)?;
    cnn_fit_tensor(config, &tensor, targets)
}

pub fn cnn_fit_tensor(config: &CnnConfig, images: &Array4<f64>, targets: &[f64]) -> Result<CnnModel> {
    let (_, c, h, w) = images.dim();
    if c != 1 || h != w {
        return Err(Error::DimensionMismatch { expected: h, got: w });
    }
    let mut model = CnnModel::init(config, h)?;
    model.target_scaler = TargetScaler::fit(targets);
    let scaled: Vec<f64> = targets.iter().map(|y| model.target_scaler.scale(*y)).collect();
    let mut rng = rng::from_seed(rng::child_seed(config.seed, 1));
    let history = train::train(&mut model, images, &scaled, &config.train_options(), &mut rng)?;
    model.history = Some(history);
    Ok(model)
}

pub fn cnn_predict(model: &CnnModel, images: &[GafImage]) -> Result<Vec<f64>> {
    if images.is_empty() {
        return Ok(Vec::new());
    }
    model.predict_tensor(&images_to_tensor(images)?)
}
