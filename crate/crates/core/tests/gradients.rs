//! Central finite-difference checks of every hand-derived backward pass.

mod common;

use common::TOL;
use fdcast::nn::layers::Dropout;
use fdcast::rng;
use ndarray::Array2;

fn all_seeds(label: &str, check: fn(u64) -> f64) {
    for seed in 0..5 {
        let err = check(seed);
        assert!(err < TOL, "{label} seed {seed}: worst relative error {err:e}");
    }
}

#[test]
fn dense_gradients() {
    all_seeds("dense", common::dense);
}

#[test]
fn relu_gradients() {
    all_seeds("relu", common::relu);
}

#[test]
fn batchnorm_gradients_in_batch_mode() {
    all_seeds("batch norm", common::batchnorm);
}

#[test]
fn conv_gradients() {
    all_seeds("conv", common::conv);
}

#[test]
fn maxpool_gradients() {
    all_seeds("max pool", common::maxpool);
}

#[test]
fn mae_subgradient_away_from_zero() {
    all_seeds("mae", common::mae_loss);
}

#[test]
fn dropout_off_is_identity_gradient() {
    let x = Array2::from_shape_fn((5, 4), |(i, j)| i as f64 - 0.5 * j as f64);
    let c = Array2::from_shape_fn((5, 4), |(i, j)| (i * j) as f64 * 0.1);
    let mut d = Dropout::new(0.0);
    let mut stream = rng::from_seed(0);
    assert_eq!(d.forward(x.clone(), &mut stream), x);
    assert_eq!(d.backward(&c), c);
}
