//! Central finite-difference checks shared by the gradient tests and the
//! acceptance run. Each check builds a random instance from `seed` and returns
//! the worst relative error between analytic and numeric gradients.

#![allow(dead_code)]

use fdcast::cnn::{Conv2d, MaxPool2d};
use fdcast::nn::layers::{BatchNorm, Dense, Relu};
use fdcast::nn::train::{mae, mae_grad};
use ndarray::{Array1, Array2, Array4};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;
pub const TOL: f64 = 1e-5;

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-9 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random2(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || r.random_range(-1.0..1.0))
}

/// Weighted-sum objective `Σ c ⊙ out`, so d(loss)/d(out) = c.
fn weighted<D: ndarray::Dimension>(out: &ndarray::Array<f64, D>, c: &ndarray::Array<f64, D>) -> f64 {
    (out * c).sum()
}

fn worst(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| rel_err(*a, *n))
        .fold(0.0, f64::max)
}

fn numeric_grad(x: &mut [f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + STEP;
            let up = f(x);
            x[i] = orig - STEP;
            let down = f(x);
            x[i] = orig;
            (up - down) / (2.0 * STEP)
        })
        .collect()
}

pub fn dense(seed: u64) -> f64 {
    let mut r = rng(seed);
    let x = random2(&mut r, 5, 4);
    let c = random2(&mut r, 5, 3);
    let mut layer = Dense::new(
        random2(&mut r, 4, 3),
        Array1::from_shape_simple_fn(3, || r.random_range(-1.0..1.0)),
    );
    let _ = layer.forward(x.clone());
    let dx = layer.backward(&c);
    let probe = layer.clone();

    let mut xv = x.as_slice().unwrap().to_vec();
    let num = numeric_grad(&mut xv, |v| {
        let xi = Array2::from_shape_vec((5, 4), v.to_vec()).unwrap();
        weighted(&probe.infer(&xi), &c)
    });
    let mut err = worst(dx.as_slice().unwrap(), &num);

    let mut w = layer.weights.as_slice().unwrap().to_vec();
    let num = numeric_grad(&mut w, |v| {
        let mut l = probe.clone();
        l.weights = Array2::from_shape_vec((4, 3), v.to_vec()).unwrap();
        weighted(&l.infer(&x), &c)
    });
    err = err.max(worst(layer.grad_weights.as_slice().unwrap(), &num));

    let mut b = layer.bias.to_vec();
    let num = numeric_grad(&mut b, |v| {
        let mut l = probe.clone();
        l.bias = Array1::from(v.to_vec());
        weighted(&l.infer(&x), &c)
    });
    err.max(worst(layer.grad_bias.as_slice().unwrap(), &num))
}

pub fn relu(seed: u64) -> f64 {
    let mut r = rng(seed);
    // keep inputs away from the kink
    let x = Array2::from_shape_simple_fn((5, 4), || {
        let v: f64 = r.random_range(0.1..1.0);
        if r.random::<bool>() {
            v
        } else {
            -v
        }
    });
    let c = random2(&mut r, 5, 4);
    let mut layer = Relu::default();
    let _ = layer.forward(x.clone());
    let dx = layer.backward(&c);
    let mut xv = x.as_slice().unwrap().to_vec();
    let num = numeric_grad(&mut xv, |v| {
        let xi = Array2::from_shape_vec((5, 4), v.to_vec()).unwrap();
        weighted(&layer.infer(&xi), &c)
    });
    worst(dx.as_slice().unwrap(), &num)
}

pub fn batchnorm(seed: u64) -> f64 {
    let mut r = rng(seed);
    let x = random2(&mut r, 5, 4) * 3.0 + 0.5;
    let c = random2(&mut r, 5, 4);
    let mut bn = BatchNorm::new(4);
    bn.gamma = Array1::from_shape_simple_fn(4, || r.random_range(0.5..1.5));
    bn.beta = Array1::from_shape_simple_fn(4, || r.random_range(-0.5..0.5));
    let base = bn.clone();
    let _ = bn.forward(x.clone());
    let dx = bn.backward(&c);

    let eval = |layer: &BatchNorm, xi: Array2<f64>| {
        let mut l = layer.clone();
        weighted(&l.forward(xi), &c)
    };
    let mut xv = x.as_slice().unwrap().to_vec();
    let num = numeric_grad(&mut xv, |v| {
        eval(&base, Array2::from_shape_vec((5, 4), v.to_vec()).unwrap())
    });
    let mut err = worst(dx.as_slice().unwrap(), &num);

    let mut g = base.gamma.to_vec();
    let num = numeric_grad(&mut g, |v| {
        let mut l = base.clone();
        l.gamma = Array1::from(v.to_vec());
        eval(&l, x.clone())
    });
    err = err.max(worst(bn.grad_gamma.as_slice().unwrap(), &num));

    let mut b = base.beta.to_vec();
    let num = numeric_grad(&mut b, |v| {
        let mut l = base.clone();
        l.beta = Array1::from(v.to_vec());
        eval(&l, x.clone())
    });
    err.max(worst(bn.grad_beta.as_slice().unwrap(), &num))
}

/// One filter on a 4×4 map, then a multi-channel case.
pub fn conv(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut err: f64 = 0.0;
    for (cin, cout, side) in [(1usize, 1usize, 4usize), (2, 3, 5)] {
        let k = 3;
        let x = Array4::from_shape_simple_fn((2, cin, side, side), || r.random_range(-1.0..1.0));
        let w = Array2::from_shape_simple_fn((cout, cin * k * k), || r.random_range(-1.0..1.0));
        let b = Array1::from_shape_simple_fn(cout, || r.random_range(-1.0..1.0));
        let mut layer = Conv2d::new(cin, k, w.clone(), b.clone());
        let out_side = side + 1 - k;
        let c = Array4::from_shape_simple_fn((2, cout, out_side, out_side), || r.random_range(-1.0..1.0));
        let _ = layer.forward(&x);
        let dx = layer.backward(&c);
        let probe = layer.clone();

        let mut xv = x.as_slice().unwrap().to_vec();
        let shape = x.dim();
        let num = numeric_grad(&mut xv, |v| {
            let xi = Array4::from_shape_vec(shape, v.to_vec()).unwrap();
            weighted(&probe.infer(&xi), &c)
        });
        err = err.max(worst(dx.as_slice().unwrap(), &num));

        let mut wv = w.as_slice().unwrap().to_vec();
        let num = numeric_grad(&mut wv, |v| {
            let l = Conv2d::new(cin, k, Array2::from_shape_vec(w.dim(), v.to_vec()).unwrap(), b.clone());
            weighted(&l.infer(&x), &c)
        });
        err = err.max(worst(layer.grad_weights.as_slice().unwrap(), &num));

        let mut bv = b.to_vec();
        let num = numeric_grad(&mut bv, |v| {
            let l = Conv2d::new(cin, k, w.clone(), Array1::from(v.to_vec()));
            weighted(&l.infer(&x), &c)
        });
        err = err.max(worst(layer.grad_bias.as_slice().unwrap(), &num));
    }
    err
}

/// Also checks that the routed gradient sums to the incoming one.
pub fn maxpool(seed: u64) -> f64 {
    let mut r = rng(seed);
    // distinct values spaced well beyond the probe step, so no ties
    let mut vals: Vec<f64> = (0..2 * 2 * 5 * 5).map(|i| i as f64 * 0.01).collect();
    vals.shuffle(&mut r);
    let x = Array4::from_shape_vec((2, 2, 5, 5), vals).unwrap();
    let c = Array4::from_shape_simple_fn((2, 2, 2, 2), || r.random_range(-1.0..1.0));
    let mut pool = MaxPool2d::default();
    let _ = pool.forward(&x);
    let dx = pool.backward(&c);
    assert!((dx.sum() - c.sum()).abs() < 1e-12, "pooled gradient mass changed");

    let probe = MaxPool2d::default();
    let mut xv = x.as_slice().unwrap().to_vec();
    let num = numeric_grad(&mut xv, |v| {
        let xi = Array4::from_shape_vec((2, 2, 5, 5), v.to_vec()).unwrap();
        weighted(&probe.infer(&xi), &c)
    });
    worst(dx.as_slice().unwrap(), &num)
}

pub fn mae_loss(seed: u64) -> f64 {
    let mut r = rng(seed);
    let y: Vec<f64> = (0..8).map(|_| r.random_range(-1.0..1.0)).collect();
    let mut p: Vec<f64> = y
        .iter()
        .map(|v| v + if r.random::<bool>() { 0.3 } else { -0.3 })
        .collect();
    let analytic = mae_grad(&p, &y);
    let num = numeric_grad(&mut p, |v| mae(v, &y));
    worst(&analytic, &num)
}
