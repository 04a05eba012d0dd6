//! Hand-differentiated neural networks: layers, Adam, the shared trainer and
//! the dense regressor.

pub mod adam;
pub mod layers;
pub mod mlp;
pub mod train;

pub use layers::{BatchNorm, Dense, Dropout, Layer, Mode, Relu};
pub use mlp::{mlp_fit, mlp_forward, mlp_init, mlp_predict, MlpConfig, MlpModel};
pub use train::{EpochRecord, History, TrainOptions};
