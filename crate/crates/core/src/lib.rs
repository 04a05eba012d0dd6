//! Unit-root testing, fractional differencing and neural forecasting for
//! univariate price series.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cnn;
pub mod config;
pub mod error;
pub mod exec;
pub mod fracdiff;
pub mod gaf;
pub mod nn;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod series;
pub mod supervised;
pub mod synthetic;
pub mod tuner;
pub mod unit_root;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use exec::Exec;
pub use pipeline::{load_csv, run_pipeline, run_stages, Stage};
pub use series::{acf, log_returns, summary_stats, AcfTable, Series, SummaryStats};
pub use unit_root::{adf_critical_values, adf_test, ols_fit, AdfResult, AdfSpec, OlsFit};
