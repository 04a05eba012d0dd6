//! Fixed-window fractional differencing `(1 - L)^d` and the search for the
//! smallest order that makes a series pass the ADF test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::series::Series;
use crate::unit_root::{adf_test_values, AdfSpec};

/// Default weight-magnitude cutoff.
pub const DEFAULT_THRESHOLD: f64 = 1e-5;
/// Default cap on the number of generated weights.
pub const DEFAULT_MAX_TERMS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FracDiffSpec {
    pub d: f64,
    pub threshold: f64,
    /// `w_0 ..= w_K`.
    pub weights: Vec<f64>,
    /// K, the largest lag carrying a retained weight.
    pub truncation_lag: usize,
    /// Set when `max_terms` ran out before a weight fell below `threshold`.
    pub threshold_never_reached: bool,
}

/// Binomial weights `w_k = -w_{k-1} (d - k + 1) / k`, kept while
/// `|w_k| >= threshold`.
pub fn fracdiff_weights(d: f64, threshold: f64, max_terms: usize) -> Result<FracDiffSpec> {
    if !(0.0..=2.0).contains(&d) {
        return Err(Error::InvalidConfig(format!("d must lie in [0, 2], got {d}")));
    }
    if !(threshold > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    if max_terms == 0 {
        return Err(Error::InvalidConfig("max_terms must be at least 1".into()));
    }
    let mut weights = vec![1.0];
    let mut reached = false;
    let mut k = 1usize;
    while weights.len() < max_terms {
        let next = -weights[k - 1] * (d - k as f64 + 1.0) / k as f64;
        if next.abs() < threshold {
            reached = true;
            break;
        }
        weights.push(next);
        k += 1;
    }
    if !reached {
        // The cap may coincide with the stopping point.
        let next = -weights[k - 1] * (d - k as f64 + 1.0) / k as f64;
        reached = next.abs() < threshold;
    }
    Ok(FracDiffSpec {
        d,
        threshold,
        truncation_lag: weights.len() - 1,
        weights,
        threshold_never_reached: !reached,
    })
}

/// `out_t = Σ_{k=0..K} w_k x_{t-k}` for every `t >= K`, stamped with the dates
/// of the `(K+1)`-th observation onwards.
pub fn fracdiff_apply(s: &Series, spec: &FracDiffSpec) -> Result<Series> {
    let values = fracdiff_values(s.values(), spec)?;
    let k = spec.truncation_lag;
    Series::new(
        format!("{}_fd{}", s.name(), spec.d),
        s.timestamps()[k..].to_vec(),
        values,
    )
}

pub fn fracdiff_values(x: &[f64], spec: &FracDiffSpec) -> Result<Vec<f64>> {
    let k = spec.truncation_lag;
    let n = x.len();
    if n <= k {
        return Err(Error::SeriesTooShort { needed: k, got: n });
    }
    let w = &spec.weights;
    Ok((k..n)
        .map(|t| w.iter().enumerate().map(|(j, wj)| wj * x[t - j]).sum())
        .collect())
}

/// Default candidate orders `0.00, 0.05, …, 1.00`.
pub fn default_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 * 0.05).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DstarPoint {
    pub d: f64,
    pub truncation_lag: usize,
    /// `None` when the transformed series was too short to test.
    pub p_value: Option<f64>,
    pub statistic: Option<f64>,
    pub n_obs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DstarSearchResult {
    pub grid: Vec<f64>,
    pub p_values: Vec<Option<f64>>,
    pub points: Vec<DstarPoint>,
    pub d_star: Option<f64>,
    pub significance_level: f64,
    pub spec: AdfSpec,
}

/// Smallest grid order whose ADF p-value is at or below `significance`.
pub fn dstar_search(
    s: &Series,
    grid: &[f64],
    significance: f64,
    threshold: f64,
    spec: AdfSpec,
) -> Result<DstarSearchResult> {
    dstar_search_with(s, grid, significance, threshold, spec, Exec::default())
}

pub fn dstar_search_with(
    s: &Series,
    grid: &[f64],
    significance: f64,
    threshold: f64,
    spec: AdfSpec,
    exec: Exec,
) -> Result<DstarSearchResult> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("d grid is empty".into()));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) || grid.iter().any(|d| !(0.0..=1.0).contains(d)) {
        return Err(Error::InvalidConfig(
            "d grid must be sorted ascending within [0, 1]".into(),
        ));
    }
    if !(significance > 0.0 && significance < 0.5) {
        return Err(Error::InvalidConfig(format!(
            "significance must lie in (0, 0.5), got {significance}"
        )));
    }
    let specs = grid
        .iter()
        .map(|&d| fracdiff_weights(d, threshold, DEFAULT_MAX_TERMS))
        .collect::<Result<Vec<_>>>()?;

    let points: Vec<DstarPoint> = exec.map(&specs, |fd| {
        let tested = fracdiff_values(s.values(), fd).and_then(|x| adf_test_values(&x, spec, None));
        match tested {
            Ok(r) => DstarPoint {
                d: fd.d,
                truncation_lag: fd.truncation_lag,
                p_value: Some(r.p_value),
                statistic: Some(r.statistic),
                n_obs: Some(r.n_obs),
            },
            Err(_) => DstarPoint {
                d: fd.d,
                truncation_lag: fd.truncation_lag,
                p_value: None,
                statistic: None,
                n_obs: None,
            },
        }
    });
    let d_star = points
        .iter()
        .find(|p| p.p_value.is_some_and(|pv| pv <= significance))
        .map(|p| p.d);
    Ok(DstarSearchResult {
        grid: grid.to_vec(),
        p_values: points.iter().map(|p| p.p_value).collect(),
        points,
        d_star,
        significance_level: significance,
        spec,
    })
}
