//! Augmented Dickey-Fuller unit-root testing on top of a QR least-squares core.

mod mackinnon;
mod ols;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::Series;

pub use mackinnon::{critical_values_for, p_value, raw_p_value, CriticalValues, P_CEIL, P_FLOOR};
pub use ols::{aic, ols_fit, OlsFit};

use ols::Qr;

/// Deterministic terms in the test regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AdfSpec {
    /// Intercept only (`c`).
    Constant,
    /// Intercept and linear trend (`ct`).
    ConstantTrend,
}

impl AdfSpec {
    pub const ALL: [AdfSpec; 2] = [AdfSpec::Constant, AdfSpec::ConstantTrend];

    fn n_deterministic(self) -> usize {
        match self {
            AdfSpec::Constant => 1,
            AdfSpec::ConstantTrend => 2,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            AdfSpec::Constant => "c",
            AdfSpec::ConstantTrend => "ct",
        }
    }
}

impl fmt::Display for AdfSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for AdfSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "c" | "constant" => Ok(AdfSpec::Constant),
            "ct" | "constant_trend" | "constanttrend" => Ok(AdfSpec::ConstantTrend),
            other => Err(Error::UnsupportedSpec(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    /// t-ratio on the lagged level.
    pub statistic: f64,
    pub p_value: f64,
    /// True when the approximation fell outside its range and was clamped.
    pub p_value_clamped: bool,
    pub lags_used: usize,
    /// Largest lag order searched.
    pub max_lag: usize,
    /// Observations in the final regression.
    pub n_obs: usize,
    pub critical_values: CriticalValues,
    /// AIC of the final regression.
    pub aic: f64,
    pub spec: AdfSpec,
}

/// Schwert's rule `floor(12 (n/100)^(1/4))`.
pub fn schwert_max_lag(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// Critical values at the 1/5/10% levels for a regression on `n_obs` rows.
pub fn adf_critical_values(n_obs: usize, spec: AdfSpec) -> Result<CriticalValues> {
    if n_obs < 20 {
        return Err(Error::TooFewObservations { needed: 20, got: n_obs });
    }
    Ok(critical_values_for(Some(n_obs), spec))
}

/// Regressors of `Δy_t` with `max_lag` lagged differences, in the order
/// `[const, (trend), y_{t-1}, Δy_{t-1}, …, Δy_{t-max_lag}]`.
fn adf_design(y: &[f64], spec: AdfSpec, max_lag: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    let rows = max_lag..dy.len();
    let nobs = rows.len();
    let mut columns = Vec::with_capacity(spec.n_deterministic() + 1 + max_lag);
    columns.push(vec![1.0; nobs]);
    if spec == AdfSpec::ConstantTrend {
        columns.push((1..=nobs).map(|t| t as f64).collect());
    }
    columns.push(rows.clone().map(|i| y[i]).collect());
    for lag in 1..=max_lag {
        columns.push(rows.clone().map(|i| dy[i - lag]).collect());
    }
    (columns, dy[max_lag..].to_vec())
}

/// Augmented Dickey-Fuller test of the unit-root null.
///
/// The lag order minimises AIC over `0..=max_lag`, with every candidate fit on
/// the common sample implied by `max_lag`; the chosen order is then refit on
/// the largest sample it allows. `max_lag` defaults to Schwert's rule.
pub fn adf_test(s: &Series, spec: AdfSpec, max_lag: Option<usize>) -> Result<AdfResult> {
    adf_test_values(s.values(), spec, max_lag)
}

pub fn adf_test_values(y: &[f64], spec: AdfSpec, max_lag: Option<usize>) -> Result<AdfResult> {
    let n = y.len();
    let ndet = spec.n_deterministic();
    let max_lag = match max_lag {
        Some(m) => m,
        None => schwert_max_lag(n).min((n / 2).saturating_sub(ndet + 1)),
    };
    if n < max_lag + 10 {
        return Err(Error::TooFewObservations {
            needed: max_lag + 10,
            got: n,
        });
    }

    let (columns, response) = adf_design(y, spec, max_lag);
    let qr = Qr::new(columns, &response)?;
    let nobs = response.len();
    let mut best = (f64::INFINITY, 0usize);
    for p in 0..=max_lag {
        let k = ndet + 1 + p;
        let ic = aic(qr.prefix_rss(k), nobs, k);
        if ic < best.0 {
            best = (ic, p);
        }
    }
    let lags_used = best.1;

    let (columns, response) = adf_design(y, spec, lags_used);
    let k = columns.len();
    let qr = Qr::new(columns.clone(), &response)?;
    let coefficients = qr.prefix_coefficients(k);
    let residuals = (0..response.len())
        .map(|i| response[i] - columns.iter().zip(&coefficients).map(|(c, b)| c[i] * b).sum::<f64>())
        .collect();
    let rss = qr.prefix_rss(k);
    let fit = ols::finish(&qr, k, coefficients, residuals, rss);

    let statistic = fit.t_stat(ndet);
    let (p_value, p_value_clamped) = p_value(statistic, spec);
    Ok(AdfResult {
        statistic,
        p_value,
        p_value_clamped,
        lags_used,
        max_lag,
        n_obs: fit.n_obs,
        critical_values: critical_values_for(Some(fit.n_obs), spec),
        aic: fit.aic,
        spec,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn walk(seed: u64, n: usize) -> Vec<f64> {
        noise(seed, n)
            .into_iter()
            .scan(0.0, |acc, e| {
                *acc += e;
                Some(*acc)
            })
            .collect()
    }

    #[test]
    fn spec_parsing() {
        assert_eq!("c".parse::<AdfSpec>().unwrap(), AdfSpec::Constant);
        assert_eq!("CT".parse::<AdfSpec>().unwrap(), AdfSpec::ConstantTrend);
        assert!(matches!("n".parse::<AdfSpec>(), Err(Error::UnsupportedSpec(_))));
    }

    #[test]
    fn schwert_rule() {
        assert_eq!(schwert_max_lag(100), 12);
        assert_eq!(schwert_max_lag(2000), 25);
        assert_eq!(schwert_max_lag(500), 17);
    }

    #[test]
    fn critical_values_need_twenty_rows() {
        assert!(adf_critical_values(19, AdfSpec::Constant).is_err());
        let cv = adf_critical_values(1992, AdfSpec::ConstantTrend).unwrap();
        assert_abs_diff_eq!(cv.five_pct, -3.4127, epsilon = 1e-3);
    }

    #[test]
    fn final_regression_matches_generic_ols() {
        let y = walk(11, 300);
        let res = adf_test_values(&y, AdfSpec::ConstantTrend, Some(6)).unwrap();
        let (cols, resp) = adf_design(&y, AdfSpec::ConstantTrend, res.lags_used);
        let x = Array2::from_shape_fn((resp.len(), cols.len()), |(i, j)| cols[j][i]);
        let fit = ols_fit(&x, &resp).unwrap();
        assert_abs_diff_eq!(res.statistic, fit.t_stat(2), epsilon = 1e-10);
        assert_eq!(res.n_obs, resp.len());
        assert_eq!(res.n_obs, 299 - res.lags_used);
    }

    #[test]
    fn lag_selection_matches_exhaustive_refits() {
        let y = walk(5, 400);
        let max_lag = 8;
        let res = adf_test_values(&y, AdfSpec::Constant, Some(max_lag)).unwrap();
        let (cols, resp) = adf_design(&y, AdfSpec::Constant, max_lag);
        let mut best = (f64::INFINITY, 0);
        for p in 0..=max_lag {
            let x = Array2::from_shape_fn((resp.len(), 2 + p), |(i, j)| cols[j][i]);
            let fit = ols_fit(&x, &resp).unwrap();
            if fit.aic < best.0 {
                best = (fit.aic, p);
            }
        }
        assert_eq!(res.lags_used, best.1);
    }

    #[test]
    fn affine_invariance() {
        let y = walk(9, 500);
        let z: Vec<f64> = y.iter().map(|v| 3.7 * v - 12.0).collect();
        for spec in AdfSpec::ALL {
            let a = adf_test_values(&y, spec, None).unwrap();
            let b = adf_test_values(&z, spec, None).unwrap();
            assert_abs_diff_eq!(a.statistic, b.statistic, epsilon = 1e-8);
            assert_eq!(a.lags_used, b.lags_used);
        }
    }

    #[test]
    fn white_noise_rejects_walk_does_not() {
        let e = adf_test_values(&noise(1, 1000), AdfSpec::Constant, None).unwrap();
        assert!(e.p_value < 0.01);
        let w = adf_test_values(&walk(2, 1000), AdfSpec::Constant, None).unwrap();
        assert!(w.p_value > 0.01);
        assert!(w.critical_values.one_pct < w.critical_values.five_pct);
        assert!(w.critical_values.five_pct < w.critical_values.ten_pct);
        assert!(w.critical_values.ten_pct < 0.0);
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            adf_test_values(&[1.0, 2.0, 3.0], AdfSpec::Constant, Some(2)),
            Err(Error::TooFewObservations { .. })
        ));
    }
}
