//! The time-series value type and its descriptive diagnostics.

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A univariate, strictly time-ordered series of finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    name: String,
    timestamps: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl Series {
    pub fn new(name: impl Into<String>, timestamps: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: timestamps.len(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { index });
        }
        if let Some(i) = timestamps.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::UnorderedTimestamps { index: i + 1 });
        }
        Ok(Series {
            name: name.into(),
            timestamps,
            values,
        })
    }

    /// Builds a series labelled with consecutive calendar days from `start`.
    pub fn from_values(name: impl Into<String>, start: NaiveDate, values: Vec<f64>) -> Result<Self> {
        let timestamps = (0..values.len()).map(|i| start + Days::new(i as u64)).collect();
        Series::new(name, timestamps, values)
    }

    /// Same as [`Series::from_values`] starting at 2000-01-01.
    pub fn from_slice(name: impl Into<String>, values: &[f64]) -> Result<Self> {
        Series::from_values(name, default_start(), values.to_vec())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn timestamps(&self) -> &[NaiveDate] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Same timestamps, new values. Used by transforms that keep the index.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Series::new(self.name.clone(), self.timestamps.clone(), values)
    }

    /// Keeps the observations at positions `start..`.
    pub fn tail_from(&self, start: usize) -> Series {
        Series {
            name: self.name.clone(),
            timestamps: self.timestamps[start..].to_vec(),
            values: self.values[start..].to_vec(),
        }
    }
}

pub(crate) fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub p1: f64,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
    pub p99: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
    pub percentiles: Percentiles,
    /// Adjusted Fisher-Pearson skewness; NaN when n < 3.
    pub skewness: f64,
    /// Adjusted excess kurtosis; NaN when n < 4.
    pub excess_kurtosis: f64,
    /// Largest peak-to-trough decline as a non-positive fraction. `None` when
    /// the series has non-positive values and drawdown is undefined.
    pub max_drawdown: Option<f64>,
}

pub fn summary_stats(s: &Series) -> Result<SummaryStats> {
    let v = s.values();
    let n = v.len();
    if n < 2 {
        return Err(Error::TooFewObservations { needed: 2, got: n });
    }
    let nf = n as f64;
    let mean = v.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in v {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let std_dev = (m2 / (nf - 1.0)).sqrt();
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);

    let skewness = if n < 3 {
        f64::NAN
    } else if m2 == 0.0 {
        0.0
    } else {
        let g1 = m3 / m2.powf(1.5);
        g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0)
    };
    let excess_kurtosis = if n < 4 {
        f64::NAN
    } else if m2 == 0.0 {
        0.0
    } else {
        let g2 = m4 / (m2 * m2) - 3.0;
        ((nf + 1.0) * g2 + 6.0) * (nf - 1.0) / ((nf - 2.0) * (nf - 3.0))
    };

    let mut sorted = v.to_vec();
    sorted.sort_by(f64::total_cmp);
    let percentiles = Percentiles {
        p1: percentile_sorted(&sorted, 1.0),
        p5: percentile_sorted(&sorted, 5.0),
        p50: percentile_sorted(&sorted, 50.0),
        p95: percentile_sorted(&sorted, 95.0),
        p99: percentile_sorted(&sorted, 99.0),
    };

    Ok(SummaryStats {
        n,
        mean,
        std_dev,
        min: sorted[0],
        max: sorted[n - 1],
        percentiles,
        skewness,
        excess_kurtosis,
        max_drawdown: max_drawdown(v),
    })
}

/// Linear interpolation between order statistics; `q` in percent.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q / 100.0 * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Running-max drawdown scan. Returns `None` if any value is non-positive.
pub fn max_drawdown(values: &[f64]) -> Option<f64> {
    if values.is_empty() || values.iter().any(|v| *v <= 0.0) {
        return None;
    }
    let mut peak = values[0];
    let mut worst = 0.0_f64;
    for &v in values {
        peak = peak.max(v);
        worst = worst.min(v / peak - 1.0);
    }
    Some(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfTable {
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
}

/// Sample autocorrelation with the biased (full-sample) denominator.
///
/// A zero-variance series has autocorrelation 1 at lag 0 and 0 elsewhere.
pub fn acf(s: &Series, lags: &[usize]) -> Result<AcfTable> {
    let v = s.values();
    let n = v.len();
    if let Some(&lag) = lags.iter().find(|&&k| k >= n) {
        return Err(Error::LagOutOfRange { lag, n });
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let denom: f64 = centered.iter().map(|d| d * d).sum();
    let values = lags
        .iter()
        .map(|&k| {
            if k == 0 {
                return 1.0;
            }
            if denom == 0.0 {
                return 0.0;
            }
            let num: f64 = centered[k..].iter().zip(&centered[..n - k]).map(|(a, b)| a * b).sum();
            num / denom
        })
        .collect();
    Ok(AcfTable {
        lags: lags.to_vec(),
        values,
    })
}

/// First differences of natural logarithms, stamped with the later date.
pub fn log_returns(s: &Series) -> Result<Series> {
    let v = s.values();
    if v.len() < 2 {
        return Err(Error::TooFewObservations {
            needed: 2,
            got: v.len(),
        });
    }
    if let Some(index) = v.iter().position(|x| *x <= 0.0) {
        return Err(Error::NonPositiveValue { index, value: v[index] });
    }
    let values = v.windows(2).map(|w| w[1].ln() - w[0].ln()).collect();
    Series::new(format!("{}_logret", s.name()), s.timestamps()[1..].to_vec(), values)
}
