//! MacKinnon response-surface critical values and approximate p-values for the
//! Dickey-Fuller tau statistic (single series, N = 1).
//!
//! Critical-value coefficients: MacKinnon (2010), "Critical Values for
//! Cointegration Tests", Queen's Economics Working Paper 1227, Table 2.
//! P-value polynomials and cut-offs: MacKinnon (1994), "Approximate Asymptotic
//! Distribution Functions for Unit-Root and Cointegration Tests", JBES 12(2),
//! with the published scaling already folded into the coefficients.

use statrs::distribution::{ContinuousCDF, Normal};

use super::AdfSpec;

/// `[beta_inf, beta_1, beta_2, beta_3]` for the 1%, 5% and 10% levels.
const TAU_C_2010: [[f64; 4]; 3] = [
    [-3.43035, -6.5393, -16.786, -79.433],
    [-2.86154, -2.8903, -4.234, -40.04],
    [-2.56677, -1.5384, -2.809, 0.0],
];

const TAU_CT_2010: [[f64; 4]; 3] = [
    [-3.95877, -9.0531, -28.428, -134.155],
    [-3.41049, -4.3904, -9.036, -45.374],
    [-3.12705, -2.5856, -3.925, -22.38],
];

const TAU_MAX_C: f64 = 2.74;
const TAU_MIN_C: f64 = -18.83;
const TAU_STAR_C: f64 = -1.61;
const TAU_SMALLP_C: [f64; 3] = [2.1659, 1.4412, 0.038269];
const TAU_LARGEP_C: [f64; 4] = [1.7339, 0.93202, -0.12745, -0.010368];

const TAU_MAX_CT: f64 = 0.7;
const TAU_MIN_CT: f64 = -16.18;
const TAU_STAR_CT: f64 = -2.89;
const TAU_SMALLP_CT: [f64; 3] = [3.2512, 1.6047, 0.049588];
const TAU_LARGEP_CT: [f64; 4] = [2.5261, 0.61654, -0.37956, -0.060285];

/// Bounds applied to reported p-values.
pub const P_FLOOR: f64 = 1e-6;
pub const P_CEIL: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CriticalValues {
    pub one_pct: f64,
    pub five_pct: f64,
    pub ten_pct: f64,
}

impl CriticalValues {
    pub fn at(&self, level: f64) -> Option<f64> {
        match level {
            l if (l - 0.01).abs() < 1e-12 => Some(self.one_pct),
            l if (l - 0.05).abs() < 1e-12 => Some(self.five_pct),
            l if (l - 0.10).abs() < 1e-12 => Some(self.ten_pct),
            _ => None,
        }
    }
}

fn poly(coefs: &[f64], x: f64) -> f64 {
    coefs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Finite-sample critical values `b_inf + b1/n + b2/n^2 + b3/n^3`.
///
/// `n_obs = None` returns the asymptotic values.
pub fn critical_values_for(n_obs: Option<usize>, spec: AdfSpec) -> CriticalValues {
    let table = match spec {
        AdfSpec::Constant => &TAU_C_2010,
        AdfSpec::ConstantTrend => &TAU_CT_2010,
    };
    let inv = n_obs.map_or(0.0, |n| 1.0 / n as f64);
    CriticalValues {
        one_pct: poly(&table[0], inv),
        five_pct: poly(&table[1], inv),
        ten_pct: poly(&table[2], inv),
    }
}

/// Raw MacKinnon (1994) p-value in `[0, 1]`, before clamping.
pub fn raw_p_value(stat: f64, spec: AdfSpec) -> f64 {
    let (max, min, star, small, large): (f64, f64, f64, &[f64], &[f64]) = match spec {
        AdfSpec::Constant => (TAU_MAX_C, TAU_MIN_C, TAU_STAR_C, &TAU_SMALLP_C, &TAU_LARGEP_C),
        AdfSpec::ConstantTrend => (TAU_MAX_CT, TAU_MIN_CT, TAU_STAR_CT, &TAU_SMALLP_CT, &TAU_LARGEP_CT),
    };
    if stat > max {
        return 1.0;
    }
    if stat < min {
        return 0.0;
    }
    let coefs = if stat <= star { small } else { large };
    let normal = Normal::standard();
    normal.cdf(poly(coefs, stat))
}

/// P-value clamped to `[P_FLOOR, P_CEIL]`; the flag reports whether clamping
/// happened.
pub fn p_value(stat: f64, spec: AdfSpec) -> (f64, bool) {
    let p = raw_p_value(stat, spec);
    if p < P_FLOOR {
        (P_FLOOR, true)
    } else if p > P_CEIL {
        (P_CEIL, true)
    } else {
        (p, false)
    }
}
