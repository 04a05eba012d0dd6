//! Seeded synthetic series used as fixtures and as stand-ins for real data.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fracdiff::{fracdiff_weights, DEFAULT_THRESHOLD};
use crate::rng;
use crate::series::{default_start, Series};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticKind {
    /// `P_t = P_{t-1} + ε_t`.
    RandomWalk,
    /// `x_t = φ x_{t-1} + ε_t`, started from the stationary distribution.
    Ar1 {
        phi: f64,
    },
    WhiteNoise,
    /// `(1 - L)^d x_t = ε_t`.
    Arfima0d0 {
        d: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n: usize,
    pub innovation_std: f64,
    /// Constant added to every value (the starting level of a random walk).
    pub level: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(kind: SyntheticKind, n: usize, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            kind,
            n,
            innovation_std: 1.0,
            level: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 50 {
            return Err(Error::InvalidSpec(format!("n must be at least 50, got {}", self.n)));
        }
        if !(self.innovation_std > 0.0 && self.innovation_std.is_finite()) {
            return Err(Error::InvalidSpec("innovation std must be positive".into()));
        }
        if !self.level.is_finite() {
            return Err(Error::InvalidSpec("level must be finite".into()));
        }
        match self.kind {
            SyntheticKind::Ar1 { phi } if !(phi.abs() < 1.0) => {
                Err(Error::InvalidSpec(format!("AR(1) needs |phi| < 1, got {phi}")))
            }
            SyntheticKind::Arfima0d0 { d } if !(d > -0.5 && d < 0.5) => {
                Err(Error::InvalidSpec(format!("ARFIMA needs d in (-0.5, 0.5), got {d}")))
            }
            _ => Ok(()),
        }
    }

    fn name(&self) -> String {
        match self.kind {
            SyntheticKind::RandomWalk => "random_walk".into(),
            SyntheticKind::Ar1 { phi } => format!("ar1_{phi}"),
            SyntheticKind::WhiteNoise => "white_noise".into(),
            SyntheticKind::Arfima0d0 { d } => format!("arfima_0_{d}_0"),
        }
    }
}

/// Coefficients of `(1 - L)^{-d}`: `ψ_k = ψ_{k-1} (k - 1 + d) / k`.
fn inverse_filter(d: f64, terms: usize) -> Vec<f64> {
    let mut psi = Vec::with_capacity(terms);
    psi.push(1.0);
    for k in 1..terms {
        let prev = psi[k - 1];
        psi.push(prev * (k as f64 - 1.0 + d) / k as f64);
    }
    psi
}

/// Burn-in used for ARFIMA generation: five times the forward filter's
/// truncation lag at the default threshold.
pub fn arfima_burn_in(d: f64) -> Result<usize> {
    Ok(5 * fracdiff_weights(d.abs(), DEFAULT_THRESHOLD, 1_000_000)?.truncation_lag)
}

pub fn generate(spec: &SyntheticSpec) -> Result<Series> {
    spec.validate()?;
    let mut rng = rng::from_seed(spec.seed);
    let normal = Normal::new(0.0, spec.innovation_std).expect("validated std");
    let n = spec.n;
    let values: Vec<f64> = match spec.kind {
        SyntheticKind::RandomWalk => {
            let mut level = spec.level;
            (0..n)
                .map(|_| {
                    level += normal.sample(&mut rng);
                    level
                })
                .collect()
        }
        SyntheticKind::WhiteNoise => (0..n).map(|_| spec.level + normal.sample(&mut rng)).collect(),
        SyntheticKind::Ar1 { phi } => {
            let mut x = normal.sample(&mut rng) / (1.0 - phi * phi).sqrt();
            let mut out = Vec::with_capacity(n);
            out.push(spec.level + x);
            for _ in 1..n {
                x = phi * x + normal.sample(&mut rng);
                out.push(spec.level + x);
            }
            out
        }
        SyntheticKind::Arfima0d0 { d } => {
            let burn = arfima_burn_in(d)?;
            let total = burn + n;
            let eps: Vec<f64> = (0..total).map(|_| normal.sample(&mut rng)).collect();
            let psi = inverse_filter(d, total);
            (burn..total)
                .map(|t| {
                    let x: f64 = psi[..=t].iter().zip(eps[..=t].iter().rev()).map(|(p, e)| p * e).sum();
                    spec.level + x
                })
                .collect()
        }
    };
    Series::from_values(spec.name(), default_start(), values)
}
